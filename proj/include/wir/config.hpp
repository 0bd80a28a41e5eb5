#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wir/basis.hpp"
#include "wir/errors.hpp"
#include "wir/sim.hpp"
#include "wir/weights.hpp"

namespace wir {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(const std::string& s, std::size_t line) {
  if (s.size() >= 2 && s.front() == '"') {
    if (s.back() != '"') throw ParseError("unterminated string", line, 1);
    return s.substr(1, s.size() - 2);
  }
  return s;
}

struct ConfigValue {
  std::vector<std::string> items;
  bool is_array = false;
  std::size_t line = 0;
};

using ConfigMap = std::map<std::string, ConfigValue>;

// flat `key = value` pairs; values are scalars or one-line [a, b, c] arrays,
// strings may be double-quoted, # starts a comment outside quotes
inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    bool in_quote = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') in_quote = !in_quote;
      if (raw[i] == '#' && !in_quote) {
        raw.resize(i);
        break;
      }
    }
    std::string text = trim(raw);
    if (text.empty()) continue;
    std::size_t eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line, 1);
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", line, 1);
    if (value.empty()) throw ParseError("missing value for '" + key + "'", line, 1);
    if (out.count(key)) throw ParseError("duplicate key '" + key + "'", line, 1);

    ConfigValue cv;
    cv.line = line;
    if (value.front() == '[') {
      if (value.back() != ']') throw ParseError("unterminated array", line, 1);
      cv.is_array = true;
      std::string body = value.substr(1, value.size() - 2);
      std::string item;
      bool quoted = false;
      for (char ch : body) {
        if (ch == '"') quoted = !quoted;
        if (ch == ',' && !quoted) {
          cv.items.push_back(unquote(trim(item), line));
          item.clear();
        } else {
          item += ch;
        }
      }
      if (!trim(item).empty() || cv.items.empty()) cv.items.push_back(unquote(trim(item), line));
      for (const std::string& s : cv.items)
        if (s.empty()) throw ParseError("empty array element in '" + key + "'", line, 1);
    } else {
      cv.items.push_back(unquote(value, line));
    }
    out.emplace(std::move(key), std::move(cv));
  }
  return out;
}

// line 0 marks text that came from a flag rather than a file
inline double to_double(const std::string& s, std::size_t line) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  double v;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    std::string msg = "expected a number, got '" + s + "'";
    if (line == 0) throw InvalidSpec(msg);
    throw ParseError(msg, line, 1);
  }
  return v;
}

inline long long to_int(const std::string& s, std::size_t line) {
  double v = to_double(s, line);
  long long i = std::llround(v);
  if (v != static_cast<double>(i)) {
    std::string msg = "expected an integer, got '" + s + "'";
    if (line == 0) throw InvalidSpec(msg);
    throw ParseError(msg, line, 1);
  }
  return i;
}

inline bool to_bool(const std::string& s, std::size_t line) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ParseError("expected true or false, got '" + s + "'", line, 1);
}

// "p", "p+4", "p-1", "p*2", "p/2", or a plain number
inline double eval_p_expression(const std::string& text, int p, std::size_t line) {
  std::string s;
  for (char ch : text)
    if (ch != ' ' && ch != '\t') s += ch;
  if (s.empty()) throw ParseError("empty expression", line, 1);
  if (s[0] != 'p') return to_double(s, line);
  if (s.size() == 1) return p;
  double k = to_double(trim(s.substr(2)), line);
  switch (s[1]) {
    case '+': return p + k;
    case '-': return p - k;
    case '*': return p * k;
    case '/':
      if (k == 0) throw ParseError("division by zero in '" + s + "'", line, 1);
      return p / k;
    default: throw ParseError("bad expression '" + s + "'", line, 1);
  }
}

inline DeltaSpec parse_delta(const std::string& text, int p, std::size_t line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  auto num = [&](const std::string& s) { return eval_p_expression(s, p, line); };
  try {
    if (parts[0] == "regular" && parts.size() == 3) return DeltaSpec::regular(num(parts[1]), num(parts[2]));
    if (parts[0] == "uniform" && parts.size() == 3) return DeltaSpec::uniform(num(parts[1]), num(parts[2]));
    if (parts[0] == "ar" && parts.size() == 4)
      return DeltaSpec::ar(num(parts[1]), num(parts[2]), num(parts[3]));
  } catch (const InvalidSpec& e) {
    throw ParseError(std::string(e.what()) + " in '" + text + "'", line, 1);
  }
  throw ParseError("bad delta spec '" + text +
                       "' (want regular:lo:hi, uniform:lo:hi, or ar:theta:lo:hi)",
                   line, 1);
}

inline GammaSpec parse_gamma(const std::string& text, std::size_t line) {
  std::size_t colon = text.find(':');
  std::string name = text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (name == "gaussian") return GammaSpec::gaussian(arg.empty() ? 1 : static_cast<int>(to_int(arg, line)));
    if (name == "first" && !arg.empty()) return GammaSpec::first_coordinate_only(to_double(arg, line));
  } catch (const InvalidSpec& e) {
    throw ParseError(std::string(e.what()) + " in '" + text + "'", line, 1);
  }
  throw ParseError("bad gamma spec '" + text + "' (want gaussian, gaussian:d, or first:value)",
                   line, 1);
}

inline XiKind parse_xi(const std::string& text, std::size_t line) {
  if (text == "identity") return XiKind::identity;
  if (text == "exp") return XiKind::exp_standardized;
  throw ParseError("bad xi spec '" + text + "' (want identity or exp)", line, 1);
}

inline YDist parse_y_dist(const std::string& text, std::size_t line) {
  if (text == "normal") return YDist::std_normal;
  if (text == "uniform") return YDist::uniform_04;
  throw ParseError("bad y distribution '" + text + "' (want normal or uniform)", line, 1);
}

}  // namespace detail

// "0.1,0.2,0.5" or "lo:hi:COUNT" with an optional log/lin suffix (log default)
inline std::vector<double> parse_lambda_grid(const std::string& text) {
  if (text.find(',') != std::string::npos || text.find(':') == std::string::npos) {
    std::vector<double> grid;
    std::string cur;
    auto flush = [&] {
      std::string s = detail::trim(cur);
      if (s.empty()) throw InvalidSpec("empty entry in lambda grid '" + text + "'");
      grid.push_back(detail::to_double(s, 0));
      cur.clear();
    };
    for (char ch : text) {
      if (ch == ',') flush();
      else cur += ch;
    }
    flush();
    return grid;
  }

  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3 && parts.size() != 4)
    throw InvalidSpec("bad lambda grid '" + text + "' (want lo:hi:count[:log|:lin])");
  double lo = detail::to_double(detail::trim(parts[0]), 0);
  double hi = detail::to_double(detail::trim(parts[1]), 0);
  std::string count_text = detail::trim(parts[2]);
  bool log_scale = true;
  if (parts.size() == 4) {
    std::string scale = detail::trim(parts[3]);
    if (scale == "lin") log_scale = false;
    else if (scale != "log")
      throw InvalidSpec("bad lambda grid scale '" + scale + "' (want log or lin)");
  } else if (count_text.size() >= 3 && count_text.substr(count_text.size() - 3) == "lin") {
    log_scale = false;
    count_text.resize(count_text.size() - 3);
  } else if (count_text.size() >= 3 && count_text.substr(count_text.size() - 3) == "log") {
    count_text.resize(count_text.size() - 3);
  }
  long long count = detail::to_int(detail::trim(count_text), 0);
  if (count < 1) throw InvalidSpec("lambda grid needs at least one point");
  if (!(hi >= lo)) throw InvalidSpec("lambda grid needs hi >= lo");
  if (log_scale && !(lo > 0)) throw InvalidSpec("log-spaced lambda grid needs lo > 0");

  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  for (long long i = 0; i < count; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = log_scale ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                        : lo + t * (hi - lo);
  }
  return grid;
}

// Expand a study description into fully resolved cells.  `p`, `n`, `delta`,
// `gamma`, `weight`, `basis`, and `lambda` may be arrays and combine as a
// cartesian product; `n` and delta bounds may be expressions in p.
inline StudyConfig load_study_config(std::istream& in) {
  detail::ConfigMap map = detail::parse_config(in);

  static const char* known[] = {"p",      "n",     "delta",        "gamma",
                                "xi",     "y",     "weight",       "basis",
                                "lambda", "d",     "n_new",        "replications",
                                "seed",   "threads", "regenerate_model"};
  for (const auto& [key, value] : map) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError("unknown key '" + key + "'", value.line, 1);
  }
  auto require = [&](const char* key) -> const detail::ConfigValue& {
    auto it = map.find(key);
    if (it == map.end()) throw ParseError(std::string("missing required key '") + key + "'");
    return it->second;
  };
  auto scalar = [&](const char* key, const std::string& fallback) {
    auto it = map.find(key);
    if (it == map.end()) return std::pair<std::string, std::size_t>{fallback, 0};
    if (it->second.is_array) throw ParseError(std::string("'") + key + "' cannot be an array",
                                              it->second.line, 1);
    return std::pair<std::string, std::size_t>{it->second.items[0], it->second.line};
  };
  auto list = [&](const char* key, const std::string& fallback) {
    auto it = map.find(key);
    detail::ConfigValue cv;
    if (it == map.end()) {
      cv.items.push_back(fallback);
      return cv;
    }
    return it->second;
  };

  StudyConfig study;
  {
    auto [v, line] = scalar("replications", "100");
    study.replications = static_cast<int>(detail::to_int(v, line));
  }
  {
    auto [v, line] = scalar("seed", "0");
    study.seed = static_cast<std::uint64_t>(detail::to_int(v, line));
  }
  {
    auto [v, line] = scalar("threads", "1");
    study.threads = static_cast<int>(detail::to_int(v, line));
  }
  {
    auto [v, line] = scalar("regenerate_model", "true");
    study.regenerate_model = detail::to_bool(v, line);
  }

  auto [xi_text, xi_line] = scalar("xi", "identity");
  XiKind xi = detail::parse_xi(xi_text, xi_line);
  auto [y_text, y_line] = scalar("y", "normal");
  YDist y_dist = detail::parse_y_dist(y_text, y_line);
  auto [d_text, d_line] = scalar("d", "1");
  int d = static_cast<int>(detail::to_int(d_text, d_line));
  auto [n_new_text, n_new_line] = scalar("n_new", "100");
  Eigen::Index n_new = detail::to_int(n_new_text, n_new_line);

  const detail::ConfigValue& ps = require("p");
  const detail::ConfigValue& ns = require("n");
  const detail::ConfigValue& deltas = require("delta");
  detail::ConfigValue gammas = list("gamma", "gaussian");
  detail::ConfigValue weights = list("weight", "identity");
  detail::ConfigValue bases = list("basis", "poly:3");
  detail::ConfigValue lambdas = list("lambda", "");

  for (const std::string& w_text : weights.items) {
    WeightKind kind = weight_kind_from_string(w_text);
    bool needs = kind == WeightKind::spice || kind == WeightKind::quadratic_penalty;
    if (needs && lambdas.items[0].empty())
      throw ParseError("weight '" + w_text + "' needs lambda", weights.line, 1);
  }

  auto tag = [](const detail::ConfigValue& cv, const char* name, const std::string& value) {
    return cv.is_array ? std::string(",") + name + "=" + value : std::string();
  };

  for (const std::string& p_text : ps.items) {
    int p = static_cast<int>(detail::to_int(p_text, ps.line));
    for (const std::string& n_text : ns.items) {
      long long n = std::llround(detail::eval_p_expression(n_text, p, ns.line));
      if (n < 2) throw ParseError("n resolves to " + std::to_string(n) + " at p = " +
                                      std::to_string(p),
                                  ns.line, 1);
      for (const std::string& delta_text : deltas.items)
        for (const std::string& gamma_text : gammas.items)
          for (const std::string& weight_text : weights.items)
            for (const std::string& basis_text : bases.items)
              for (const std::string& lambda_text : lambdas.items) {
                StudyCell cell;
                cell.config.model.p = p;
                cell.config.model.delta = detail::parse_delta(delta_text, p, deltas.line);
                cell.config.model.gamma = detail::parse_gamma(gamma_text, gammas.line);
                cell.config.model.xi = xi;
                cell.config.model.y_dist = y_dist;
                cell.config.n = n;
                cell.config.weight = weight_kind_from_string(weight_text);
                if (!lambda_text.empty())
                  cell.config.lambda = detail::to_double(lambda_text, lambdas.line);
                cell.config.basis = BasisSpec::parse(basis_text);
                cell.config.d = d;
                cell.config.n_new = n_new;

                cell.label = "p=" + std::to_string(p) + ",n=" + std::to_string(n) +
                             tag(deltas, "delta", delta_text) + tag(gammas, "gamma", gamma_text) +
                             tag(weights, "weight", weight_text) +
                             tag(bases, "basis", basis_text) +
                             tag(lambdas, "lambda", lambda_text);
                study.cells.push_back(std::move(cell));
              }
    }
  }
  return study;
}

}  // namespace wir
