#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "wir/errors.hpp"
#include "wir/format.hpp"

namespace wir {

// response plus predictor block; names, when present, are stored with the
// response's first
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;
};

namespace detail {

// one comma-separated record; quoted fields may hold commas and doubled
// quotes (newlines inside quotes are out of scope)
inline std::vector<std::string> split_record(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", row, fields.size() + 1);
  fields.push_back(std::move(cur));
  return fields;
}

inline bool parse_number(const std::string& field, double& value) {
  std::size_t b = field.find_first_not_of(" \t");
  if (b == std::string::npos) return false;
  std::size_t e = field.find_last_not_of(" \t") + 1;
  const char* first = field.data() + b;
  const char* last = field.data() + e;
  if (*first == '+') ++first;  // from_chars rejects an explicit plus
  auto res = std::from_chars(first, last, value);
  return res.ec == std::errc() && res.ptr == last;
}

struct Table {
  std::vector<std::string> names;  // empty when the file has no header
  std::vector<std::vector<double>> rows;
  std::size_t columns = 0;
};

// physical 1-based row numbers are kept for error reporting, counting the
// header; fully blank lines are skipped
inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  std::size_t row = 0;
  bool saw_any = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields = split_record(line, row);
    if (!saw_any) {
      saw_any = true;
      t.columns = fields.size();
      double v;
      bool numeric = true;
      for (const std::string& f : fields)
        if (!parse_number(f, v)) {
          numeric = false;
          break;
        }
      if (!numeric) {
        t.names = std::move(fields);
        continue;
      }
    }
    if (fields.size() != t.columns)
      throw ParseError("expected " + std::to_string(t.columns) + " fields, found " +
                           std::to_string(fields.size()),
                       row, 1);
    std::vector<double> parsed(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].find_first_not_of(" \t") == std::string::npos)
        throw MissingValue(row, c + 1);
      if (!parse_number(fields[c], parsed[c]))
        throw ParseError("unparseable number '" + fields[c] + "'", row, c + 1);
      if (!std::isfinite(parsed[c]))
        throw ParseError("non-finite value", row, c + 1);
    }
    t.rows.push_back(std::move(parsed));
  }
  return t;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot open '" + path + "'");
  return in;
}

inline void write_field(std::ostream& os, const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    os << s;
    return;
  }
  os << '"';
  for (char ch : s) {
    if (ch == '"') os << '"';
    os << ch;
  }
  os << '"';
}

}  // namespace detail

// first column is the response unless y_col (0-based) says otherwise
inline Dataset load_dataset(std::istream& in, int y_col = 0) {
  detail::Table t = detail::read_table(in);
  if (t.rows.size() < 2) throw InsufficientData("need at least 2 data rows");
  if (t.columns < 2) throw InvalidSpec("need a response column and at least one predictor");
  if (y_col < 0 || static_cast<std::size_t>(y_col) >= t.columns)
    throw InvalidSpec("response column out of range");

  const std::size_t n = t.rows.size(), p = t.columns - 1;
  Dataset ds;
  ds.y.resize(n);
  ds.X.resize(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    ds.y(i) = t.rows[i][y_col];
    std::size_t k = 0;
    for (std::size_t c = 0; c < t.columns; ++c)
      if (static_cast<int>(c) != y_col) ds.X(i, k++) = t.rows[i][c];
  }
  if (!t.names.empty()) {
    ds.column_names.push_back(t.names[y_col]);
    for (std::size_t c = 0; c < t.columns; ++c)
      if (static_cast<int>(c) != y_col) ds.column_names.push_back(t.names[c]);
  }
  return ds;
}

inline Dataset load_dataset_file(const std::string& path, int y_col = 0) {
  auto in = detail::open_input(path);
  return load_dataset(in, y_col);
}

// predictors only (every column numeric); for feeding new rows to predict
inline Eigen::MatrixXd load_matrix(std::istream& in, std::vector<std::string>* names = nullptr) {
  detail::Table t = detail::read_table(in);
  if (t.rows.empty()) throw InsufficientData("no data rows");
  Eigen::MatrixXd X(t.rows.size(), t.columns);
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t c = 0; c < t.columns; ++c) X(i, c) = t.rows[i][c];
  if (names) *names = t.names;
  return X;
}

inline Eigen::MatrixXd load_matrix_file(const std::string& path,
                                        std::vector<std::string>* names = nullptr) {
  auto in = detail::open_input(path);
  return load_matrix(in, names);
}

inline void write_dataset(const Dataset& ds, std::ostream& os) {
  if (!ds.column_names.empty()) {
    if (ds.column_names.size() != static_cast<std::size_t>(ds.X.cols()) + 1)
      throw LengthMismatch("column name count differs from column count");
    for (std::size_t c = 0; c < ds.column_names.size(); ++c) {
      if (c) os << ',';
      detail::write_field(os, ds.column_names[c]);
    }
    os << '\n';
  }
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    os << format_double(ds.y(i));
    for (Eigen::Index c = 0; c < ds.X.cols(); ++c) os << ',' << format_double(ds.X(i, c));
    os << '\n';
  }
}

inline void write_predictions(const Eigen::VectorXd& y_hat, std::ostream& os) {
  os << "y_hat\n";
  for (Eigen::Index i = 0; i < y_hat.size(); ++i) os << format_double(y_hat(i)) << '\n';
}

}  // namespace wir
