#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wir/errors.hpp"
#include "wir/linalg.hpp"

namespace wir {

enum class BasisKind { polynomial, slices, cubic_spline, custom };

// Recipe for the response basis f(y).  `order` means the polynomial degree,
// the slice count, or the interior knot count depending on the kind.
struct BasisSpec {
  BasisKind kind = BasisKind::polynomial;
  int order = 3;
  std::vector<std::function<double(double)>> functions;

  static BasisSpec polynomial(int degree) {
    if (degree < 1) throw InvalidSpec("polynomial basis needs degree >= 1");
    return {BasisKind::polynomial, degree, {}};
  }
  static BasisSpec slices(int count) {
    if (count < 2) throw InvalidSpec("slice basis needs at least 2 slices");
    return {BasisKind::slices, count, {}};
  }
  static BasisSpec cubic_spline(int interior_knots = 3) {
    if (interior_knots < 1) throw InvalidSpec("spline basis needs at least 1 interior knot");
    return {BasisKind::cubic_spline, interior_knots, {}};
  }
  static BasisSpec custom(std::vector<std::function<double(double)>> fns) {
    if (fns.empty()) throw InvalidSpec("custom basis needs at least one function");
    int k = static_cast<int>(fns.size());
    return {BasisKind::custom, k, std::move(fns)};
  }

  int column_count() const {
    switch (kind) {
      case BasisKind::polynomial: return order;
      case BasisKind::slices: return order - 1;
      case BasisKind::cubic_spline: return order + 3;
      case BasisKind::custom: return static_cast<int>(functions.size());
    }
    return 0;
  }

  // accepts "poly:4", "slices:8", "spline:5"
  static BasisSpec parse(const std::string& text) {
    auto colon = text.find(':');
    std::string name = text.substr(0, colon);
    int arg = 0;
    if (colon != std::string::npos) {
      try {
        std::size_t used = 0;
        arg = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw InvalidSpec("bad basis argument in '" + text + "'");
      }
    }
    if (name == "poly") return polynomial(colon == std::string::npos ? 3 : arg);
    if (name == "slices") return slices(colon == std::string::npos ? 8 : arg);
    if (name == "spline") return cubic_spline(colon == std::string::npos ? 3 : arg);
    throw InvalidSpec("unknown basis '" + text + "'");
  }

  std::string to_string() const {
    switch (kind) {
      case BasisKind::polynomial: return "poly:" + std::to_string(order);
      case BasisKind::slices: return "slices:" + std::to_string(order);
      case BasisKind::cubic_spline: return "spline:" + std::to_string(order);
      case BasisKind::custom: return "custom:" + std::to_string(order);
    }
    return "?";
  }
};

namespace detail {

// cut values are the largest member of each of the first m-1 equal-frequency
// bins; a tie with a cut therefore stays in the lower bin
inline std::vector<double> equal_frequency_cuts(const Eigen::VectorXd& y, int bins) {
  const auto n = y.size();
  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts(bins - 1);
  for (int k = 1; k < bins; ++k) {
    auto idx = (n * static_cast<Eigen::Index>(k)) / bins;
    cuts[k - 1] = sorted[idx - 1];
  }
  return cuts;
}

inline int bin_of(double y, const std::vector<double>& cuts) {
  int b = 0;
  for (double c : cuts)
    if (y > c) ++b;
  return b;  // 0-based bin index
}

// values of all cubic B-splines on a clamped knot vector at x (de Boor recursion)
inline void bspline_row(double x, const std::vector<double>& knots, double* out, int count) {
  const int degree = 3;
  double lo = knots[degree], hi = knots[knots.size() - degree - 1];
  x = std::min(std::max(x, lo), hi);
  std::vector<double> n(knots.size() - 1, 0.0);
  // degree 0: indicator of the knot span, closing the last interval on the right
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    bool last = knots[i] < hi && knots[i + 1] >= hi;
    if ((x >= knots[i] && x < knots[i + 1]) || (x >= hi && last)) n[i] = 1.0;
  }
  for (int deg = 1; deg <= degree; ++deg) {
    for (std::size_t i = 0; i + deg + 1 < knots.size(); ++i) {
      double left = 0.0, right = 0.0;
      double dl = knots[i + deg] - knots[i];
      double dr = knots[i + deg + 1] - knots[i + 1];
      if (dl > 0) left = (x - knots[i]) / dl * n[i];
      if (dr > 0) right = (knots[i + deg + 1] - x) / dr * n[i + 1];
      n[i] = left + right;
    }
  }
  for (int i = 0; i < count; ++i) out[i] = n[i];
}

}  // namespace detail

// Centered basis matrix F plus everything needed to evaluate the same basis
// at new responses (cut points / knots and the training column means).
struct BasisMatrix {
  BasisSpec spec;
  Eigen::MatrixXd F;             // n x r, columns centered
  Eigen::MatrixXd phi_n;         // F'F / n
  Eigen::VectorXd column_means;  // means of the uncentered columns
  std::vector<double> cuts;      // slice boundaries, or spline knots incl. range endpoints
  double condition = 1.0;        // condition number of phi_n

  Eigen::Index n() const { return F.rows(); }
  Eigen::Index r() const { return F.cols(); }
  bool ill_conditioned() const { return condition > 1e8; }

  Eigen::RowVectorXd raw_row(double y) const {
    const int r = spec.column_count();
    Eigen::RowVectorXd row(r);
    switch (spec.kind) {
      case BasisKind::polynomial: {
        double v = 1.0;
        for (int j = 0; j < r; ++j) row(j) = (v *= y);
        break;
      }
      case BasisKind::slices: {
        int b = detail::bin_of(y, cuts);
        for (int j = 0; j < r; ++j) row(j) = (b == j + 1) ? 1.0 : 0.0;
        break;
      }
      case BasisKind::cubic_spline: {
        std::vector<double> knots;
        knots.insert(knots.end(), 3, cuts.front());
        knots.insert(knots.end(), cuts.begin(), cuts.end());
        knots.insert(knots.end(), 3, cuts.back());
        std::vector<double> all(r + 1);
        detail::bspline_row(y, knots, all.data(), r + 1);
        for (int j = 0; j < r; ++j) row(j) = all[j + 1];  // first spline dropped
        break;
      }
      case BasisKind::custom:
        for (int j = 0; j < r; ++j) row(j) = spec.functions[j](y);
        break;
    }
    return row;
  }

  // centered basis coordinates for a new response
  Eigen::RowVectorXd evaluate(double y) const { return raw_row(y) - column_means.transpose(); }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd out(y.size(), r());
    for (Eigen::Index i = 0; i < y.size(); ++i) out.row(i) = evaluate(y(i));
    return out;
  }
};

inline BasisMatrix build_basis(const Eigen::VectorXd& y, const BasisSpec& spec) {
  const Eigen::Index n = y.size();
  const int r = spec.column_count();
  if (r < 1) throw InvalidSpec("basis has no columns");
  if (n <= r + 1)
    throw InsufficientData("need n > r + 1 observations (n = " + std::to_string(n) +
                           ", r = " + std::to_string(r) + ")");
  if (!y.allFinite()) throw InvalidSpec("responses must be finite");

  BasisMatrix b;
  b.spec = spec;
  switch (spec.kind) {
    case BasisKind::slices: {
      b.cuts = detail::equal_frequency_cuts(y, spec.order);
      std::vector<int> counts(spec.order, 0);
      for (Eigen::Index i = 0; i < n; ++i) ++counts[detail::bin_of(y(i), b.cuts)];
      for (int c : counts)
        if (c == 0) throw DegenerateBasis("empty slice (too many tied responses)");
      break;
    }
    case BasisKind::cubic_spline: {
      double lo = y.minCoeff(), hi = y.maxCoeff();
      if (!(lo < hi)) throw DegenerateBasis("constant responses");
      b.cuts.push_back(lo);
      auto interior = detail::equal_frequency_cuts(y, spec.order + 1);
      b.cuts.insert(b.cuts.end(), interior.begin(), interior.end());
      b.cuts.push_back(hi);
      break;
    }
    default: break;
  }

  Eigen::MatrixXd raw(n, r);
  for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = b.raw_row(y(i));
  if (!raw.allFinite()) throw DegenerateBasis("basis produced a non-finite value");

  b.column_means = raw.colwise().mean();
  b.F = raw.rowwise() - b.column_means.transpose();
  // second centering pass removes the rounding residue of the first
  Eigen::RowVectorXd resid = b.F.colwise().mean();
  b.F.rowwise() -= resid;
  b.column_means += resid;

  b.phi_n = symmetrized(b.F.transpose() * b.F / static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.phi_n, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (lo <= 1e-12)
    throw DegenerateBasis("basis Gram matrix is numerically singular");
  b.condition = hi / lo;
  return b;
}

struct RankCheck {
  bool satisfied = false;
  double smallest_singular_value = 0.0;
};

// checks rank(Xi' F / n) = d, the identifiability condition linking the
// latent coordinates to the chosen basis
inline RankCheck check_rank_condition(const Eigen::MatrixXd& xi, const BasisMatrix& basis,
                                      double tol = 1e-10) {
  if (xi.rows() != basis.n()) throw DimensionError("xi and basis row counts differ");
  const auto d = xi.cols();
  if (d < 1) throw DimensionError("xi must have at least one column");
  if (d > basis.r()) return {false, 0.0};
  Eigen::MatrixXd m = xi.transpose() * basis.F / static_cast<double>(basis.n());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  double smin = svd.singularValues().minCoeff();
  return {smin > tol, smin};
}

}  // namespace wir
