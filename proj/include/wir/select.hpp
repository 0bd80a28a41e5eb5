#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "wir/errors.hpp"
#include "wir/fitting.hpp"
#include "wir/parallel.hpp"
#include "wir/predict.hpp"
#include "wir/rng.hpp"

namespace wir {

struct CvCell {
  int fold = 0;
  double lambda = 0.0;
  double score = 0.0;
  bool converged = true;
  int sweeps = 0;
  double kkt_residual = 0.0;
};

struct CvResult {
  std::vector<double> lambda_grid;
  std::vector<double> scores;  // summed over folds, aligned with lambda_grid
  double chosen_lambda = 0.0;
  std::vector<int> fold_of;    // fold index per observation
  std::vector<CvCell> cells;   // folds x lambdas diagnostics
};

// K-fold likelihood-style score for the sparse weight's penalty.  Each fold
// is scored with the weight and reduction fitted on the other folds; held-out
// rows are centered and basis-evaluated with out-of-fold statistics only.
inline CvResult cv_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const BasisSpec& spec, int d, const std::vector<double>& grid,
                          int folds = 5, std::uint64_t seed = 0, int threads = 1) {
  const Eigen::Index n = X.rows();
  if (y.size() != n) throw LengthMismatch("X and y row counts differ");
  if (grid.empty()) throw InvalidSpec("empty lambda grid");
  for (double l : grid)
    if (!(l >= 0) || !std::isfinite(l)) throw InvalidSpec("lambda grid entries must be >= 0");
  if (folds < 2) throw InvalidSpec("need at least 2 folds");
  const int r = spec.column_count();
  if (n < static_cast<Eigen::Index>(folds) * (r + 2))
    throw FoldTooSmall("need n >= folds * (r + 2)");

  CvResult out;
  out.lambda_grid = grid;
  std::sort(out.lambda_grid.begin(), out.lambda_grid.end());
  out.lambda_grid.erase(std::unique(out.lambda_grid.begin(), out.lambda_grid.end()),
                        out.lambda_grid.end());

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto eng = make_engine(seed, {stream::folds});
  std::shuffle(order.begin(), order.end(), eng);
  out.fold_of.assign(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) out.fold_of[order[i]] = static_cast<int>(i) % folds;

  const std::vector<double>& lam = out.lambda_grid;
  const std::size_t L = lam.size();
  out.cells.assign(static_cast<std::size_t>(folds) * L, CvCell{});

  parallel_for(folds, threads, [&](int k) {
    std::vector<int> in, outof;
    for (Eigen::Index i = 0; i < n; ++i)
      (out.fold_of[i] == k ? in : outof).push_back(static_cast<int>(i));

    Eigen::MatrixXd x_out(outof.size(), X.cols()), x_in(in.size(), X.cols());
    Eigen::VectorXd y_out(outof.size()), y_in(in.size());
    for (std::size_t i = 0; i < outof.size(); ++i) {
      x_out.row(i) = X.row(outof[i]);
      y_out(i) = y(outof[i]);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
      x_in.row(i) = X.row(in[i]);
      y_in(i) = y(in[i]);
    }

    BasisMatrix basis = build_basis(y_out, spec);
    Eigen::RowVectorXd mean_out = x_out.colwise().mean();
    Eigen::MatrixXd z_out = x_out.rowwise() - mean_out;
    ResidualCovariance rc = residual_covariance(z_out, basis);
    Eigen::MatrixXd corr = residual_correlation(rc);
    Eigen::VectorXd log_diag = rc.delta_hat.diagonal().array().log();

    Eigen::MatrixXd z_in = x_in.rowwise() - mean_out;
    Eigen::MatrixXd f_in = basis.evaluate(y_in);

    // descending sweep shares warm starts; results keyed back to grid order
    std::vector<std::size_t> by_size(L);
    std::iota(by_size.begin(), by_size.end(), std::size_t{0});
    std::sort(by_size.begin(), by_size.end(),
              [&](std::size_t a, std::size_t b) { return lam[a] > lam[b]; });

    const Eigen::MatrixXd* warm = nullptr;
    Eigen::MatrixXd prev_omega;
    for (std::size_t gi : by_size) {
      CvCell& cell = out.cells[static_cast<std::size_t>(k) * L + gi];
      cell.fold = k;
      cell.lambda = lam[gi];
      try {
        SpiceSolution sol = glasso(corr, lam[gi], 1e-6, 500, warm);
        prev_omega = sol.omega;
        warm = &prev_omega;
        cell.converged = sol.converged;
        cell.sweeps = sol.sweeps;
        cell.kkt_residual = sol.kkt_residual;
        if (!sol.converged) {
          cell.score = std::numeric_limits<double>::infinity();
          continue;
        }
        Eigen::VectorXd inv_sd = rc.delta_hat.diagonal().cwiseSqrt().cwiseInverse();
        WeightMatrix w;
        w.kind = WeightKind::spice;
        w.lambda = lam[gi];
        w.W = symmetrized(inv_sd.asDiagonal() * sol.omega * inv_sd.asDiagonal());
        w.rank = static_cast<int>(rc.delta_hat.rows());
        ReductionFit fit = fit_reduction(x_out, basis, w, d);

        Eigen::MatrixXd a = z_in - f_in * fit.b_hat.transpose() * fit.Gamma_hat.transpose();
        double quad = (a * w.W).cwiseProduct(a).sum() / static_cast<double>(a.rows());
        double logdet_w = logdet_spd(sol.omega, "omega") - log_diag.sum();
        cell.score = quad - logdet_w;
      } catch (const Error&) {
        cell.converged = false;
        cell.score = std::numeric_limits<double>::infinity();
      }
    }
  });

  out.scores.assign(L, 0.0);
  for (int k = 0; k < folds; ++k)
    for (std::size_t gi = 0; gi < L; ++gi)
      out.scores[gi] += out.cells[static_cast<std::size_t>(k) * L + gi].score;

  std::size_t best = 0;
  for (std::size_t gi = 1; gi < L; ++gi)
    if (out.scores[gi] < out.scores[best]) best = gi;
  if (!std::isfinite(out.scores[best]))
    throw NumericalError("no penalty value produced a converged solve in every fold");
  out.chosen_lambda = lam[best];
  return out;
}

struct PermTestResult {
  int d0 = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<double> perm_stats;  // statistics of the successful permutations
  int nperm = 0;                   // requested permutation count
  int failures = 0;
};

namespace detail {

// signal part X P' of the null fit and its complement; they sum to X exactly
struct NullSplit {
  Eigen::MatrixXd projected;
  Eigen::MatrixXd residual;
};

inline NullSplit null_split(const Eigen::MatrixXd& X, const ReductionFit* null_fit) {
  NullSplit s;
  if (null_fit) {
    // P = Gamma (Gamma' W Gamma)^-1 Gamma' W, so X P' = (X coef') Gamma'
    s.projected = (X * null_fit->coef.transpose()) * null_fit->Gamma_hat.transpose();
  } else {
    s.projected = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  }
  s.residual = X - s.projected;
  return s;
}

}  // namespace detail

// Tests d = d0 by comparing the in-sample prediction error of a (d0+1)-dim
// fit against refits on data whose non-signal part is row-permuted.  At
// d0 = 0 the whole predictor matrix is permuted.
inline PermTestResult permutation_test_d(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                         const BasisSpec& spec, WeightKind kind,
                                         std::optional<double> lambda, int d0, int nperm,
                                         std::uint64_t seed = 0, int threads = 1) {
  if (nperm < 1) throw InvalidSpec("need at least one permutation");
  if (d0 < 0) throw DimensionError("d0 must be nonnegative");
  const int r = spec.column_count();
  if (d0 + 1 > r)
    throw DimensionError("testing d0 = " + std::to_string(d0) + " needs a basis with r > d0");
  const Eigen::Index n = X.rows();
  if (y.size() != n) throw LengthMismatch("X and y row counts differ");

  BasisMatrix basis = build_basis(y, spec);

  ReductionFit fit = fit_pipeline(X, basis, kind, lambda, d0 + 1);
  double stat = rms(in_sample_predictions(make_predictor(fit, X, y)), y);

  std::optional<ReductionFit> null_fit;
  if (d0 > 0) null_fit = fit_pipeline(X, basis, kind, lambda, d0);
  detail::NullSplit split = detail::null_split(X, null_fit ? &*null_fit : nullptr);

  std::vector<double> stats(nperm, std::numeric_limits<double>::quiet_NaN());
  parallel_for(nperm, threads, [&](int i) {
    auto eng = make_engine(seed, {stream::permutation, static_cast<std::uint64_t>(i)});
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), eng);
    Eigen::MatrixXd xp = split.projected;
    for (Eigen::Index row = 0; row < n; ++row) xp.row(row) += split.residual.row(perm[row]);
    try {
      ReductionFit f = fit_pipeline(xp, basis, kind, lambda, d0 + 1);
      stats[i] = rms(in_sample_predictions(make_predictor(f, xp, y)), y);
    } catch (const Error&) {
      // left as NaN and counted as a failure
    }
  });

  PermTestResult res;
  res.d0 = d0;
  res.statistic = stat;
  res.nperm = nperm;
  int below = 0;
  for (double v : stats) {
    if (std::isnan(v)) {
      ++res.failures;
      continue;
    }
    res.perm_stats.push_back(v);
    if (v <= stat) ++below;
  }
  res.p_value = (1.0 + below) / (static_cast<double>(res.perm_stats.size()) + 1.0);
  return res;
}

struct SelectDResult {
  int d_hat = 0;
  std::vector<PermTestResult> tests;
};

// smallest d0 whose permutation test is not rejected at level alpha;
// d_max when every hypothesis up to d_max is rejected.  A spectrum whose
// (d0+1)-th direction is numerically absent also ends the search at d0,
// since no further direction exists to test.
inline SelectDResult select_d(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const BasisSpec& spec, WeightKind kind,
                              std::optional<double> lambda, double alpha = 0.05,
                              int d_max = -1, int nperm = 1000, std::uint64_t seed = 0,
                              int threads = 1) {
  const int r = spec.column_count();
  if (d_max < 0) d_max = r - 1;
  if (d_max > r - 1) throw DimensionError("d_max cannot exceed r - 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidSpec("alpha must lie in [0, 1]");

  SelectDResult out;
  for (int d0 = 0; d0 <= d_max; ++d0) {
    PermTestResult test;
    try {
      test = permutation_test_d(X, y, spec, kind, lambda, d0, nperm,
                                derive_seed(seed, {stream::permutation,
                                                   static_cast<std::uint64_t>(d0)}),
                                threads);
    } catch (const EigengapViolation&) {
      out.d_hat = d0;
      return out;
    }
    out.tests.push_back(std::move(test));
    if (out.tests.back().p_value > alpha) {
      out.d_hat = d0;
      return out;
    }
  }
  out.d_hat = d_max;
  return out;
}

}  // namespace wir
