#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "wir/errors.hpp"
#include "wir/linalg.hpp"
#include "wir/weights.hpp"

namespace wir {

struct SpiceSolution {
  Eigen::MatrixXd omega;  // penalized inverse-correlation estimate, SPD
  double lambda = 0.0;
  int sweeps = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  double objective = 0.0;
  std::vector<double> objective_trace;  // objective before sweep 1, then after each sweep
};

// tr(S Omega) - log|Omega| + lambda * sum_{i != j} |Omega_ij|
inline double glasso_objective(const Eigen::MatrixXd& s, const Eigen::MatrixXd& omega,
                               double lambda) {
  double l1 = omega.cwiseAbs().sum() - omega.diagonal().cwiseAbs().sum();
  return (s.cwiseProduct(omega)).sum() - logdet_spd(omega, "omega") + lambda * l1;
}

// largest violation of the stationarity conditions:
//   off-diagonal: S_ij - [Omega^-1]_ij = -lambda sign(Omega_ij), |.| <= lambda on zeros
//   diagonal:     [Omega^-1]_jj = S_jj
inline double glasso_kkt_residual(const Eigen::MatrixXd& s, const Eigen::MatrixXd& omega,
                                  double lambda) {
  Eigen::MatrixXd g = s - spd_inverse(omega, "omega");
  const auto p = s.rows();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      double v;
      if (i == j)
        v = std::abs(g(i, j));
      else if (omega(i, j) != 0.0)
        v = std::abs(g(i, j) + lambda * (omega(i, j) > 0 ? 1.0 : -1.0));
      else
        v = std::max(0.0, std::abs(g(i, j)) - lambda);
      worst = std::max(worst, v);
    }
  }
  return worst;
}

namespace detail {

inline Eigen::MatrixXd validated_correlation(const Eigen::MatrixXd& corr) {
  require_square(corr, "correlation matrix");
  const auto p = corr.rows();
  if (p < 1) throw DimensionError("empty correlation matrix");
  if (!corr.allFinite()) throw InvalidSpec("correlation matrix has non-finite entries");
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw InvalidSpec("correlation matrix is not symmetric");
  Eigen::MatrixXd s = symmetrized(corr);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(s(j, j) - 1.0) > 1e-8)
      throw InvalidSpec("correlation matrix diagonal must be 1");
    s(j, j) = 1.0;
  }
  double off = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      if (i != j) off = std::max(off, std::abs(s(i, j)));
  if (off > 1.0 + 1e-8) throw InvalidSpec("correlation entries must lie in [-1, 1]");
  if (off > 1.0) {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j)
        if (i != j) s(i, j) = std::min(1.0, std::max(-1.0, s(i, j)));
  }
  return s;
}

}  // namespace detail

// L1-penalized inverse-correlation estimation.  Block-coordinate descent over
// columns of Omega; each column is a lasso subproblem solved by cyclic
// coordinate descent.  The working covariance W = Omega^-1 is maintained in
// closed form, and every block update minimizes the objective exactly in that
// block, so the objective never increases between sweeps.
inline SpiceSolution glasso(const Eigen::MatrixXd& corr, double lambda, double tol = 1e-6,
                            int max_sweeps = 500, const Eigen::MatrixXd* warm = nullptr) {
  if (lambda < 0) throw InvalidSpec("negative penalty");
  Eigen::MatrixXd s = detail::validated_correlation(corr);
  const auto p = s.rows();

  if (lambda == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.eigenvalues().minCoeff() <= 1e-12 * es.eigenvalues().maxCoeff())
      throw SingularInput("unpenalized solve needs a nonsingular correlation matrix");
    SpiceSolution sol;
    sol.lambda = 0.0;
    sol.omega = symmetrized(es.eigenvectors() *
                            es.eigenvalues().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose());
    sol.converged = true;
    sol.objective = glasso_objective(s, sol.omega, 0.0);
    sol.objective_trace.push_back(sol.objective);
    sol.kkt_residual = glasso_kkt_residual(s, sol.omega, 0.0);
    return sol;
  }

  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(p, p);
  if (warm && warm->rows() == p && warm->cols() == p) {
    Eigen::MatrixXd cand = symmetrized(*warm);
    Eigen::LLT<Eigen::MatrixXd> llt(cand);
    if (llt.info() == Eigen::Success) {
      omega = cand;
      w = symmetrized(llt.solve(Eigen::MatrixXd::Identity(p, p)));
    }
  }

  SpiceSolution sol;
  sol.lambda = lambda;
  sol.objective_trace.push_back(glasso_objective(s, omega, lambda));

  double mean_off = 1.0;
  if (p > 1) {
    double sum = s.cwiseAbs().sum() - static_cast<double>(p);  // diagonal is exactly 1
    mean_off = sum / static_cast<double>(p * (p - 1));
    if (mean_off <= 0) mean_off = 1.0;
  }

  std::vector<Eigen::Index> others(p > 1 ? p - 1 : 0);
  Eigen::VectorXd s12(p > 1 ? p - 1 : 0), om(p > 1 ? p - 1 : 0), q(p > 1 ? p - 1 : 0);
  Eigen::MatrixXd m(p > 1 ? p - 1 : 0, p > 1 ? p - 1 : 0);

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    Eigen::MatrixXd w_prev = w;
    for (Eigen::Index j = 0; j < p; ++j) {
      const Eigen::Index k = p - 1;
      for (Eigen::Index i = 0, t = 0; i < p; ++i)
        if (i != j) others[t++] = i;
      for (Eigen::Index a = 0; a < k; ++a) {
        s12(a) = s(others[a], j);
        om(a) = omega(others[a], j);
      }
      // Schur complement of the working covariance gives Omega11^-1
      double wjj = w(j, j);
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b)
          m(a, b) = w(others[a], others[b]) - w(others[a], j) * w(others[b], j) / wjj;

      if (k > 0) {
        // lasso: minimize (1/2) om' M om + s12' om + lambda ||om||_1
        q.noalias() = m * om;
        double scale = std::max(1.0, s12.cwiseAbs().maxCoeff());
        for (int pass = 0; pass < 1000; ++pass) {
          double biggest = 0.0;
          for (Eigen::Index a = 0; a < k; ++a) {
            double g = s12(a) + q(a) - m(a, a) * om(a);
            double next = 0.0;
            if (g > lambda)
              next = (lambda - g) / m(a, a);
            else if (g < -lambda)
              next = (-lambda - g) / m(a, a);
            double delta = next - om(a);
            if (delta != 0.0) {
              om(a) = next;
              q += delta * m.col(a);
              biggest = std::max(biggest, std::abs(delta));
            }
          }
          if (biggest <= 1e-10 * scale) break;
        }
        q.noalias() = m * om;  // refresh before the rank-one updates
      }
      double om_jj = 1.0 + (k > 0 ? om.dot(q) : 0.0);

      omega(j, j) = om_jj;
      w(j, j) = 1.0;
      for (Eigen::Index a = 0; a < k; ++a) {
        omega(others[a], j) = om(a);
        omega(j, others[a]) = om(a);
        w(others[a], j) = -q(a);
        w(j, others[a]) = -q(a);
        for (Eigen::Index b = 0; b < k; ++b) w(others[a], others[b]) = m(a, b) + q(a) * q(b);
      }
    }

    ++sol.sweeps;
    sol.objective_trace.push_back(glasso_objective(s, omega, lambda));
    double change = (w - w_prev).cwiseAbs().mean();
    if (change <= tol * mean_off) {
      sol.converged = true;
      break;
    }
  }

  sol.omega = omega;
  sol.objective = sol.objective_trace.back();
  sol.kkt_residual = glasso_kkt_residual(s, omega, lambda);
  return sol;
}

// warm-started sweep over a penalty grid; solutions come back in grid order
inline std::vector<SpiceSolution> glasso_path(const Eigen::MatrixXd& corr,
                                              std::vector<double> lambdas, double tol = 1e-6,
                                              int max_sweeps = 500) {
  std::vector<std::size_t> order(lambdas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });
  std::vector<SpiceSolution> out(lambdas.size());
  const Eigen::MatrixXd* warm = nullptr;
  for (std::size_t i : order) {
    out[i] = glasso(corr, lambdas[i], tol, max_sweeps, warm);
    warm = &out[i].omega;
  }
  return out;
}

// closed-form solution under the squared (rather than absolute) off-diagonal
// penalty: same eigenvectors as the correlation, eigenvalues remapped
inline Eigen::MatrixXd quad_penalty_omega(const Eigen::MatrixXd& corr, double lambda) {
  if (!(lambda > 0)) throw NonPositiveLambda("quadratic penalty needs lambda > 0");
  Eigen::MatrixXd s = detail::validated_correlation(corr);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::VectorXd phi = es.eigenvalues();
  for (Eigen::Index i = 0; i < phi.size(); ++i)
    phi(i) = (std::sqrt(phi(i) * phi(i) + 8.0 * lambda) - phi(i)) / (4.0 * lambda);
  return symmetrized(es.eigenvectors() * phi.asDiagonal() * es.eigenvectors().transpose());
}

// max-norm of S + 2 lambda Omega - Omega^-1, the gradient of the quadratic objective
inline double quad_stationarity_residual(const Eigen::MatrixXd& corr,
                                         const Eigen::MatrixXd& omega, double lambda) {
  Eigen::MatrixXd g = symmetrized(corr) + 2.0 * lambda * omega - spd_inverse(omega, "omega");
  return g.cwiseAbs().maxCoeff();
}

// correlation of the residual covariance, diagonal clamped to exactly 1
inline Eigen::MatrixXd residual_correlation(const ResidualCovariance& rc) {
  const auto p = rc.delta_hat.rows();
  Eigen::VectorXd d = rc.delta_hat.diagonal();
  for (Eigen::Index j = 0; j < p; ++j)
    if (!(d(j) > 0)) throw ZeroVariance(static_cast<int>(j));
  Eigen::VectorXd inv_sd = d.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd r = inv_sd.asDiagonal() * rc.delta_hat * inv_sd.asDiagonal();
  r = symmetrized(r);
  for (Eigen::Index j = 0; j < p; ++j) r(j, j) = 1.0;
  return r;
}

// inverse-covariance weight assembled from the penalized inverse correlation
inline WeightMatrix spice_weight(const ResidualCovariance& rc, double lambda,
                                 double tol = 1e-6, int max_sweeps = 500,
                                 SpiceSolution* info = nullptr,
                                 const Eigen::MatrixXd* warm = nullptr) {
  Eigen::MatrixXd r = residual_correlation(rc);
  SpiceSolution sol = glasso(r, lambda, tol, max_sweeps, warm);
  Eigen::VectorXd inv_sd = rc.delta_hat.diagonal().cwiseSqrt().cwiseInverse();
  WeightMatrix w;
  w.kind = WeightKind::spice;
  w.lambda = lambda;
  w.W = symmetrized(inv_sd.asDiagonal() * sol.omega * inv_sd.asDiagonal());
  w.rank = static_cast<int>(rc.delta_hat.rows());
  w.converged = sol.converged;
  if (info) *info = std::move(sol);
  return w;
}

inline WeightMatrix quad_penalty_weight(const ResidualCovariance& rc, double lambda) {
  Eigen::MatrixXd r = residual_correlation(rc);
  Eigen::MatrixXd omega = quad_penalty_omega(r, lambda);
  Eigen::VectorXd inv_sd = rc.delta_hat.diagonal().cwiseSqrt().cwiseInverse();
  WeightMatrix w;
  w.kind = WeightKind::quadratic_penalty;
  w.lambda = lambda;
  w.W = symmetrized(inv_sd.asDiagonal() * omega * inv_sd.asDiagonal());
  w.rank = static_cast<int>(rc.delta_hat.rows());
  return w;
}

inline WeightMatrix make_weight(const ResidualCovariance& rc, WeightKind kind,
                                std::optional<double> lambda = {},
                                SpiceSolution* info = nullptr) {
  switch (kind) {
    case WeightKind::scaled_identity: return weight_scaled_identity(rc);
    case WeightKind::diagonal: return weight_diagonal(rc);
    case WeightKind::pooled_inverse: return weight_pooled_inverse(rc);
    case WeightKind::spice:
      if (!lambda) throw InvalidSpec("spice weight needs a lambda");
      return spice_weight(rc, *lambda, 1e-6, 500, info);
    case WeightKind::quadratic_penalty:
      if (!lambda) throw NonPositiveLambda("quadratic penalty needs lambda > 0");
      return quad_penalty_weight(rc, *lambda);
  }
  throw InvalidSpec("unknown weight kind");
}

}  // namespace wir
