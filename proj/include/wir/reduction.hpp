#pragma once

#include <Eigen/Dense>

#include <string>

#include "wir/basis.hpp"
#include "wir/errors.hpp"
#include "wir/linalg.hpp"
#include "wir/weights.hpp"

namespace wir {

// Fitted weighted inverse regression.  The reduction of a new predictor
// vector is coef * (x - mu_hat); Gamma_hat' W Gamma_hat equals
// diag(eigvals[0..d-1]) by construction.
struct ReductionFit {
  Eigen::VectorXd mu_hat;     // p
  Eigen::MatrixXd B_hat;      // p x r slope of Z on the basis
  Eigen::MatrixXd K_hat;      // r x r
  Eigen::VectorXd eigvals;    // all r eigenvalues of K_hat, descending
  Eigen::MatrixXd V_d;        // r x d leading eigenvectors
  Eigen::MatrixXd Gamma_hat;  // p x d
  Eigen::MatrixXd b_hat;      // d x r latent coordinates of the basis
  Eigen::MatrixXd coef;       // d x p reduction map
  WeightMatrix W_hat;
  BasisMatrix basis;
  int d = 1;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    if (x.size() != mu_hat.size()) throw DimensionError("predictor length mismatch");
    return coef * (x - mu_hat);
  }
  // one reduction per row of X
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& X) const {
    if (X.cols() != mu_hat.size()) throw DimensionError("predictor width mismatch");
    return (X.rowwise() - mu_hat.transpose()) * coef.transpose();
  }
};

inline ReductionFit fit_reduction(const Eigen::MatrixXd& X, const BasisMatrix& basis,
                                  const WeightMatrix& W, int d) {
  const Eigen::Index n = X.rows(), p = X.cols(), r = basis.r();
  if (n != basis.n()) throw DimensionError("X and basis row counts differ");
  if (W.W.rows() != p || W.W.cols() != p) throw DimensionError("weight matrix is not p x p");
  if (d < 1 || d > r)
    throw DimensionError("d must lie in [1, r]; got d = " + std::to_string(d) +
                         ", r = " + std::to_string(r));
  if (!X.allFinite()) throw InvalidSpec("predictors must be finite");

  ReductionFit fit;
  fit.d = d;
  fit.basis = basis;
  fit.W_hat = W;
  fit.mu_hat = X.colwise().mean();
  Eigen::MatrixXd Z = X.rowwise() - fit.mu_hat.transpose();

  // B = Z'F (F'F)^-1, with F'F = n phi_n
  Eigen::MatrixXd ftz = basis.F.transpose() * Z / static_cast<double>(n);
  fit.B_hat = basis.phi_n.ldlt().solve(ftz).transpose();

  Eigen::MatrixXd phi_half = sym_sqrt(basis.phi_n);
  Eigen::MatrixXd wb = W.W.selfadjointView<Eigen::Lower>() * fit.B_hat;
  fit.K_hat = symmetrized(phi_half * (fit.B_hat.transpose() * wb) * phi_half);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.K_hat);
  fit.eigvals = es.eigenvalues().reverse();
  Eigen::MatrixXd V = es.eigenvectors().rowwise().reverse();

  double top = fit.eigvals(0);
  double next = d < r ? fit.eigvals(d) : 0.0;
  if (!(top > 0) || fit.eigvals(d - 1) - next <= 1e-12 * top)
    throw EigengapViolation("eigenvalue gap below tolerance at d = " + std::to_string(d));

  fit.V_d = V.leftCols(d);
  fit.Gamma_hat = fit.B_hat * phi_half * fit.V_d;

  // sign convention: the largest-magnitude entry of each reduction direction
  // is positive, which pins the estimate down across basis rotations
  for (int c = 0; c < d; ++c) {
    Eigen::Index at = 0;
    fit.Gamma_hat.col(c).cwiseAbs().maxCoeff(&at);
    if (fit.Gamma_hat(at, c) < 0) {
      fit.Gamma_hat.col(c) = -fit.Gamma_hat.col(c);
      fit.V_d.col(c) = -fit.V_d.col(c);
    }
  }

  fit.b_hat = fit.V_d.transpose() * sym_inv_sqrt(basis.phi_n);
  Eigen::VectorXd prec = fit.eigvals.head(d);
  fit.coef = prec.cwiseInverse().asDiagonal() *
             (fit.Gamma_hat.transpose() * W.W.selfadjointView<Eigen::Lower>());
  return fit;
}

// Known-truth counterpart used by the simulation harness and the diagnostics.
struct PopulationModel {
  Eigen::MatrixXd Gamma;  // p x d, columns arranged so Gamma' W Gamma is diagonal
  Eigen::MatrixXd Delta;  // p x p SPD
  Eigen::VectorXd mu;     // p
  Eigen::MatrixXd W;      // p x p SPD population weight
  double h = 0.0;         // signal-strength rate at this p
};

inline PopulationModel make_population_model(Eigen::MatrixXd Gamma, Eigen::MatrixXd Delta,
                                             Eigen::VectorXd mu, Eigen::MatrixXd W, double h) {
  const auto p = Gamma.rows();
  if (Delta.rows() != p || Delta.cols() != p || W.rows() != p || W.cols() != p ||
      mu.size() != p)
    throw DimensionError("population model pieces disagree on p");
  if (Gamma.cols() < 1) throw DimensionError("Gamma needs at least one column");
  if (!(h > 0)) throw InvalidSpec("h must be positive");

  // rotate Gamma so Gamma' W Gamma is diagonal with decreasing entries
  Eigen::MatrixXd gwg = symmetrized(Gamma.transpose() * W * Gamma);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gwg);
  Gamma = Gamma * es.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < Gamma.cols(); ++c) {
    Eigen::Index at = 0;
    Gamma.col(c).cwiseAbs().maxCoeff(&at);
    if (Gamma(at, c) < 0) Gamma.col(c) = -Gamma.col(c);
  }
  return {std::move(Gamma), symmetrized(Delta), std::move(mu), symmetrized(W), h};
}

// (Gamma' Delta^-1 Gamma)^-1 Gamma' Delta^-1 (x - mu)
inline Eigen::MatrixXd population_reduction_rows(const PopulationModel& pm,
                                                 const Eigen::MatrixXd& X) {
  if (X.cols() != pm.Gamma.rows()) throw DimensionError("predictor width mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(pm.Delta);
  if (llt.info() != Eigen::Success) throw SingularInput("Delta is not positive definite");
  Eigen::MatrixXd di_g = llt.solve(pm.Gamma);
  Eigen::MatrixXd g = symmetrized(pm.Gamma.transpose() * di_g);
  Eigen::MatrixXd centered = X.rowwise() - pm.mu.transpose();
  return g.ldlt().solve(di_g.transpose() * centered.transpose()).transpose();
}

inline Eigen::VectorXd population_reduction(const PopulationModel& pm,
                                            const Eigen::VectorXd& x) {
  return population_reduction_rows(pm, x.transpose()).row(0);
}

// same projection taken in the W inner product instead of Delta^-1;
// the gap between the two on pure noise is the weight's irreducible cost
inline Eigen::MatrixXd population_weighted_reduction_rows(const PopulationModel& pm,
                                                          const Eigen::MatrixXd& X) {
  if (X.cols() != pm.Gamma.rows()) throw DimensionError("predictor width mismatch");
  Eigen::MatrixXd wg = pm.W.selfadjointView<Eigen::Lower>() * pm.Gamma;
  Eigen::MatrixXd g = symmetrized(pm.Gamma.transpose() * wg);
  Eigen::MatrixXd centered = X.rowwise() - pm.mu.transpose();
  return g.ldlt().solve(wg.transpose() * centered.transpose()).transpose();
}

struct PopulationDiagnostics {
  double kappa = 0.0;          // sqrt(p / (h n))
  double psi = 0.0;            // ||rho||_F / (h sqrt(n))
  double rho_bar = 0.0;        // tr(rho) / p
  double rho_spectral = 0.0;   // largest eigenvalue of rho
  Eigen::MatrixXd var_nu;      // d x d limit variance of the reduction error
};

// rho = W^1/2 Delta W^1/2; var_nu vanishes exactly when W = Delta^-1 or when
// the span of W^1/2 Gamma reduces rho
inline PopulationDiagnostics diagnostics(const PopulationModel& pm, Eigen::Index n) {
  if (n < 1) throw InvalidSpec("n must be positive");
  const auto p = pm.Gamma.rows();
  PopulationDiagnostics out;
  Eigen::MatrixXd w_half = sym_sqrt(pm.W);
  Eigen::MatrixXd rho = symmetrized(w_half * pm.Delta * w_half);
  out.kappa = std::sqrt(static_cast<double>(p) / (pm.h * static_cast<double>(n)));
  out.psi = rho.norm() / (pm.h * std::sqrt(static_cast<double>(n)));
  out.rho_bar = rho.trace() / static_cast<double>(p);
  out.rho_spectral = spectral_norm_sym(rho);

  Eigen::MatrixXd gwg = symmetrized(pm.Gamma.transpose() * pm.W * pm.Gamma);
  Eigen::MatrixXd gamma_dir = w_half * pm.Gamma * sym_inv_sqrt(gwg);
  Eigen::MatrixXd a = symmetrized(gamma_dir.transpose() * rho * gamma_dir);
  Eigen::LLT<Eigen::MatrixXd> llt(rho);
  if (llt.info() != Eigen::Success) throw SingularInput("rho is not positive definite");
  Eigen::MatrixXd b = spd_inverse(
      symmetrized(gamma_dir.transpose() * llt.solve(gamma_dir)), "projected inverse");
  Eigen::MatrixXd g_h_inv_half = sym_inv_sqrt(gwg / pm.h);
  out.var_nu = symmetrized(g_h_inv_half * ((a - b) / pm.h) * g_h_inv_half);
  return out;
}

}  // namespace wir
