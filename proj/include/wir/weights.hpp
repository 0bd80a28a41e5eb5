#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "wir/basis.hpp"
#include "wir/errors.hpp"
#include "wir/linalg.hpp"

namespace wir {

// Covariance of the predictor residuals after regressing out the basis.
struct ResidualCovariance {
  Eigen::MatrixXd delta_hat;  // p x p symmetric PSD
  Eigen::Index n = 0;
  Eigen::Index r = 0;
  Eigen::Index dof() const { return n - r - 1; }
};

// Z must be column-centered; the projection residual is formed through a thin
// QR of F rather than an explicit hat matrix
inline ResidualCovariance residual_covariance(const Eigen::MatrixXd& Z,
                                              const BasisMatrix& basis) {
  if (Z.rows() != basis.n()) throw DimensionError("Z and basis row counts differ");
  const Eigen::Index n = Z.rows(), r = basis.r();
  if (n - r - 1 < 1) throw InsufficientData("need n > r + 1 for the residual covariance");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis.F);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
  Eigen::MatrixXd resid = Z - q * (q.transpose() * Z);
  ResidualCovariance rc;
  rc.n = n;
  rc.r = r;
  rc.delta_hat = symmetrized(resid.transpose() * resid / static_cast<double>(n - r - 1));
  return rc;
}

// no-basis variant: plain covariance of the centered rows
inline ResidualCovariance residual_covariance(const Eigen::MatrixXd& Z) {
  const Eigen::Index n = Z.rows();
  if (n < 2) throw InsufficientData("need at least two rows");
  ResidualCovariance rc;
  rc.n = n;
  rc.r = 0;
  rc.delta_hat = symmetrized(Z.transpose() * Z / static_cast<double>(n - 1));
  return rc;
}

enum class WeightKind { scaled_identity, diagonal, pooled_inverse, spice, quadratic_penalty };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::scaled_identity: return "identity";
    case WeightKind::diagonal: return "diag";
    case WeightKind::pooled_inverse: return "pooled";
    case WeightKind::spice: return "spice";
    case WeightKind::quadratic_penalty: return "quad";
  }
  return "?";
}

inline WeightKind weight_kind_from_string(const std::string& s) {
  if (s == "identity") return WeightKind::scaled_identity;
  if (s == "diag") return WeightKind::diagonal;
  if (s == "pooled") return WeightKind::pooled_inverse;
  if (s == "spice") return WeightKind::spice;
  if (s == "quad") return WeightKind::quadratic_penalty;
  throw InvalidSpec("unknown weight kind '" + s + "'");
}

struct WeightMatrix {
  Eigen::MatrixXd W;  // p x p symmetric PSD
  WeightKind kind = WeightKind::scaled_identity;
  std::optional<double> lambda;
  int rank = 0;
  bool converged = true;  // false only when an iterative solver hit its sweep cap
};

inline WeightMatrix weight_scaled_identity(const ResidualCovariance& rc) {
  const auto p = rc.delta_hat.rows();
  double tr = rc.delta_hat.trace();
  if (!(tr > 0)) throw ZeroTrace("residual covariance has nonpositive trace");
  WeightMatrix w;
  w.kind = WeightKind::scaled_identity;
  w.W = (static_cast<double>(p) / tr) * Eigen::MatrixXd::Identity(p, p);
  w.rank = static_cast<int>(p);
  return w;
}

inline WeightMatrix weight_diagonal(const ResidualCovariance& rc) {
  const auto p = rc.delta_hat.rows();
  Eigen::VectorXd d = rc.delta_hat.diagonal();
  for (Eigen::Index j = 0; j < p; ++j)
    if (!(d(j) > 0)) throw ZeroVariance(static_cast<int>(j));
  WeightMatrix w;
  w.kind = WeightKind::diagonal;
  w.W = d.cwiseInverse().asDiagonal();
  w.rank = static_cast<int>(p);
  return w;
}

// full inverse when the degrees of freedom allow a nonsingular estimate,
// Moore-Penrose pseudoinverse otherwise
inline WeightMatrix weight_pooled_inverse(const ResidualCovariance& rc) {
  const auto p = rc.delta_hat.rows();
  WeightMatrix w;
  w.kind = WeightKind::pooled_inverse;
  if (rc.n > p + rc.r + 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rc.delta_hat, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (hi > 0 && lo > 1e-10 * hi) {
      Eigen::LLT<Eigen::MatrixXd> llt(rc.delta_hat);
      if (llt.info() == Eigen::Success) {
        w.W = symmetrized(llt.solve(Eigen::MatrixXd::Identity(p, p)));
        w.rank = static_cast<int>(p);
        return w;
      }
    }
  }
  int rank = 0;
  w.W = sym_pinv(rc.delta_hat, 1e-10, &rank);
  w.rank = rank;
  return w;
}

}  // namespace wir
