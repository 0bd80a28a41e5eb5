#pragma once

#include <Eigen/Dense>

#include <optional>

#include "wir/basis.hpp"
#include "wir/reduction.hpp"
#include "wir/spice.hpp"
#include "wir/weights.hpp"

namespace wir {

// center X, estimate the residual covariance against the basis, build the
// requested weight, and fit the reduction; the one entry point shared by the
// CLI, the selection procedures, and the simulation harness
inline ReductionFit fit_pipeline(const Eigen::MatrixXd& X, const BasisMatrix& basis,
                                 WeightKind kind, std::optional<double> lambda, int d,
                                 SpiceSolution* info = nullptr) {
  Eigen::MatrixXd Z = X.rowwise() - X.colwise().mean();
  ResidualCovariance rc = residual_covariance(Z, basis);
  WeightMatrix w = make_weight(rc, kind, lambda, info);
  return fit_reduction(X, basis, w, d);
}

}  // namespace wir
