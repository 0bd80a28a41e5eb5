#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "wir/errors.hpp"

namespace wir {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrized(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

inline void require_square(const MatrixXd& a, const char* name) {
  if (a.rows() != a.cols())
    throw DimensionError(std::string(name) + " must be square");
}

// symmetric square root via eigendecomposition; input must be PSD
inline MatrixXd sym_sqrt(const MatrixXd& a) {
  require_square(a, "matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(a));
  VectorXd ev = es.eigenvalues();
  double top = ev.cwiseAbs().maxCoeff();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10 * (top > 0 ? top : 1.0))
      throw SingularInput("matrix square root of an indefinite matrix");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

inline MatrixXd sym_inv_sqrt(const MatrixXd& a, double rel_tol = 1e-12) {
  require_square(a, "matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(a));
  const VectorXd& ev = es.eigenvalues();
  double top = ev.maxCoeff();
  if (top <= 0 || ev.minCoeff() <= rel_tol * top)
    throw SingularInput("inverse square root of a singular matrix");
  VectorXd inv = ev.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Moore-Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues below
// rel_tol times the largest are treated as zero
inline MatrixXd sym_pinv(const MatrixXd& a, double rel_tol = 1e-10, int* rank_out = nullptr) {
  require_square(a, "matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(a));
  const VectorXd& ev = es.eigenvalues();
  double top = ev.cwiseAbs().maxCoeff();
  VectorXd inv = VectorXd::Zero(ev.size());
  int rank = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) > rel_tol * top && top > 0) {
      inv(i) = 1.0 / ev(i);
      ++rank;
    }
  }
  if (rank_out) *rank_out = rank;
  return symmetrized(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
}

inline MatrixXd spd_inverse(const MatrixXd& a, const char* what = "matrix") {
  require_square(a, what);
  Eigen::LLT<MatrixXd> llt(symmetrized(a));
  if (llt.info() != Eigen::Success)
    throw SingularInput(std::string(what) + " is not positive definite");
  return symmetrized(llt.solve(MatrixXd::Identity(a.rows(), a.cols())));
}

inline double logdet_spd(const MatrixXd& a, const char* what = "matrix") {
  require_square(a, what);
  Eigen::LLT<MatrixXd> llt(symmetrized(a));
  if (llt.info() != Eigen::Success)
    throw SingularInput(std::string(what) + " is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline double spectral_norm_sym(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool all_finite(const MatrixXd& a) { return a.allFinite(); }

}  // namespace wir
