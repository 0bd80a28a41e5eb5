#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "wir/errors.hpp"
#include "wir/reduction.hpp"

namespace wir {

// Everything forward prediction needs, detached from the full fit so a
// serialized model can be loaded straight into one.
struct Predictor {
  Eigen::VectorXd mu_hat;            // p
  Eigen::MatrixXd coef;              // d x p reduction map
  Eigen::MatrixXd train_reductions;  // n x d reductions of the training rows
  Eigen::MatrixXd train_xi;          // n x d fitted latent coordinates b_hat f_i
  Eigen::VectorXd train_y;           // n
  Eigen::MatrixXd precision;         // d x d exponent matrix Gamma' W Gamma

  Eigen::Index n() const { return train_y.size(); }
  Eigen::VectorXd reduce(const Eigen::VectorXd& x) const {
    if (x.size() != mu_hat.size()) throw DimensionError("predictor length mismatch");
    return coef * (x - mu_hat);
  }
};

inline Predictor make_predictor(const ReductionFit& fit, const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw LengthMismatch("X and y row counts differ");
  if (y.size() == 0) throw EmptyTrainingSet("no training observations");
  Predictor pr;
  pr.mu_hat = fit.mu_hat;
  pr.coef = fit.coef;
  pr.train_reductions = fit.apply_rows(X);
  pr.train_xi = fit.basis.F * fit.b_hat.transpose();
  pr.train_y = y;
  pr.precision = fit.eigvals.head(fit.d).asDiagonal();
  return pr;
}

// Normalized kernel weights of the training points at a reduced query:
// w_i proportional to exp{-(1/2)(q - xi_i)' precision (q - xi_i)},
// evaluated through a log-sum-exp so extreme exponents stay finite.
inline Eigen::VectorXd prediction_weights(const Predictor& pr, const Eigen::VectorXd& reduced) {
  if (pr.n() == 0) throw EmptyTrainingSet("no training observations");
  if (reduced.size() != pr.train_xi.cols()) throw DimensionError("reduction length mismatch");
  Eigen::MatrixXd diff = (-pr.train_xi).rowwise() + reduced.transpose();
  Eigen::VectorXd log_w =
      -0.5 * (diff * pr.precision).cwiseProduct(diff).rowwise().sum();
  Eigen::VectorXd w = (log_w.array() - log_w.maxCoeff()).exp();
  return w / w.sum();
}

inline double predict_at_reduction(const Predictor& pr, const Eigen::VectorXd& reduced) {
  return prediction_weights(pr, reduced).dot(pr.train_y);
}

inline double forward_predict(const Predictor& pr, const Eigen::VectorXd& x) {
  return predict_at_reduction(pr, pr.reduce(x));
}

inline Eigen::VectorXd forward_predict_rows(const Predictor& pr, const Eigen::MatrixXd& X) {
  if (X.cols() != pr.mu_hat.size()) throw DimensionError("predictor width mismatch");
  Eigen::MatrixXd reduced = (X.rowwise() - pr.mu_hat.transpose()) * pr.coef.transpose();
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    out(i) = predict_at_reduction(pr, reduced.row(i));
  return out;
}

// fitted values at the training rows; this is the single code path behind the
// dimension-selection statistic
inline Eigen::VectorXd in_sample_predictions(const Predictor& pr) {
  Eigen::VectorXd out(pr.n());
  for (Eigen::Index i = 0; i < pr.n(); ++i)
    out(i) = predict_at_reduction(pr, pr.train_reductions.row(i));
  return out;
}

// root mean squared prediction error
inline double rms(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y) {
  if (predictions.size() != y.size()) throw LengthMismatch("prediction and response lengths differ");
  if (y.size() == 0) throw EmptyTrainingSet("nothing to score");
  return std::sqrt((y - predictions).squaredNorm() / static_cast<double>(y.size()));
}

}  // namespace wir
