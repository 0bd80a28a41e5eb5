#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>

#include "wir/fitting.hpp"
#include "wir/predict.hpp"
#include "wir/rng.hpp"

using Catch::Approx;

namespace {

wir::Predictor toy_predictor(const Eigen::VectorXd& train_xi, const Eigen::VectorXd& train_y) {
  wir::Predictor pr;
  pr.mu_hat = Eigen::VectorXd::Zero(2);
  pr.coef = Eigen::MatrixXd::Zero(1, 2);
  pr.coef(0, 0) = 1.0;
  pr.train_reductions = train_xi;
  pr.train_xi = train_xi;
  pr.train_y = train_y;
  pr.precision = Eigen::MatrixXd::Identity(1, 1);
  return pr;
}

struct Fitted {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  wir::Predictor pr;
};

Fitted fitted_predictor(int n, int p, std::uint64_t seed) {
  auto eng = wir::make_engine(seed, {wir::stream::train});
  Fitted f;
  f.y = wir::gaussian_vector(n, eng);
  Eigen::MatrixXd gamma = wir::gaussian_matrix(p, 1, eng);
  f.X = f.y * gamma.transpose() + 0.4 * wir::gaussian_matrix(n, p, eng);
  auto basis = wir::build_basis(f.y, wir::BasisSpec::polynomial(3));
  auto fit = wir::fit_pipeline(f.X, basis, wir::WeightKind::pooled_inverse, {}, 1);
  f.pr = wir::make_predictor(fit, f.X, f.y);
  return f;
}

}  // namespace

TEST_CASE("a single training point is always returned verbatim") {
  Eigen::VectorXd xi(1), y(1);
  xi << 2.5;
  y << 42.0;
  auto pr = toy_predictor(xi, y);
  Eigen::VectorXd x(2);
  x << -100, 7;
  CHECK(wir::forward_predict(pr, x) == 42.0);
  x << 3, 0;
  CHECK(wir::forward_predict(pr, x) == 42.0);
}

TEST_CASE("constant responses predict the constant") {
  Eigen::VectorXd xi(4), y = Eigen::VectorXd::Constant(4, 3.25);
  xi << -2, -1, 1, 2;
  auto pr = toy_predictor(xi, y);
  for (double q : {-5.0, 0.0, 0.3, 11.0}) {
    Eigen::VectorXd x(2);
    x << q, 0;
    CHECK(wir::forward_predict(pr, x) == Approx(3.25).margin(1e-12));
  }
}

TEST_CASE("a query equidistant from two symmetric points averages their responses") {
  Eigen::VectorXd xi(2), y(2);
  xi << -1.5, 1.5;
  y << 10.0, 4.0;
  auto pr = toy_predictor(xi, y);
  Eigen::VectorXd at_zero = Eigen::VectorXd::Zero(2);
  CHECK(wir::forward_predict(pr, at_zero) == Approx(7.0).margin(1e-12));
}

TEST_CASE("empty training sets are rejected") {
  wir::Predictor pr;
  pr.mu_hat = Eigen::VectorXd::Zero(2);
  pr.coef = Eigen::MatrixXd::Zero(1, 2);
  pr.train_reductions.resize(0, 1);
  pr.train_xi.resize(0, 1);
  pr.train_y.resize(0);
  pr.precision = Eigen::MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(wir::forward_predict(pr, Eigen::VectorXd::Zero(2)),
                  wir::EmptyTrainingSet);
}

TEST_CASE("weights are a probability vector and predictions are convex combinations") {
  auto f = fitted_predictor(60, 4, 301);
  double y_min = f.y.minCoeff(), y_max = f.y.maxCoeff();

  auto eng = wir::make_engine(303, {wir::stream::test});
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x = 3.0 * wir::gaussian_vector(4, eng);
    Eigen::VectorXd w = wir::prediction_weights(f.pr, f.pr.reduce(x));
    CHECK(w.minCoeff() >= 0.0);
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
    double yhat = wir::forward_predict(f.pr, x);
    CHECK(yhat >= y_min);
    CHECK(yhat <= y_max);
  }
}

TEST_CASE("extreme queries stay finite and collapse onto the nearest training point") {
  auto f = fitted_predictor(50, 4, 307);
  Eigen::VectorXd far(1);
  far << 1e8;
  double yhat = wir::predict_at_reduction(f.pr, far);
  CHECK(std::isfinite(yhat));

  Eigen::Index nearest = 0;
  (f.pr.train_xi.col(0).array() - far(0)).abs().minCoeff(&nearest);
  CHECK(yhat == Approx(f.pr.train_y(nearest)));
}

TEST_CASE("batch, single, and in-sample prediction paths agree") {
  auto f = fitted_predictor(40, 3, 311);
  Eigen::VectorXd batch = wir::forward_predict_rows(f.pr, f.X);
  Eigen::VectorXd in_sample = wir::in_sample_predictions(f.pr);
  for (Eigen::Index i = 0; i < f.X.rows(); ++i) {
    CHECK(batch(i) == Approx(wir::forward_predict(f.pr, f.X.row(i))).margin(1e-12));
    CHECK(batch(i) == Approx(in_sample(i)).margin(1e-12));
  }
}

TEST_CASE("prediction error follows its closed forms") {
  Eigen::VectorXd y(2), pred(2);
  y << 0, 2;
  pred << 1, 1;
  CHECK(wir::rms(pred, y) == Approx(1.0));
  CHECK(wir::rms(y, y) == 0.0);

  auto eng = wir::make_engine(313, {wir::stream::response});
  Eigen::VectorXd ys = wir::gaussian_vector(25, eng);
  Eigen::VectorXd at_mean = Eigen::VectorXd::Constant(25, ys.mean());
  double sd = std::sqrt((ys.array() - ys.mean()).square().sum() / 25.0);
  CHECK(wir::rms(at_mean, ys) == Approx(sd));

  CHECK_THROWS_AS(wir::rms(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4)),
                  wir::LengthMismatch);
}

TEST_CASE("reduction queries must match the fitted dimensions") {
  auto f = fitted_predictor(30, 3, 317);
  CHECK_THROWS_AS(f.pr.reduce(Eigen::VectorXd::Zero(5)), wir::DimensionError);
  CHECK_THROWS_AS(wir::forward_predict_rows(f.pr, Eigen::MatrixXd::Zero(4, 7)),
                  wir::DimensionError);
  CHECK_THROWS_AS(wir::predict_at_reduction(f.pr, Eigen::VectorXd::Zero(2)),
                  wir::DimensionError);
}
