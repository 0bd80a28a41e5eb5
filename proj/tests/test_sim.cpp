#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wir/rng.hpp"
#include "wir/sim.hpp"

using Catch::Approx;

namespace {

wir::SimModel basic_model(int p, wir::DeltaSpec delta) {
  wir::SimModel sm;
  sm.p = p;
  sm.gamma = wir::GammaSpec::gaussian(1);
  sm.delta = delta;
  return sm;
}

}  // namespace

TEST_CASE("regularly spaced variances hit both endpoints") {
  auto sm = basic_model(50, wir::DeltaSpec::regular(1.0, 101.0));
  auto pm = wir::gen_model(sm, 0);
  CHECK(pm.Delta(0, 0) == Approx(1.0));
  CHECK(pm.Delta(49, 49) == Approx(101.0));
  CHECK(pm.Delta(1, 1) == Approx(1.0 + 100.0 / 49.0));
  CHECK(pm.Delta(0, 1) == 0.0);
}

TEST_CASE("autoregressive noise has the power-decay correlation") {
  auto sm = basic_model(4, wir::DeltaSpec::ar(0.5, 1.0, 1.0));  // unit variances
  auto pm = wir::gen_model(sm, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(pm.Delta(i, j) == Approx(std::pow(0.5, std::abs(i - j))));
}

TEST_CASE("a single-coordinate signal is generated literally") {
  wir::SimModel sm;
  sm.p = 6;
  sm.gamma = wir::GammaSpec::first_coordinate_only(8.2);
  sm.delta = wir::DeltaSpec::regular(1.0, 101.0);
  auto pm = wir::gen_model(sm, 9);
  CHECK(pm.Gamma(0, 0) == Approx(8.2));
  CHECK(pm.Gamma.bottomRows(5).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model generation is a pure function of its seed") {
  auto sm = basic_model(10, wir::DeltaSpec::uniform(1.0, 101.0));
  auto a = wir::gen_model(sm, 42);
  auto b = wir::gen_model(sm, 42);
  auto c = wir::gen_model(sm, 43);
  CHECK((a.Gamma - b.Gamma).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.Delta - b.Delta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.Gamma - c.Gamma).cwiseAbs().maxCoeff() > 0.0);
  CHECK((a.Delta - c.Delta).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("every generated noise covariance is positive definite and norm-bounded") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto sm = basic_model(30, wir::DeltaSpec::ar(0.5, 1.0, 101.0));
    auto pm = wir::gen_model(sm, seed);
    Eigen::LLT<Eigen::MatrixXd> llt(pm.Delta);
    REQUIRE(llt.info() == Eigen::Success);
    CHECK(wir::spectral_norm_sym(pm.Delta) <= 2.0 * 101.0 / (1.0 - 0.5));

    auto du = basic_model(30, wir::DeltaSpec::uniform(1.0, 101.0));
    auto pu = wir::gen_model(du, seed);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(pu.Delta).info() == Eigen::Success);
    CHECK(pu.Delta.diagonal().minCoeff() >= 1.0);
    CHECK(pu.Delta.diagonal().maxCoeff() <= 101.0);
  }
}

TEST_CASE("variance specs reject degenerate ranges") {
  CHECK_THROWS_AS(wir::DeltaSpec::regular(0.0, 10.0), wir::InvalidSpec);
  CHECK_THROWS_AS(wir::DeltaSpec::uniform(5.0, 1.0), wir::InvalidSpec);
  CHECK_THROWS_AS(wir::DeltaSpec::ar(1.0, 1.0, 10.0), wir::InvalidSpec);
  CHECK_THROWS_AS(wir::DeltaSpec::ar(0.0, 1.0, 10.0), wir::InvalidSpec);
}

TEST_CASE("pure noise rows concentrate around an identity covariance") {
  auto sm = basic_model(3, wir::DeltaSpec::regular(1.0, 1.0));
  sm.gamma = wir::GammaSpec::fixed_matrix(Eigen::MatrixXd::Zero(3, 1));
  auto pm = wir::gen_model(sm, 11);
  auto s = wir::gen_sample(pm, wir::XiKind::identity, wir::YDist::std_normal, 2000, 13);
  Eigen::MatrixXd z = s.X.rowwise() - s.X.colwise().mean();
  Eigen::MatrixXd cov = z.transpose() * z / 1999.0;
  CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.15);
}

TEST_CASE("standardized exponential coordinates have mean zero and unit variance") {
  auto sm = basic_model(2, wir::DeltaSpec::regular(1.0, 1.0));
  auto pm = wir::gen_model(sm, 17);

  SECTION("uniform responses") {
    auto s = wir::gen_sample(pm, wir::XiKind::exp_standardized, wir::YDist::uniform_04,
                             10000, 19);
    CHECK(s.y.minCoeff() >= 0.0);
    CHECK(s.y.maxCoeff() <= 4.0);
    double mean = s.xi.mean();
    double var = (s.xi.array() - mean).square().sum() / (s.xi.size() - 1.0);
    CHECK(std::abs(mean) < 0.06);   // ~3 standard errors of the mean
    CHECK(std::abs(var - 1.0) < 0.25);
  }

  SECTION("normal responses") {
    auto s = wir::gen_sample(pm, wir::XiKind::exp_standardized, wir::YDist::std_normal,
                             10000, 23);
    double mean = s.xi.mean();
    double var = (s.xi.array() - mean).square().sum() / (s.xi.size() - 1.0);
    CHECK(std::abs(mean) < 0.07);
    CHECK(std::abs(var - 1.0) < 0.5);  // e^Y under a normal has heavy fourth moments
  }
}

TEST_CASE("sampling requires a one-column signal") {
  auto sm = basic_model(5, wir::DeltaSpec::regular(1.0, 2.0));
  sm.gamma = wir::GammaSpec::gaussian(2);
  auto pm = wir::gen_model(sm, 29);
  CHECK_THROWS_AS(wir::gen_sample(pm, wir::XiKind::identity, wir::YDist::std_normal, 10, 1),
                  wir::InvalidSpec);
}

TEST_CASE("correlation agrees with the definitional formula and rejects constants") {
  auto eng = wir::make_engine(31, {wir::stream::noise});
  Eigen::VectorXd a = wir::gaussian_vector(200, eng);
  Eigen::VectorXd b = 0.6 * a + 0.8 * wir::gaussian_vector(200, eng);

  double got = wir::correlation(a, b);
  double am = a.mean(), bm = b.mean();
  double cov = ((a.array() - am) * (b.array() - bm)).sum() / 199.0;
  double sda = std::sqrt((a.array() - am).square().sum() / 199.0);
  double sdb = std::sqrt((b.array() - bm).square().sum() / 199.0);
  CHECK(std::abs(got - cov / (sda * sdb)) < 1e-12);

  CHECK_THROWS_AS(wir::correlation(Eigen::VectorXd::Ones(5), a.head(5)),
                  wir::NumericalError);
  CHECK_THROWS_AS(wir::correlation(a.head(4), a.head(5)), wir::LengthMismatch);
}

TEST_CASE("a noiseless design is recovered essentially exactly") {
  auto eng = wir::make_engine(37, {wir::stream::gamma});
  int p = 5;
  Eigen::MatrixXd gamma = wir::gaussian_matrix(p, 1, eng);
  auto pm = wir::make_population_model(gamma, 1e-20 * Eigen::MatrixXd::Identity(p, p),
                                       Eigen::VectorXd::Zero(p),
                                       Eigen::MatrixXd::Identity(p, p), p);
  wir::ReplicationConfig cfg;
  cfg.model = basic_model(p, wir::DeltaSpec::regular(1.0, 1.0));
  cfg.n = 2000;
  cfg.basis = wir::BasisSpec::polynomial(1);
  cfg.d = 1;

  auto rec = wir::run_replication(cfg, pm, 41);
  REQUIRE(rec.ok);
  CHECK(rec.abs_correlation == Approx(1.0).margin(1e-8));
  // the only estimation error left is the O(n^{-1/2}) scale wobble of the
  // sample basis covariance
  CHECK(rec.sd_diff < 0.1);
}

TEST_CASE("a one-cell one-replication study reproduces run_replication") {
  wir::StudyConfig sc;
  sc.seed = 5;
  sc.replications = 1;
  wir::StudyCell cell;
  cell.label = "only";
  cell.config.model = basic_model(8, wir::DeltaSpec::regular(1.0, 9.0));
  cell.config.n = 40;
  cell.config.basis = wir::BasisSpec::polynomial(3);
  sc.cells.push_back(cell);

  auto study = wir::run_study(sc);
  REQUIRE(study.cells.size() == 1);
  REQUIRE(study.cells[0].ok == 1);

  auto pm = wir::gen_model(cell.config.model,
                           wir::derive_seed(5, {wir::stream::model, 0, 0}));
  auto rec = wir::run_replication(cell.config, pm,
                                  wir::derive_seed(5, {wir::stream::replication, 0, 0}));
  CHECK(study.cells[0].records[0].abs_correlation == rec.abs_correlation);
  CHECK(study.cells[0].records[0].sd_diff == rec.sd_diff);
  CHECK(study.cells[0].mean_abs_correlation == rec.abs_correlation);
}

TEST_CASE("studies are bit-identical across thread counts") {
  wir::StudyConfig sc;
  sc.seed = 77;
  sc.replications = 3;
  for (int n : {30, 50}) {
    wir::StudyCell cell;
    cell.label = "n=" + std::to_string(n);
    cell.config.model = basic_model(6, wir::DeltaSpec::uniform(1.0, 7.0));
    cell.config.n = n;
    cell.config.basis = wir::BasisSpec::polynomial(2);
    sc.cells.push_back(cell);
  }

  sc.threads = 1;
  auto serial = wir::run_study(sc);
  sc.threads = 4;
  auto parallel = wir::run_study(sc);

  std::ostringstream a, b;
  wir::write_study_tsv(serial, a);
  wir::write_study_tsv(parallel, b);
  CHECK(a.str() == b.str());

  std::ostringstream da, db;
  wir::write_details_tsv(serial, da);
  wir::write_details_tsv(parallel, db);
  CHECK(da.str() == db.str());
}

TEST_CASE("study failures are recorded per replication, not thrown") {
  wir::StudyConfig sc;
  sc.seed = 3;
  sc.replications = 2;
  wir::StudyCell cell;
  cell.label = "undersized";
  cell.config.model = basic_model(4, wir::DeltaSpec::regular(1.0, 2.0));
  cell.config.n = 4;  // too small for a cubic basis
  sc.cells.push_back(cell);

  auto study = wir::run_study(sc);
  CHECK(study.cells[0].ok == 0);
  CHECK(study.cells[0].failed == 2);
  CHECK(std::isnan(study.cells[0].mean_abs_correlation));
  CHECK_FALSE(study.cells[0].records[0].error.empty());
}

TEST_CASE("study tables have one row per cell and one detail row per replication") {
  wir::StudyConfig sc;
  sc.seed = 15;
  sc.replications = 2;
  wir::StudyCell cell;
  cell.label = "p=6,n=35";
  cell.config.model = basic_model(6, wir::DeltaSpec::regular(1.0, 3.0));
  cell.config.n = 35;
  cell.config.basis = wir::BasisSpec::polynomial(2);
  sc.cells.push_back(cell);

  auto study = wir::run_study(sc);
  std::ostringstream table, details;
  wir::write_study_tsv(study, table);
  wir::write_details_tsv(study, details);

  auto count_lines = [](const std::string& s) {
    return std::count(s.begin(), s.end(), '\n');
  };
  CHECK(count_lines(table.str()) == 2);
  CHECK(count_lines(details.str()) == 3);
  CHECK(table.str().find("p=6,n=35\t2\t0\t") != std::string::npos);
}

TEST_CASE("population weights match their estimator targets") {
  Eigen::MatrixXd delta = Eigen::Vector3d(2.0, 5.0, 10.0).asDiagonal();
  CHECK((wir::population_weight(delta, wir::WeightKind::scaled_identity) -
         Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  Eigen::MatrixXd diag = wir::population_weight(delta, wir::WeightKind::diagonal);
  CHECK(diag(0, 0) == Approx(0.5));
  CHECK(diag(2, 2) == Approx(0.1));
  Eigen::MatrixXd pooled = wir::population_weight(delta, wir::WeightKind::pooled_inverse);
  CHECK((pooled * delta - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}
