#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wir/basis.hpp"
#include "wir/errors.hpp"
#include "wir/fitting.hpp"
#include "wir/format.hpp"
#include "wir/parallel.hpp"
#include "wir/reduction.hpp"
#include "wir/rng.hpp"
#include "wir/weights.hpp"

namespace wir {

enum class GammaKind { gaussian_entries, first_coordinate, fixed };

struct GammaSpec {
  GammaKind kind = GammaKind::gaussian_entries;
  int d = 1;
  double value = 1.0;      // first_coordinate entry
  Eigen::MatrixXd matrix;  // fixed

  static GammaSpec gaussian(int d = 1) {
    if (d < 1) throw InvalidSpec("signal dimension must be at least 1");
    GammaSpec g;
    g.kind = GammaKind::gaussian_entries;
    g.d = d;
    return g;
  }
  static GammaSpec first_coordinate_only(double value) {
    GammaSpec g;
    g.kind = GammaKind::first_coordinate;
    g.value = value;
    return g;
  }
  static GammaSpec fixed_matrix(Eigen::MatrixXd m) {
    if (m.rows() < 1 || m.cols() < 1) throw InvalidSpec("fixed Gamma must be nonempty");
    GammaSpec g;
    g.kind = GammaKind::fixed;
    g.d = static_cast<int>(m.cols());
    g.matrix = std::move(m);
    return g;
  }
};

enum class DeltaKind { diag_regular, diag_uniform, ar_correlation };

// diag variants fill the variances with regularly spaced or uniform draws on
// [lo, hi]; the AR variant wraps a theta^|i-j| correlation around uniform
// variances, keeping the spectral norm under 2 hi / (1 - theta)
struct DeltaSpec {
  DeltaKind kind = DeltaKind::diag_regular;
  double lo = 1.0;
  double hi = 101.0;
  double theta = 0.5;  // AR only

  static DeltaSpec regular(double lo, double hi) { return validated({DeltaKind::diag_regular, lo, hi, 0.0}); }
  static DeltaSpec uniform(double lo, double hi) { return validated({DeltaKind::diag_uniform, lo, hi, 0.0}); }
  static DeltaSpec ar(double theta, double lo, double hi) {
    if (!(theta > 0.0 && theta < 1.0)) throw InvalidSpec("AR correlation needs theta in (0, 1)");
    return validated({DeltaKind::ar_correlation, lo, hi, theta});
  }

 private:
  static DeltaSpec validated(DeltaSpec s) {
    if (!(s.lo > 0.0) || !(s.hi >= s.lo)) throw InvalidSpec("variance range needs 0 < lo <= hi");
    return s;
  }
};

enum class XiKind { identity, exp_standardized };
enum class YDist { std_normal, uniform_04 };

struct SimModel {
  int p = 50;
  GammaSpec gamma;
  DeltaSpec delta;
  XiKind xi = XiKind::identity;
  YDist y_dist = YDist::std_normal;
};

namespace detail {

inline Eigen::VectorXd delta_diagonal(const DeltaSpec& spec, int p, std::uint64_t seed) {
  Eigen::VectorXd v(p);
  if (spec.kind == DeltaKind::diag_regular) {
    for (int j = 0; j < p; ++j)
      v(j) = p == 1 ? spec.lo : spec.lo + (spec.hi - spec.lo) * j / static_cast<double>(p - 1);
  } else {
    auto eng = make_engine(seed, {stream::delta});
    std::uniform_real_distribution<double> u(spec.lo, spec.hi);
    for (int j = 0; j < p; ++j) v(j) = u(eng);
  }
  return v;
}

}  // namespace detail

// realize Gamma and Delta; a pure function of (model, seed)
inline PopulationModel gen_model(const SimModel& sm, std::uint64_t seed) {
  if (sm.p < 1) throw InvalidSpec("p must be at least 1");
  const int p = sm.p;

  Eigen::MatrixXd gamma;
  switch (sm.gamma.kind) {
    case GammaKind::gaussian_entries: {
      auto eng = make_engine(seed, {stream::gamma});
      gamma = gaussian_matrix(p, sm.gamma.d, eng);
      break;
    }
    case GammaKind::first_coordinate:
      gamma = Eigen::MatrixXd::Zero(p, 1);
      gamma(0, 0) = sm.gamma.value;
      break;
    case GammaKind::fixed:
      if (sm.gamma.matrix.rows() != p) throw InvalidSpec("fixed Gamma row count differs from p");
      gamma = sm.gamma.matrix;
      break;
  }

  Eigen::VectorXd diag = detail::delta_diagonal(sm.delta, p, seed);
  Eigen::MatrixXd delta;
  if (sm.delta.kind == DeltaKind::ar_correlation) {
    Eigen::MatrixXd theta(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) theta(i, j) = std::pow(sm.delta.theta, std::abs(i - j));
    Eigen::VectorXd sd = diag.cwiseSqrt();
    delta = symmetrized(sd.asDiagonal() * theta * sd.asDiagonal());
  } else {
    delta = diag.asDiagonal();
  }

  return make_population_model(std::move(gamma), std::move(delta), Eigen::VectorXd::Zero(p),
                               Eigen::MatrixXd::Identity(p, p), static_cast<double>(p));
}

// population counterpart of each estimator's weight target
inline Eigen::MatrixXd population_weight(const Eigen::MatrixXd& delta, WeightKind kind) {
  require_square(delta, "Delta");
  const Eigen::Index p = delta.rows();
  switch (kind) {
    case WeightKind::scaled_identity:
      return Eigen::MatrixXd::Identity(p, p);
    case WeightKind::diagonal: {
      Eigen::VectorXd d = delta.diagonal();
      for (Eigen::Index j = 0; j < p; ++j)
        if (!(d(j) > 0)) throw ZeroVariance(static_cast<int>(j));
      return Eigen::MatrixXd(d.cwiseInverse().asDiagonal());
    }
    case WeightKind::pooled_inverse:
    case WeightKind::spice:
    case WeightKind::quadratic_penalty:
      return spd_inverse(delta, "Delta");
  }
  throw InvalidSpec("unknown weight kind");
}

// rebuild the model with a different population weight (re-rotates Gamma)
inline PopulationModel with_weight(const PopulationModel& pm, WeightKind kind) {
  return make_population_model(pm.Gamma, pm.Delta, pm.mu,
                               population_weight(pm.Delta, kind), pm.h);
}

struct SimSample {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Eigen::VectorXd xi;
};

// X_i = mu + Gamma xi_i + eps_i with eps ~ N(0, Delta); the exp variant
// standardizes with the closed-form moments of e^Y under the response law
inline SimSample gen_sample(const PopulationModel& pm, XiKind xi_kind, YDist y_dist,
                            Eigen::Index n, std::uint64_t seed) {
  if (pm.Gamma.cols() != 1)
    throw InvalidSpec("sampling uses a one-dimensional coordinate function");
  if (n < 1) throw InvalidSpec("sample size must be positive");
  const Eigen::Index p = pm.Gamma.rows();

  SimSample s;
  s.y.resize(n);
  {
    auto eng = make_engine(seed, {stream::response});
    if (y_dist == YDist::std_normal) {
      std::normal_distribution<double> z;
      for (Eigen::Index i = 0; i < n; ++i) s.y(i) = z(eng);
    } else {
      std::uniform_real_distribution<double> u(0.0, 4.0);
      for (Eigen::Index i = 0; i < n; ++i) s.y(i) = u(eng);
    }
  }

  if (xi_kind == XiKind::identity) {
    s.xi = s.y;
  } else {
    double m, var;
    if (y_dist == YDist::std_normal) {
      m = std::exp(0.5);
      var = std::exp(2.0) - std::exp(1.0);
    } else {
      m = (std::exp(4.0) - 1.0) / 4.0;
      var = (std::exp(8.0) - 1.0) / 8.0 - m * m;
    }
    s.xi = ((s.y.array().exp() - m) / std::sqrt(var)).matrix();
  }

  Eigen::LLT<Eigen::MatrixXd> llt(pm.Delta);
  if (llt.info() != Eigen::Success) throw SingularInput("Delta is not positive definite");
  auto eng = make_engine(seed, {stream::noise});
  Eigen::MatrixXd z = gaussian_matrix(n, p, eng);
  s.X = s.xi * pm.Gamma.transpose() + z * llt.matrixL().transpose();
  s.X.rowwise() += pm.mu.transpose();
  return s;
}

// two-ways-identical Pearson correlation via the centered inner product
inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw LengthMismatch("correlation needs equal-length vectors");
  if (a.size() < 2) throw LengthMismatch("correlation needs at least two points");
  Eigen::VectorXd ca = a.array() - a.mean();
  Eigen::VectorXd cb = b.array() - b.mean();
  double na = ca.norm(), nb = cb.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericalError("zero variance in correlation");
  return ca.dot(cb) / (na * nb);
}

inline double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw LengthMismatch("sample sd needs at least two points");
  return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

struct ReplicationConfig {
  SimModel model;
  Eigen::Index n = 100;
  WeightKind weight = WeightKind::scaled_identity;
  std::optional<double> lambda;  // spice / quad only
  BasisSpec basis = BasisSpec::polynomial(3);
  int d = 1;
  Eigen::Index n_new = 100;
};

struct ReplicationRecord {
  double abs_correlation = std::numeric_limits<double>::quiet_NaN();
  double sd_diff = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string error;
};

// one train-fit-evaluate pass against a fixed model realization: fit on n
// generated rows, compare estimated and population reductions on n_new
// fresh points, averaging the per-coordinate metrics
inline ReplicationRecord run_replication(const ReplicationConfig& cfg,
                                         const PopulationModel& pm, std::uint64_t rep_seed) {
  SimSample train = gen_sample(pm, cfg.model.xi, cfg.model.y_dist, cfg.n,
                               derive_seed(rep_seed, {stream::train}));
  BasisMatrix basis = build_basis(train.y, cfg.basis);
  ReductionFit fit = fit_pipeline(train.X, basis, cfg.weight, cfg.lambda, cfg.d);

  SimSample fresh = gen_sample(pm, cfg.model.xi, cfg.model.y_dist, cfg.n_new,
                               derive_seed(rep_seed, {stream::test}));
  Eigen::MatrixXd r_hat = fit.apply_rows(fresh.X);
  Eigen::MatrixXd r_pop = population_reduction_rows(pm, fresh.X);

  ReplicationRecord rec;
  double corr_sum = 0.0, sd_sum = 0.0;
  for (int c = 0; c < cfg.d; ++c) {
    double corr = correlation(r_hat.col(c), r_pop.col(c));
    if (corr < 0.0) r_hat.col(c) = -r_hat.col(c);  // estimator sign is arbitrary
    corr_sum += std::abs(corr);
    sd_sum += sample_sd(r_hat.col(c) - r_pop.col(c));
  }
  rec.abs_correlation = corr_sum / cfg.d;
  rec.sd_diff = sd_sum / cfg.d;
  rec.ok = true;
  return rec;
}

struct StudyCell {
  std::string label;
  ReplicationConfig config;
};

struct StudyConfig {
  std::vector<StudyCell> cells;
  int replications = 100;
  // fresh (Gamma, Delta) per replication, or one realization per distinct p
  // shared across cells and replications
  bool regenerate_model = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct CellSummary {
  std::string label;
  int ok = 0;
  int failed = 0;
  double mean_abs_correlation = std::numeric_limits<double>::quiet_NaN();
  double se_abs_correlation = std::numeric_limits<double>::quiet_NaN();
  double mean_sd_diff = std::numeric_limits<double>::quiet_NaN();
  double se_sd_diff = std::numeric_limits<double>::quiet_NaN();
  std::vector<ReplicationRecord> records;  // one per replication, in order
};

struct StudyResult {
  std::vector<CellSummary> cells;
};

inline StudyResult run_study(const StudyConfig& cfg) {
  if (cfg.cells.empty()) throw InvalidSpec("study needs at least one cell");
  if (cfg.replications < 1) throw InvalidSpec("study needs at least one replication");
  const int reps = cfg.replications;
  const int cells = static_cast<int>(cfg.cells.size());

  StudyResult res;
  res.cells.resize(cells);
  for (int c = 0; c < cells; ++c) {
    res.cells[c].label = cfg.cells[c].label;
    res.cells[c].records.resize(reps);
  }

  // every (cell, replication) task derives its own streams, so the records
  // are identical whatever the thread count
  parallel_for(cells * reps, cfg.threads, [&](int t) {
    const int c = t / reps, rep = t % reps;
    const ReplicationConfig& rc = cfg.cells[c].config;
    ReplicationRecord& rec = res.cells[c].records[rep];
    try {
      std::uint64_t model_seed =
          cfg.regenerate_model
              ? derive_seed(cfg.seed, {stream::model, static_cast<std::uint64_t>(c),
                                       static_cast<std::uint64_t>(rep)})
              : derive_seed(cfg.seed, {stream::model, static_cast<std::uint64_t>(rc.model.p)});
      PopulationModel pm = gen_model(rc.model, model_seed);
      std::uint64_t rep_seed = derive_seed(cfg.seed, {stream::replication,
                                                      static_cast<std::uint64_t>(c),
                                                      static_cast<std::uint64_t>(rep)});
      rec = run_replication(rc, pm, rep_seed);
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });

  for (CellSummary& cell : res.cells) {
    Eigen::VectorXd corr(reps), sd(reps);
    for (const ReplicationRecord& rec : cell.records) {
      if (!rec.ok) {
        ++cell.failed;
        continue;
      }
      corr(cell.ok) = rec.abs_correlation;
      sd(cell.ok) = rec.sd_diff;
      ++cell.ok;
    }
    if (cell.ok >= 1) {
      auto head = [&](const Eigen::VectorXd& v) { return v.head(cell.ok); };
      cell.mean_abs_correlation = head(corr).mean();
      cell.mean_sd_diff = head(sd).mean();
      if (cell.ok >= 2) {
        double root = std::sqrt(static_cast<double>(cell.ok));
        cell.se_abs_correlation = sample_sd(head(corr)) / root;
        cell.se_sd_diff = sample_sd(head(sd)) / root;
      }
    }
  }
  return res;
}

inline void write_study_tsv(const StudyResult& res, std::ostream& os) {
  os << "cell\tok\tfailed\tmean_abs_correlation\tse_abs_correlation"
        "\tmean_sd_diff\tse_sd_diff\n";
  for (const CellSummary& c : res.cells) {
    os << c.label << '\t' << c.ok << '\t' << c.failed << '\t'
       << format_double(c.mean_abs_correlation) << '\t'
       << format_double(c.se_abs_correlation) << '\t' << format_double(c.mean_sd_diff)
       << '\t' << format_double(c.se_sd_diff) << '\n';
  }
}

inline void write_details_tsv(const StudyResult& res, std::ostream& os) {
  os << "cell\treplication\tstatus\tabs_correlation\tsd_diff\n";
  for (const CellSummary& c : res.cells)
    for (std::size_t rep = 0; rep < c.records.size(); ++rep) {
      const ReplicationRecord& r = c.records[rep];
      os << c.label << '\t' << rep << '\t' << (r.ok ? "ok" : "failed") << '\t'
         << format_double(r.abs_correlation) << '\t' << format_double(r.sd_diff) << '\n';
    }
}

}  // namespace wir
