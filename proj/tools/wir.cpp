#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wir/wir.hpp"

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw wir::InvalidSpec("cannot write '" + path + "'");
  return out;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i)));
  return rows;
}

struct FitArgs {
  std::string data, output;
  std::string weight = "pooled", basis = "poly:3";
  int d = 1, y_col = 0;
  std::optional<double> lambda;
  bool json = false;
};

void run_fit(const FitArgs& a) {
  wir::Dataset ds = wir::load_dataset_file(a.data, a.y_col);
  wir::BasisMatrix basis = wir::build_basis(ds.y, wir::BasisSpec::parse(a.basis));
  wir::ReductionFit fit =
      wir::fit_pipeline(ds.X, basis, wir::weight_kind_from_string(a.weight), a.lambda, a.d);
  wir::Predictor pr = wir::make_predictor(fit, ds.X, ds.y);
  double in_rms = wir::rms(wir::in_sample_predictions(pr), ds.y);

  auto out = open_output(a.output);
  wir::save_model(fit, pr, out);

  if (a.json) {
    nlohmann::json j{{"n", ds.X.rows()},
                     {"p", ds.X.cols()},
                     {"r", basis.r()},
                     {"d", fit.d},
                     {"weight", wir::to_string(fit.W_hat.kind)},
                     {"eigvals", vector_json(fit.eigvals)},
                     {"in_sample_rms", in_rms},
                     {"model", a.output}};
    if (fit.W_hat.lambda) j["lambda"] = *fit.W_hat.lambda;
    if (!fit.W_hat.converged) j["weight_converged"] = false;
    std::cout << j.dump(1) << '\n';
    return;
  }
  std::cout << "n = " << ds.X.rows() << ", p = " << ds.X.cols() << ", r = " << basis.r()
            << ", d = " << fit.d << '\n';
  std::cout << "weight = " << wir::to_string(fit.W_hat.kind);
  if (fit.W_hat.lambda) std::cout << " (lambda = " << wir::format_double(*fit.W_hat.lambda) << ")";
  if (!fit.W_hat.converged) std::cout << " [did not converge]";
  std::cout << '\n';
  std::cout << "eigenvalues:";
  for (Eigen::Index i = 0; i < fit.eigvals.size(); ++i)
    std::cout << ' ' << wir::format_double(fit.eigvals(i));
  std::cout << '\n';
  std::cout << "in-sample rms = " << wir::format_double(in_rms) << '\n';
  std::cout << "model written to " << a.output << '\n';
}

struct PredictArgs {
  std::string model, data, output;
};

void run_predict(const PredictArgs& a) {
  std::ifstream in(a.model);
  if (!in) throw wir::InvalidSpec("cannot open '" + a.model + "'");
  wir::Predictor pr = wir::make_predictor(wir::load_model(in));
  Eigen::MatrixXd X = wir::load_matrix_file(a.data);
  Eigen::VectorXd y_hat = wir::forward_predict_rows(pr, X);
  if (a.output.empty()) {
    wir::write_predictions(y_hat, std::cout);
  } else {
    auto out = open_output(a.output);
    wir::write_predictions(y_hat, out);
    std::cout << y_hat.size() << " predictions written to " << a.output << '\n';
  }
}

struct SelectArgs {
  std::string data;
  std::string weight = "pooled", basis = "poly:3";
  std::optional<double> lambda;
  double alpha = 0.05;
  int d_max = -1, nperm = 1000, y_col = 0, threads = 1;
  std::uint64_t seed = 0;
  bool json = false;
};

void run_select(const SelectArgs& a) {
  wir::Dataset ds = wir::load_dataset_file(a.data, a.y_col);
  wir::SelectDResult res =
      wir::select_d(ds.X, ds.y, wir::BasisSpec::parse(a.basis),
                    wir::weight_kind_from_string(a.weight), a.lambda, a.alpha, a.d_max, a.nperm,
                    a.seed, a.threads);
  for (const wir::PermTestResult& t : res.tests)
    if (t.failures * 20 > t.nperm)
      std::cerr << "warning: " << t.failures << " of " << t.nperm
                << " permutation refits failed at d0 = " << t.d0 << '\n';

  if (a.json) {
    nlohmann::json tests = nlohmann::json::array();
    for (const wir::PermTestResult& t : res.tests)
      tests.push_back({{"d0", t.d0},
                       {"statistic", t.statistic},
                       {"p_value", t.p_value},
                       {"nperm", t.nperm},
                       {"failures", t.failures}});
    std::cout << nlohmann::json{{"d_hat", res.d_hat}, {"tests", tests}}.dump(1) << '\n';
    return;
  }
  for (const wir::PermTestResult& t : res.tests)
    std::cout << "d0 = " << t.d0 << ": rms = " << wir::format_double(t.statistic)
              << ", p = " << wir::format_double(t.p_value) << '\n';
  std::cout << "d_hat = " << res.d_hat << '\n';
}

struct CvArgs {
  std::string data, grid;
  std::string basis = "poly:3";
  int d = 1, folds = 5, y_col = 0, threads = 1;
  std::uint64_t seed = 0;
  bool json = false;
};

void run_cv(const CvArgs& a) {
  wir::Dataset ds = wir::load_dataset_file(a.data, a.y_col);
  std::vector<double> grid = wir::parse_lambda_grid(a.grid);
  wir::CvResult res = wir::cv_lambda(ds.X, ds.y, wir::BasisSpec::parse(a.basis), a.d, grid,
                                     a.folds, a.seed, a.threads);
  if (a.json) {
    nlohmann::json j{{"chosen_lambda", res.chosen_lambda},
                     {"lambda_grid", res.lambda_grid},
                     {"scores", res.scores}};
    std::cout << j.dump(1) << '\n';
    return;
  }
  for (std::size_t i = 0; i < res.lambda_grid.size(); ++i)
    std::cout << "lambda = " << wir::format_double(res.lambda_grid[i])
              << ": score = " << wir::format_double(res.scores[i]) << '\n';
  std::cout << "chosen lambda = " << wir::format_double(res.chosen_lambda) << '\n';
}

struct SimulateArgs {
  std::string config, output, details;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void run_simulate(const SimulateArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw wir::InvalidSpec("cannot open '" + a.config + "'");
  wir::StudyConfig sc = wir::load_study_config(in);
  if (a.seed) sc.seed = *a.seed;
  if (a.threads) sc.threads = *a.threads;
  wir::StudyResult res = wir::run_study(sc);
  if (a.output.empty()) {
    wir::write_study_tsv(res, std::cout);
  } else {
    auto out = open_output(a.output);
    wir::write_study_tsv(res, out);
    std::cout << res.cells.size() << " cells written to " << a.output << '\n';
  }
  if (!a.details.empty()) {
    auto out = open_output(a.details);
    wir::write_details_tsv(res, out);
  }
}

struct DiagnosticsArgs {
  std::string config;
  Eigen::Index n = 0;
  int cell = 0;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

void run_diagnostics(const DiagnosticsArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw wir::InvalidSpec("cannot open '" + a.config + "'");
  wir::StudyConfig sc = wir::load_study_config(in);
  if (a.seed) sc.seed = *a.seed;
  if (a.cell < 0 || static_cast<std::size_t>(a.cell) >= sc.cells.size())
    throw wir::InvalidSpec("cell index out of range (config has " +
                           std::to_string(sc.cells.size()) + " cells)");
  const wir::ReplicationConfig& rc = sc.cells[a.cell].config;

  // same keying as a study run with regenerate_model = false, so the numbers
  // describe the realization such a study actually uses
  std::uint64_t model_seed = wir::derive_seed(
      sc.seed, {wir::stream::model, static_cast<std::uint64_t>(rc.model.p)});
  wir::PopulationModel pm = wir::with_weight(wir::gen_model(rc.model, model_seed), rc.weight);
  wir::PopulationDiagnostics diag = wir::diagnostics(pm, a.n);

  Eigen::VectorXd sd_nu = diag.var_nu.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (a.json) {
    nlohmann::json j{{"cell", sc.cells[a.cell].label},
                     {"n", a.n},
                     {"kappa", diag.kappa},
                     {"psi", diag.psi},
                     {"rho_bar", diag.rho_bar},
                     {"rho_spectral_norm", diag.rho_spectral},
                     {"var_nu", matrix_json(diag.var_nu)},
                     {"sd_nu", vector_json(sd_nu)}};
    std::cout << j.dump(1) << '\n';
    return;
  }
  std::cout << "cell " << sc.cells[a.cell].label << ", n = " << a.n << '\n';
  std::cout << "kappa = " << wir::format_double(diag.kappa) << '\n';
  std::cout << "psi = " << wir::format_double(diag.psi) << '\n';
  std::cout << "rho_bar = " << wir::format_double(diag.rho_bar) << '\n';
  std::cout << "rho_spectral_norm = " << wir::format_double(diag.rho_spectral) << '\n';
  std::cout << "sd_nu =";
  for (Eigen::Index i = 0; i < sd_nu.size(); ++i)
    std::cout << ' ' << wir::format_double(sd_nu(i));
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted inverse-regression reductions: fit, predict, and study them"};
  app.require_subcommand(1);
  std::function<void()> action;
  bool json_errors = false;

  FitArgs fit_args;
  {
    CLI::App* c = app.add_subcommand("fit", "fit a reduction on a CSV dataset");
    c->add_option("data", fit_args.data, "training CSV (response in --y-col)")->required();
    c->add_option("-o,--output", fit_args.output, "model JSON path")->required();
    c->add_option("--weight", fit_args.weight, "identity|diag|pooled|spice|quad");
    c->add_option("--basis", fit_args.basis, "poly:K, slices:K, or spline:K");
    c->add_option("--d", fit_args.d, "reduction dimension");
    c->add_option("--lambda", fit_args.lambda, "penalty for spice/quad weights");
    c->add_option("--y-col", fit_args.y_col, "0-based response column");
    c->add_flag("--json", fit_args.json, "machine-readable summary");
    c->callback([&] {
      json_errors = fit_args.json;
      action = [&] { run_fit(fit_args); };
    });
  }

  PredictArgs predict_args;
  {
    CLI::App* c = app.add_subcommand("predict", "predict responses for new predictor rows");
    c->add_option("model", predict_args.model, "model JSON from fit")->required();
    c->add_option("data", predict_args.data, "CSV of predictor rows")->required();
    c->add_option("-o,--output", predict_args.output, "predictions CSV (default stdout)");
    c->callback([&] { action = [&] { run_predict(predict_args); }; });
  }

  SelectArgs select_args;
  {
    CLI::App* c = app.add_subcommand("select-d", "choose d by sequential permutation tests");
    c->add_option("data", select_args.data, "training CSV")->required();
    c->add_option("--weight", select_args.weight, "identity|diag|pooled|spice|quad");
    c->add_option("--basis", select_args.basis, "response basis");
    c->add_option("--lambda", select_args.lambda, "penalty for spice/quad weights");
    c->add_option("--alpha", select_args.alpha, "rejection level");
    c->add_option("--d-max", select_args.d_max, "largest d to test (default r - 1)");
    c->add_option("--nperm", select_args.nperm, "permutations per test");
    c->add_option("--seed", select_args.seed, "RNG seed");
    c->add_option("--threads", select_args.threads, "worker threads");
    c->add_option("--y-col", select_args.y_col, "0-based response column");
    c->add_flag("--json", select_args.json, "machine-readable output");
    c->callback([&] {
      json_errors = select_args.json;
      action = [&] { run_select(select_args); };
    });
  }

  CvArgs cv_args;
  {
    CLI::App* c = app.add_subcommand("cv-lambda", "choose the sparse-weight penalty by K-fold CV");
    c->add_option("data", cv_args.data, "training CSV")->required();
    c->add_option("--grid,--lambda-grid", cv_args.grid,
                  "comma list or lo:hi:COUNT[:log|:lin]")
        ->required();
    c->add_option("--folds", cv_args.folds, "fold count");
    c->add_option("--d", cv_args.d, "reduction dimension");
    c->add_option("--basis", cv_args.basis, "response basis");
    c->add_option("--seed", cv_args.seed, "RNG seed");
    c->add_option("--threads", cv_args.threads, "worker threads");
    c->add_option("--y-col", cv_args.y_col, "0-based response column");
    c->add_flag("--json", cv_args.json, "machine-readable output");
    c->callback([&] {
      json_errors = cv_args.json;
      action = [&] { run_cv(cv_args); };
    });
  }

  SimulateArgs sim_args;
  {
    CLI::App* c = app.add_subcommand("simulate", "run a replication study from a config file");
    c->add_option("--config", sim_args.config, "study config file")->required();
    c->add_option("--seed", sim_args.seed, "override the config seed");
    c->add_option("--threads", sim_args.threads, "override the config thread count");
    c->add_option("-o,--output", sim_args.output, "summary TSV (default stdout)");
    c->add_option("--details", sim_args.details, "per-replication TSV");
    c->callback([&] { action = [&] { run_simulate(sim_args); }; });
  }

  DiagnosticsArgs diag_args;
  {
    CLI::App* c = app.add_subcommand("diagnostics",
                                     "population diagnostics for a configured model");
    c->add_option("--config", diag_args.config, "study config file")->required();
    c->add_option("--n", diag_args.n, "sample size entering the rates")->required();
    c->add_option("--cell", diag_args.cell, "cell index in the expanded grid");
    c->add_option("--seed", diag_args.seed, "override the config seed");
    c->add_flag("--json", diag_args.json, "machine-readable output");
    c->callback([&] {
      json_errors = diag_args.json;
      action = [&] { run_diagnostics(diag_args); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto report = [&](const char* kind, const char* what) {
    if (json_errors)
      std::cerr << nlohmann::json{{"error", what}, {"kind", kind}}.dump() << '\n';
    else
      std::cerr << "error: " << what << '\n';
  };
  try {
    action();
  } catch (const wir::Error& e) {
    bool validation = e.kind() == wir::ErrorKind::validation;
    report(validation ? "validation" : "numerical", e.what());
    return validation ? 2 : 3;
  } catch (const std::exception& e) {
    report("numerical", e.what());
    return 3;
  }
  return 0;
}
