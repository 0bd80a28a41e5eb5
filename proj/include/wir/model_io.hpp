#pragma once

#include <Eigen/Dense>

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wir/basis.hpp"
#include "wir/errors.hpp"
#include "wir/predict.hpp"
#include "wir/reduction.hpp"
#include "wir/weights.hpp"

namespace wir {

inline constexpr const char* model_format_tag = "wir-reduction";
inline constexpr int model_format_version = 1;

// everything a fit/predict round trip needs, without the p x p weight matrix
struct ModelFile {
  int d = 1;
  Eigen::VectorXd mu_hat;
  Eigen::MatrixXd gamma_hat;
  Eigen::MatrixXd b_hat;
  Eigen::MatrixXd coef;
  Eigen::VectorXd eigvals;

  WeightKind weight_kind = WeightKind::scaled_identity;
  std::optional<double> lambda;
  int weight_rank = 0;
  bool weight_converged = true;

  BasisSpec basis_spec;
  std::vector<double> basis_cuts;
  Eigen::VectorXd basis_column_means;

  Eigen::VectorXd train_y;
  Eigen::MatrixXd train_xi;
  Eigen::MatrixXd train_reductions;
};

namespace detail {

inline nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw InvalidSpec(std::string("model field '") + field + "' must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array())
    throw InvalidSpec(std::string("model field '") + field + "' must be an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = rows ? j[0].size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw InvalidSpec(std::string("model field '") + field + "' has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline void save_model(const ReductionFit& fit, const Predictor& pr, std::ostream& os) {
  nlohmann::json j;
  j["format"] = model_format_tag;
  j["version"] = model_format_version;
  j["d"] = fit.d;
  j["mu_hat"] = detail::to_json(fit.mu_hat);
  j["gamma_hat"] = detail::to_json(fit.Gamma_hat);
  j["b_hat"] = detail::to_json(fit.b_hat);
  j["coef"] = detail::to_json(fit.coef);
  j["eigvals"] = detail::to_json(fit.eigvals);
  j["weight"] = {{"kind", to_string(fit.W_hat.kind)},
                 {"rank", fit.W_hat.rank},
                 {"converged", fit.W_hat.converged}};
  if (fit.W_hat.lambda)
    j["weight"]["lambda"] = *fit.W_hat.lambda;
  else
    j["weight"]["lambda"] = nullptr;
  j["basis"] = {{"spec", fit.basis.spec.to_string()},
                {"cuts", fit.basis.cuts},
                {"column_means", detail::to_json(fit.basis.column_means)}};
  j["train"] = {{"y", detail::to_json(pr.train_y)},
                {"xi_hat", detail::to_json(pr.train_xi)},
                {"reductions", detail::to_json(pr.train_reductions)}};
  os << j.dump(1) << '\n';
}

inline ModelFile load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != model_format_tag)
      throw InvalidSpec("not a reduction model file");
    if (j.value("version", -1) != model_format_version)
      throw InvalidSpec("unsupported model file version");

    ModelFile m;
    m.d = j.at("d").get<int>();
    m.mu_hat = detail::vector_from_json(j.at("mu_hat"), "mu_hat");
    m.gamma_hat = detail::matrix_from_json(j.at("gamma_hat"), "gamma_hat");
    m.b_hat = detail::matrix_from_json(j.at("b_hat"), "b_hat");
    m.coef = detail::matrix_from_json(j.at("coef"), "coef");
    m.eigvals = detail::vector_from_json(j.at("eigvals"), "eigvals");

    const nlohmann::json& w = j.at("weight");
    m.weight_kind = weight_kind_from_string(w.at("kind").get<std::string>());
    if (!w.at("lambda").is_null()) m.lambda = w.at("lambda").get<double>();
    m.weight_rank = w.value("rank", 0);
    m.weight_converged = w.value("converged", true);

    const nlohmann::json& b = j.at("basis");
    m.basis_spec = BasisSpec::parse(b.at("spec").get<std::string>());
    m.basis_cuts = b.at("cuts").get<std::vector<double>>();
    m.basis_column_means = detail::vector_from_json(b.at("column_means"), "column_means");

    const nlohmann::json& t = j.at("train");
    m.train_y = detail::vector_from_json(t.at("y"), "train.y");
    m.train_xi = detail::matrix_from_json(t.at("xi_hat"), "train.xi_hat");
    m.train_reductions = detail::matrix_from_json(t.at("reductions"), "train.reductions");

    if (m.d < 1 || m.gamma_hat.cols() != m.d || m.coef.rows() != m.d ||
        m.coef.cols() != m.mu_hat.size() || m.gamma_hat.rows() != m.mu_hat.size())
      throw InvalidSpec("model file dimensions are inconsistent");
    if (m.eigvals.size() < m.d) throw InvalidSpec("model file is missing eigenvalues");
    if (m.train_y.size() != m.train_xi.rows() || m.train_y.size() != m.train_reductions.rows() ||
        m.train_xi.cols() != m.d || m.train_reductions.cols() != m.d)
      throw InvalidSpec("model file training block is inconsistent");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(std::string("model file is missing fields: ") + e.what());
  }
}

inline Predictor make_predictor(const ModelFile& m) {
  Predictor pr;
  pr.mu_hat = m.mu_hat;
  pr.coef = m.coef;
  pr.train_reductions = m.train_reductions;
  pr.train_xi = m.train_xi;
  pr.train_y = m.train_y;
  pr.precision = Eigen::MatrixXd(m.eigvals.head(m.d).asDiagonal());
  return pr;
}

}  // namespace wir
