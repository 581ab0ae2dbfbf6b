#include "fnboost/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "fnboost/config.hpp"

namespace fnboost {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const json& data = j.at("data");
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data.at(k++).get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vector vector_from_json(const json& j) {
  Vector v(j.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

json basis_to_json(const SplineBasis& b) {
  return {{"knots", b.inner_knots}, {"degree", b.degree}, {"lower", b.lower},
          {"upper", b.upper}};
}

SplineBasis basis_from_json(const json& j) {
  return SplineBasis{j.at("knots").get<int>(), j.at("degree").get<int>(),
                     j.at("lower").get<double>(), j.at("upper").get<double>()};
}

json built_to_json(const BuiltBaseLearner& b) {
  json j;
  j["spec"] = learner_to_json(b.spec);
  j["label"] = b.label;
  j["lambda"] = b.lambda;
  j["df"] = b.df;
  j["transform"] = matrix_to_json(b.transform);
  j["rows_are_curves"] = b.rows_are_curves;
  if (!b.factor_levels.empty()) j["factor_levels"] = b.factor_levels;
  if (b.modes) {
    json m;
    m["eigenvalues"] = vector_to_json(b.modes->eigenvalues);
    m["eigenfunctions"] = matrix_to_json(b.modes->eigenfunctions);
    m["mean"] = vector_to_json(b.modes->mean);
    m["grid"] = vector_to_json(b.modes->grid);
    m["pve_achieved"] = b.modes->pve_achieved;
    j["modes"] = std::move(m);
  }
  if (b.left) j["left"] = built_to_json(*b.left);
  if (b.right) j["right"] = built_to_json(*b.right);
  return j;
}

BuiltBaseLearner built_from_json(const json& j) {
  BuiltBaseLearner b;
  b.spec = learner_from_json(j.at("spec"), "learner");
  if (j.at("spec").contains("label")) b.spec.label = j.at("spec").at("label");
  b.label = j.at("label").get<std::string>();
  b.lambda = j.at("lambda").get<double>();
  b.df = j.at("df").get<double>();
  b.transform = matrix_from_json(j.at("transform"));
  b.rows_are_curves = j.at("rows_are_curves").get<bool>();
  if (j.contains("factor_levels"))
    b.factor_levels = j.at("factor_levels").get<std::vector<std::string>>();
  if (j.contains("modes")) {
    FpcaResult m;
    m.eigenvalues = vector_from_json(j.at("modes").at("eigenvalues"));
    m.eigenfunctions = matrix_from_json(j.at("modes").at("eigenfunctions"));
    m.mean = vector_from_json(j.at("modes").at("mean"));
    m.grid = vector_from_json(j.at("modes").at("grid"));
    m.scores.resize(0, m.eigenvalues.size());
    m.pve_achieved = j.at("modes").at("pve_achieved").get<double>();
    b.modes = std::move(m);
  }
  if (j.contains("left"))
    b.left = std::make_shared<BuiltBaseLearner>(built_from_json(j.at("left")));
  if (j.contains("right"))
    b.right = std::make_shared<BuiltBaseLearner>(built_from_json(j.at("right")));
  return b;
}

}  // namespace

void save_model(const FittedModel& model, const std::string& path) {
  json j;
  j["format"] = "fnboost-model";
  j["version"] = kFormatVersion;
  j["spec"] = model_spec_to_json(model.spec);
  j["learners"] = json::array();
  for (const auto& b : model.learners) j["learners"].push_back(built_to_json(b));
  j["offset"] = {{"smooth", model.offset_is_smooth}, {"scalar", model.offset_scalar}};
  if (model.offset_is_smooth) {
    j["offset"]["basis"] = basis_to_json(model.offset_basis);
    j["offset"]["coef"] = vector_to_json(model.offset_coef);
  }
  j["path"] = json::array();
  for (const auto& e : model.path)
    j["path"].push_back({{"learner", e.learner},
                         {"increment", vector_to_json(e.increment)}});
  j["risk_path"] = vector_to_json(model.risk_path);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump();
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("invalid model file " + path + ": " + e.what());
  }
  if (!j.contains("format") || j.at("format") != "fnboost-model")
    throw std::runtime_error(path + " is not a model file");
  if (j.at("version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported model file version");

  FittedModel model;
  model.spec = model_spec_from_json(j.at("spec"));
  for (const auto& lj : j.at("learners")) model.learners.push_back(built_from_json(lj));
  model.offset_is_smooth = j.at("offset").at("smooth").get<bool>();
  model.offset_scalar = j.at("offset").at("scalar").get<double>();
  if (model.offset_is_smooth) {
    model.offset_basis = basis_from_json(j.at("offset").at("basis"));
    model.offset_coef = vector_from_json(j.at("offset").at("coef"));
  }
  for (const auto& ej : j.at("path")) {
    PathEntry e;
    e.learner = ej.at("learner").get<int>();
    e.increment = vector_from_json(ej.at("increment"));
    model.path.push_back(std::move(e));
  }
  model.risk_path = vector_from_json(j.at("risk_path"));
  model.coefficients.resize(model.learners.size());
  for (size_t k = 0; k < model.learners.size(); ++k)
    model.coefficients[k] = Vector::Zero(model.learners[k].transform.cols());
  for (const auto& e : model.path) model.coefficients[e.learner] += e.increment;
  return model;
}

}  // namespace fnboost
