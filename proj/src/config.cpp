#include "fnboost/config.hpp"

#include <stdexcept>

namespace fnboost {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument(where + ": " + what);
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.at(key).is_number()) fail(where + "." + key, "expected a number");
  return j.at(key).get<double>();
}

void apply_spline_options(const json& clause, SplineBasis& basis, int& diff_order,
                          const std::string& where) {
  if (clause.contains("knots")) {
    const int k = static_cast<int>(get_number(clause, "knots", where));
    if (k < 0) fail(where + ".knots", "must be nonnegative");
    basis.inner_knots = k;
  }
  if (clause.contains("degree")) {
    const int d = static_cast<int>(get_number(clause, "degree", where));
    if (d < 0) fail(where + ".degree", "must be nonnegative");
    basis.degree = d;
  }
  if (clause.contains("differences")) {
    const int d = static_cast<int>(get_number(clause, "differences", where));
    if (d < 0) fail(where + ".differences", "must be nonnegative");
    diff_order = d;
  }
}

LimitsFunction limits_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind")) fail(where, "expected {\"kind\": ...}");
  const std::string kind = j.at("kind").get<std::string>();
  const double delta = j.contains("delta") ? get_number(j, "delta", where) : 0.0;
  if (kind == "historical") return LimitsFunction::historical();
  if (kind == "lag") return LimitsFunction::lag(delta);
  if (kind == "lead") return LimitsFunction::lead(delta);
  fail(where + ".kind", "unknown limits kind '" + kind + "'");
}

json limits_to_json(const LimitsFunction& l) {
  json j;
  switch (l.kind) {
    case LimitsFunction::Kind::Historical: j["kind"] = "historical"; break;
    case LimitsFunction::Kind::Lag: j["kind"] = "lag"; j["delta"] = l.delta; break;
    case LimitsFunction::Kind::Lead: j["kind"] = "lead"; j["delta"] = l.delta; break;
    case LimitsFunction::Kind::Custom:
      throw std::invalid_argument("custom limits cannot be serialized");
  }
  return j;
}

IntScheme scheme_from_string(const std::string& s, const std::string& where) {
  if (s == "equal") return IntScheme::Equal;
  if (s == "riemann") return IntScheme::Riemann;
  if (s == "trapezoid") return IntScheme::Trapezoid;
  fail(where, "unknown integration scheme '" + s + "'");
}

std::string scheme_to_string(IntScheme s) {
  switch (s) {
    case IntScheme::Equal: return "equal";
    case IntScheme::Riemann: return "riemann";
    case IntScheme::Trapezoid: return "trapezoid";
  }
  return "equal";
}

}  // namespace

BaseLearnerSpec learner_from_json(const json& clause, const std::string& where) {
  if (!clause.is_object()) fail(where, "expected a learner object");
  if (!clause.contains("type")) fail(where, "missing \"type\"");
  const std::string type = clause.at("type").get<std::string>();

  BaseLearnerSpec spec;
  if (type == "intercept") {
    spec = intercept_spec();
  } else if (type == "bols" || type == "bolsc") {
    std::vector<std::string> vars;
    if (clause.contains("z")) {
      if (clause.at("z").is_array())
        vars = clause.at("z").get<std::vector<std::string>>();
      else
        vars.push_back(clause.at("z").get<std::string>());
    }
    if (vars.empty()) fail(where, "bols/bolsc needs \"z\"");
    spec = ols_spec(std::move(vars), type == "bolsc");
    if (clause.contains("intercept"))
      spec.include_intercept = clause.at("intercept").get<bool>();
  } else if (type == "brandom") {
    if (!clause.contains("z")) fail(where, "brandom needs \"z\"");
    spec = random_spec(clause.at("z").get<std::string>());
  } else if (type == "bbs" || type == "bbsc") {
    // omitted "z" means the response-time marginal (timeformula use)
    spec = bbs_spec(clause.contains("z") ? clause.at("z").get<std::string>() : "",
                    type == "bbsc");
    apply_spline_options(clause, spec.basis, spec.diff_order, where);
  } else if (type == "bsignal") {
    if (!clause.contains("x")) fail(where, "bsignal needs \"x\"");
    spec = signal_spec(clause.at("x").get<std::string>());
    apply_spline_options(clause, spec.basis, spec.diff_order, where);
  } else if (type == "bfpc") {
    if (!clause.contains("x")) fail(where, "bfpc needs \"x\"");
    spec = fpc_spec(clause.at("x").get<std::string>());
    if (clause.contains("pve")) spec.pve = get_number(clause, "pve", where);
    if (clause.contains("npc"))
      spec.npc = static_cast<int>(get_number(clause, "npc", where));
  } else if (type == "bconcurrent") {
    if (!clause.contains("x")) fail(where, "bconcurrent needs \"x\"");
    spec = concurrent_spec(clause.at("x").get<std::string>());
    apply_spline_options(clause, spec.basis, spec.diff_order, where);
  } else if (type == "bhist") {
    if (!clause.contains("x")) fail(where, "bhist needs \"x\"");
    spec = hist_spec(clause.at("x").get<std::string>());
    if (clause.contains("limits"))
      spec.limits = limits_from_json(clause.at("limits"), where + ".limits");
    if (clause.contains("standardize")) {
      const std::string s = clause.at("standardize").get<std::string>();
      if (s == "length") spec.standardize = HistStandardize::Length;
      else if (s == "none") spec.standardize = HistStandardize::None;
      else fail(where + ".standardize", "expected \"none\" or \"length\"");
    }
    apply_spline_options(clause, spec.basis, spec.diff_order, where);
    if (clause.contains("knots_t"))
      spec.basis_t.inner_knots = static_cast<int>(get_number(clause, "knots_t", where));
    if (clause.contains("degree_t"))
      spec.basis_t.degree = static_cast<int>(get_number(clause, "degree_t", where));
    if (clause.contains("lower_t")) {
      spec.basis_t.lower = get_number(clause, "lower_t", where);
      spec.auto_range = false;
    }
    if (clause.contains("upper_t")) {
      spec.basis_t.upper = get_number(clause, "upper_t", where);
      spec.auto_range = false;
    }
  } else if (type == "compose") {
    if (!clause.contains("op")) fail(where, "compose needs \"op\"");
    const std::string op = clause.at("op").get<std::string>();
    ComposeOp cop;
    if (op == "kronecker") cop = ComposeOp::Kronecker;
    else if (op == "kronecker_t_only") cop = ComposeOp::KroneckerTOnly;
    else if (op == "row_tensor") cop = ComposeOp::RowTensor;
    else if (op == "row_tensor_constrained") cop = ComposeOp::RowTensorConstrained;
    else fail(where + ".op", "unknown composition '" + op + "'");
    if (!clause.contains("left") || !clause.contains("right"))
      fail(where, "compose needs \"left\" and \"right\"");
    spec = compose_spec(cop, learner_from_json(clause.at("left"), where + ".left"),
                        learner_from_json(clause.at("right"), where + ".right"));
  } else {
    fail(where + ".type", "unknown learner type '" + type + "'");
  }

  if (clause.contains("int_scheme"))
    spec.int_scheme = scheme_from_string(clause.at("int_scheme").get<std::string>(),
                                         where + ".int_scheme");
  if (clause.contains("df")) {
    const double df = get_number(clause, "df", where);
    if (df <= 0) fail(where + ".df", "must be positive");
    spec.df = df;
  }
  if (clause.contains("lambda")) {
    const double l = get_number(clause, "lambda", where);
    if (l < 0) fail(where + ".lambda", "must be nonnegative");
    spec.lambda = l;
  }
  if (spec.df && spec.lambda) fail(where, "specify either df or lambda, not both");
  if (clause.contains("lower")) {
    spec.basis.lower = get_number(clause, "lower", where);
    spec.auto_range = false;
  }
  if (clause.contains("upper")) {
    spec.basis.upper = get_number(clause, "upper", where);
    spec.auto_range = false;
  }
  if (clause.contains("label")) spec.label = clause.at("label").get<std::string>();
  return spec;
}

json learner_to_json(const BaseLearnerSpec& spec) {
  json j;
  switch (spec.type) {
    case LearnerType::Intercept: j["type"] = "intercept"; break;
    case LearnerType::Ols:
    case LearnerType::OlsConstrained:
      j["type"] = spec.type == LearnerType::Ols ? "bols" : "bolsc";
      j["z"] = spec.vars;
      j["intercept"] = spec.include_intercept;
      break;
    case LearnerType::Random:
      j["type"] = "brandom";
      j["z"] = spec.var;
      break;
    case LearnerType::Bbs:
    case LearnerType::BbsConstrained:
      j["type"] = spec.type == LearnerType::Bbs ? "bbs" : "bbsc";
      if (!spec.var.empty()) j["z"] = spec.var;
      break;
    case LearnerType::Signal:
      j["type"] = "bsignal";
      j["x"] = spec.var;
      break;
    case LearnerType::Fpc:
      j["type"] = "bfpc";
      j["x"] = spec.var;
      j["pve"] = spec.pve;
      if (spec.npc) j["npc"] = *spec.npc;
      break;
    case LearnerType::Concurrent:
      j["type"] = "bconcurrent";
      j["x"] = spec.var;
      break;
    case LearnerType::Hist:
      j["type"] = "bhist";
      j["x"] = spec.var;
      j["limits"] = limits_to_json(spec.limits);
      j["standardize"] = spec.standardize == HistStandardize::Length ? "length" : "none";
      j["knots_t"] = spec.basis_t.inner_knots;
      j["degree_t"] = spec.basis_t.degree;
      j["lower_t"] = spec.basis_t.lower;
      j["upper_t"] = spec.basis_t.upper;
      break;
    case LearnerType::Compose: {
      j["type"] = "compose";
      switch (spec.op) {
        case ComposeOp::Kronecker: j["op"] = "kronecker"; break;
        case ComposeOp::KroneckerTOnly: j["op"] = "kronecker_t_only"; break;
        case ComposeOp::RowTensor: j["op"] = "row_tensor"; break;
        case ComposeOp::RowTensorConstrained: j["op"] = "row_tensor_constrained"; break;
      }
      j["left"] = learner_to_json(*spec.left);
      j["right"] = learner_to_json(*spec.right);
      break;
    }
  }
  if (spec.type != LearnerType::Intercept && spec.type != LearnerType::Ols &&
      spec.type != LearnerType::OlsConstrained && spec.type != LearnerType::Random &&
      spec.type != LearnerType::Compose) {
    j["knots"] = spec.basis.inner_knots;
    j["degree"] = spec.basis.degree;
    j["differences"] = spec.diff_order;
    if (!spec.auto_range) {
      j["lower"] = spec.basis.lower;
      j["upper"] = spec.basis.upper;
    }
    j["int_scheme"] = scheme_to_string(spec.int_scheme);
  }
  if (spec.df) j["df"] = *spec.df;
  if (spec.lambda) j["lambda"] = *spec.lambda;
  if (!spec.label.empty()) j["label"] = spec.label;
  return j;
}

ModelSpec model_spec_from_json(const json& config) {
  if (!config.is_object()) throw std::invalid_argument("model: expected an object");
  ModelSpec spec;
  if (config.contains("family")) spec.family = config.at("family").get<std::string>();
  if (config.contains("control")) {
    const json& c = config.at("control");
    if (c.contains("mstop")) spec.control.mstop = c.at("mstop").get<int>();
    if (c.contains("nu")) spec.control.nu = c.at("nu").get<double>();
    if (c.contains("array_path"))
      spec.control.use_array_path = c.at("array_path").get<bool>();
  }
  if (config.contains("offset_mode")) {
    const std::string m = config.at("offset_mode").get<std::string>();
    if (m == "smooth") spec.offset_mode = OffsetMode::Smooth;
    else if (m == "scalar") spec.offset_mode = OffsetMode::Scalar;
    else throw std::invalid_argument("offset_mode: expected \"smooth\" or \"scalar\"");
  }
  if (config.contains("numInt"))
    spec.num_int =
        scheme_from_string(config.at("numInt").get<std::string>(), "numInt");
  if (config.contains("timeformula") && !config.at("timeformula").is_null())
    spec.timeformula = learner_from_json(config.at("timeformula"), "timeformula");
  if (!config.contains("formula") || !config.at("formula").is_array())
    throw std::invalid_argument("model: missing \"formula\" array");
  int idx = 0;
  for (const auto& clause : config.at("formula"))
    spec.formula.push_back(
        learner_from_json(clause, "formula[" + std::to_string(idx++) + "]"));
  return spec;
}

json model_spec_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = spec.family;
  j["control"] = {{"mstop", spec.control.mstop},
                  {"array_path", spec.control.use_array_path}};
  if (spec.control.nu) j["control"]["nu"] = *spec.control.nu;
  j["offset_mode"] = spec.offset_mode == OffsetMode::Smooth ? "smooth" : "scalar";
  j["numInt"] = scheme_to_string(spec.num_int);
  if (spec.timeformula) j["timeformula"] = learner_to_json(*spec.timeformula);
  j["formula"] = json::array();
  for (const auto& term : spec.formula) j["formula"].push_back(learner_to_json(term));
  return j;
}

}  // namespace fnboost
