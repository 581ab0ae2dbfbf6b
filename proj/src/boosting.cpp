#include "fnboost/boosting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fnboost {

namespace {

bool is_covariate_marginal(const BaseLearnerSpec& s) {
  switch (s.type) {
    case LearnerType::Intercept:
    case LearnerType::Ols:
    case LearnerType::OlsConstrained:
    case LearnerType::Random:
    case LearnerType::Signal:
    case LearnerType::Fpc:
      return true;
    case LearnerType::Bbs:
    case LearnerType::BbsConstrained:
      return !s.var.empty();
    default:
      return false;
  }
}

Vector long_response_values(const Response& response) {
  if (std::holds_alternative<Vector>(response)) return std::get<Vector>(response);
  if (std::holds_alternative<GridResponse>(response))
    return grid_to_long(std::get<GridResponse>(response)).values;
  return std::get<LongResponse>(response).values;
}

/// Group long observations by (nearly) equal time values, preserving first
/// appearance order, which for grid layouts is the increasing grid order.
struct TimeGroups {
  std::vector<double> times;
  std::vector<std::vector<int>> members;
};

TimeGroups group_by_time(const ResponseLayout& layout) {
  TimeGroups g;
  for (int o = 0; o < layout.n(); ++o) {
    const double t = layout.times[o];
    int idx = -1;
    for (size_t u = 0; u < g.times.size(); ++u)
      if (std::abs(g.times[u] - t) <= 1e-9) {
        idx = static_cast<int>(u);
        break;
      }
    if (idx < 0) {
      idx = static_cast<int>(g.times.size());
      g.times.push_back(t);
      g.members.emplace_back();
    }
    g.members[idx].push_back(o);
  }
  return g;
}

/// Per-learner solver state frozen before iteration 1.
struct LearnerSolver {
  Matrix gram;  // Z' W Z
  Eigen::LDLT<Matrix> ldlt;
  bool array = false;  // structured rhs via the two marginal designs
  Matrix zl, zr;       // N x KL, G x KR (array path)
  Vector wc, vt;       // separable weights: W(i,g) = wc[i] * vt[g]
};

LearnerSolver make_solver(const BuiltBaseLearner& b, const Vector& w,
                          const ResponseLayout& layout, const Vector& curve_weights,
                          const Vector& time_weights, bool allow_array) {
  LearnerSolver s;
  s.gram = b.design.transpose() * w.asDiagonal() * b.design;
  Matrix a = s.gram + b.lambda * b.penalty;
  s.ldlt.compute(a);
  bool ok = s.ldlt.info() == Eigen::Success;
  if (ok) {
    // probe for a numerically meaningless factorization
    Vector probe = s.ldlt.solve(Vector::Ones(a.rows()));
    ok = probe.allFinite();
  }
  if (!ok) {
    a += (1e-10 * a.trace()) * Matrix::Identity(a.rows(), a.cols());
    s.ldlt.compute(a);
    if (s.ldlt.info() != Eigen::Success ||
        !s.ldlt.solve(Vector::Ones(a.rows())).allFinite())
      throw std::runtime_error("singular penalized normal equations for learner '" +
                               b.label + "'");
  }
  if (allow_array && layout.is_grid && b.spec.type == LearnerType::Compose && b.left &&
      b.right && b.left->rows_are_curves &&
      b.right->design.rows() == layout.time_grid.size()) {
    s.array = true;
    s.zl = b.left->design;
    s.zr = b.right->design;
    s.wc = curve_weights;
    s.vt = time_weights;
  }
  return s;
}

/// rhs = Z' (W o u); the array path computes it through the marginals.
Vector solver_rhs(const LearnerSolver& s, const BuiltBaseLearner& b, const Vector& w,
                  const Vector& u, const ResponseLayout& layout) {
  if (!s.array) return b.design.transpose() * w.cwiseProduct(u);
  const int n = layout.n_curves;
  const int g = static_cast<int>(layout.time_grid.size());
  Eigen::Map<const Matrix> umat(u.data(), n, g);  // column g holds u at time g
  Matrix rhs_mat = s.zl.transpose() * s.wc.asDiagonal() * umat * s.vt.asDiagonal() * s.zr;
  Vector rhs(rhs_mat.size());
  const Eigen::Index kr = s.zr.cols();
  for (Eigen::Index k = 0; k < rhs_mat.rows(); ++k)
    for (Eigen::Index l = 0; l < kr; ++l) rhs[k * kr + l] = rhs_mat(k, l);
  return rhs;
}

struct OffsetFit {
  bool smooth = false;
  double scalar = 0.0;
  SplineBasis basis;
  Vector coef;
};

OffsetFit compute_offset(const Family& fam, const Vector& y, const Vector& w,
                         const ResponseLayout& layout, OffsetMode mode) {
  OffsetFit off;
  if (mode == OffsetMode::Scalar || layout.is_scalar || layout.times.size() == 0) {
    off.scalar = fam.offset(y, w);
    return off;
  }
  const TimeGroups groups = group_by_time(layout);
  const int u_count = static_cast<int>(groups.times.size());
  if (u_count < 2) {
    off.scalar = fam.offset(y, w);
    return off;
  }
  Vector pointwise(u_count);
  for (int u = 0; u < u_count; ++u) {
    Vector yu(groups.members[u].size()), wu(groups.members[u].size());
    for (size_t k = 0; k < groups.members[u].size(); ++k) {
      yu[k] = y[groups.members[u][k]];
      wu[k] = w[groups.members[u][k]];
    }
    pointwise[u] = fam.offset(yu, wu);
  }
  Vector tvals = Eigen::Map<const Vector>(groups.times.data(), u_count);
  off.smooth = true;
  off.basis = SplineBasis{20, 3, tvals.minCoeff(), tvals.maxCoeff()};
  const Matrix phi = bspline_design(tvals, off.basis);
  const Matrix pen = difference_penalty(off.basis.dim(), 2);
  const Matrix gram = phi.transpose() * phi;
  const double rank = df_of_lambda(gram, pen, 0.0);
  const double lambda = df_to_lambda_gram(gram, pen, std::min(6.0, rank));
  Matrix a = gram + lambda * pen;
  off.coef = a.ldlt().solve(phi.transpose() * pointwise);
  return off;
}

Family model_family(const ModelSpec& spec) { return family_from_name(spec.family); }

double step_length(const ModelSpec& spec, const Family& fam) {
  const double nu = spec.control.nu.value_or(fam.default_nu);
  if (!(nu > 0.0 && nu <= 1.0))
    throw std::invalid_argument("step length nu must lie in (0,1]");
  return nu;
}

/// Continue boosting `model` until its path holds `target` entries.
void boost_iterations(FittedModel& model, int target, FitObserver* observer) {
  if (!model.data)
    throw std::invalid_argument("continued fitting requires the training data; "
                                "this model was loaded without it");
  const Family fam = model_family(model.spec);
  const double nu = step_length(model.spec, fam);
  const ResponseLayout& layout = model.layout;
  const Vector& w = model.obs_weights;
  const Vector& y = model.y_long;

  Vector time_weights;
  if (layout.is_grid)
    time_weights = integration_weights(layout.time_grid, model.spec.num_int).weights;
  std::vector<LearnerSolver> solvers;
  solvers.reserve(model.learners.size());
  for (const auto& b : model.learners)
    solvers.push_back(make_solver(b, w, layout, model.curve_weights, time_weights,
                                  model.spec.control.use_array_path));

  const int old_len = static_cast<int>(model.risk_path.size());
  model.risk_path.conservativeResize(target + 1);
  for (int m = old_len; m <= target; ++m) model.risk_path[m] = 0.0;

  for (int m = model.mstop() + 1; m <= target; ++m) {
    if (fam.pre_iteration) fam.pre_iteration(y, model.fitted, w);
    Vector u(y.size());
    for (Eigen::Index o = 0; o < y.size(); ++o)
      u[o] = fam.negative_gradient(y[o], model.fitted[o]);
    if (!u.allFinite())
      throw std::runtime_error("non-finite negative gradient for family '" + fam.name +
                               "' at iteration " + std::to_string(m));
    int best = -1;
    double best_q = std::numeric_limits<double>::infinity();
    Vector best_theta;
    for (size_t j = 0; j < model.learners.size(); ++j) {
      const Vector rhs = solver_rhs(solvers[j], model.learners[j], w, u, layout);
      Vector theta = solvers[j].ldlt.solve(rhs);
      if (!theta.allFinite())
        throw std::runtime_error("singular penalized normal equations for learner '" +
                                 model.learners[j].label + "'");
      // weighted RSS up to the constant u'Wu
      const double q = -2.0 * theta.dot(rhs) + theta.dot(solvers[j].gram * theta);
      if (q < best_q) {
        best_q = q;
        best = static_cast<int>(j);
        best_theta = std::move(theta);
      }
    }
    PathEntry entry;
    entry.learner = best;
    entry.increment = nu * best_theta;
    model.coefficients[best] += entry.increment;
    model.fitted += model.learners[best].design * entry.increment;
    model.path.push_back(std::move(entry));
    model.risk_path[m] = integrated_risk(fam, w, y, model.fitted);
    if (observer) observer->after_iteration(m, model.fitted);
  }
}

}  // namespace

Vector FittedModel::offset_on(const ResponseLayout& target) const {
  if (!offset_is_smooth)
    return Vector::Constant(target.is_scalar ? target.n_curves : target.n(),
                            offset_scalar);
  if (target.times.size() == 0)
    throw std::invalid_argument("model has a smooth time-varying offset; "
                                "new data must carry response times");
  return bspline_design(target.times, offset_basis) * offset_coef;
}

FittedModel fit(const ModelSpec& spec, const Dataset& data, const Vector& curve_weights,
                FitObserver* observer, const FittedModel* fixed_preprocessing) {
  if (spec.control.mstop < 0) throw std::invalid_argument("mstop must be >= 0");
  data.validate();
  FittedModel model;
  model.spec = spec;
  model.data = std::make_shared<Dataset>(data);
  model.layout = response_layout(data.response);
  const ResponseLayout& layout = model.layout;

  model.curve_weights =
      curve_weights.size() ? curve_weights : Vector::Ones(layout.n_curves);
  if (model.curve_weights.size() != layout.n_curves)
    throw std::invalid_argument("curve weight vector length mismatch");

  model.y_long = long_response_values(data.response);
  const Vector w_int = response_integration_weights(data.response, spec.num_int);
  model.obs_weights.resize(w_int.size());
  for (Eigen::Index o = 0; o < w_int.size(); ++o)
    model.obs_weights[o] = w_int[o] * model.curve_weights[layout.curve_id[o]];

  const Family fam = model_family(spec);
  if (fam.validate) fam.validate(model.y_long);

  const bool functional = !layout.is_scalar &&
                          !(layout.is_grid && layout.time_grid.size() == 1);
  if (layout.is_scalar && spec.timeformula)
    throw std::invalid_argument("timeformula given for a scalar response");

  if (fixed_preprocessing) {
    // reuse the full-data designs/transforms; recalibrate lambda for W
    for (const auto& ref : fixed_preprocessing->learners) {
      BuiltBaseLearner b = ref;
      if (!b.spec.lambda) {
        const Matrix gram =
            b.design.transpose() * model.obs_weights.asDiagonal() * b.design;
        b.lambda = df_to_lambda_gram(gram, b.penalty, b.df);
      }
      model.learners.push_back(std::move(b));
    }
  } else {
    for (const auto& term : spec.formula) {
      BaseLearnerSpec expanded = term;
      if (functional && is_covariate_marginal(term)) {
        if (!spec.timeformula)
          throw std::invalid_argument(
              "functional response requires a timeformula for learner '" +
              (term.label.empty() ? std::string("<unnamed>") : term.label) + "'");
        expanded = compose_spec(ComposeOp::Kronecker, term, *spec.timeformula);
        expanded.label = term.label;
      }
      model.learners.push_back(build_learner(expanded, data, layout, model.obs_weights));
    }
  }
  if (model.learners.empty()) throw std::invalid_argument("empty formula");

  OffsetFit off;
  if (fixed_preprocessing && fixed_preprocessing->offset_is_smooth) {
    off.smooth = true;
    off.basis = fixed_preprocessing->offset_basis;
    off.coef = fixed_preprocessing->offset_coef;
  } else {
    off = compute_offset(fam, model.y_long, model.obs_weights, layout, spec.offset_mode);
  }
  model.offset_is_smooth = off.smooth;
  model.offset_scalar = off.scalar;
  model.offset_basis = off.basis;
  model.offset_coef = off.coef;
  model.fitted = model.offset_on(layout);

  model.coefficients.resize(model.learners.size());
  for (size_t j = 0; j < model.learners.size(); ++j)
    model.coefficients[j] = Vector::Zero(model.learners[j].k());

  model.risk_path.resize(1);
  model.risk_path[0] = integrated_risk(fam, model.obs_weights, model.y_long, model.fitted);
  if (observer) observer->after_iteration(0, model.fitted);

  boost_iterations(model, spec.control.mstop, observer);
  return model;
}

Vector coefficients_at(const FittedModel& model, int j, int at) {
  if (at < 0 || at > model.mstop())
    throw std::invalid_argument("iteration index outside the recorded path");
  Vector theta = Vector::Zero(model.learners[j].k());
  for (int m = 0; m < at; ++m)
    if (model.path[m].learner == j) theta += model.path[m].increment;
  return theta;
}

Vector predict(const FittedModel& model, const Dataset& newdata, std::optional<int> at,
               bool response_scale) {
  const int m = at.value_or(model.mstop());
  if (m < 0 || m > model.mstop())
    throw std::invalid_argument("iteration index outside the recorded path");
  const ResponseLayout layout = response_layout(newdata.response);
  Vector eta = model.offset_on(layout);
  for (size_t j = 0; j < model.learners.size(); ++j) {
    Vector theta = coefficients_at(model, static_cast<int>(j), m);
    if (theta.isZero(0.0)) continue;
    Matrix z = learner_design(model.learners[j], newdata, layout);
    if (model.learners[j].rows_are_curves && z.rows() != eta.size()) {
      // covariate-marginal design under a functional layout: replicate per time
      Matrix zl(eta.size(), z.cols());
      for (Eigen::Index o = 0; o < eta.size(); ++o) zl.row(o) = z.row(layout.curve_id[o]);
      z = std::move(zl);
    }
    eta += z * theta;
  }
  if (response_scale) {
    const Family fam = model_family(model.spec);
    for (Eigen::Index o = 0; o < eta.size(); ++o) eta[o] = fam.inverse_link(eta[o]);
  }
  return eta;
}

Vector learner_contribution(const FittedModel& model, int j, std::optional<int> at) {
  const Vector theta = coefficients_at(model, j, at.value_or(model.mstop()));
  return model.learners[j].design * theta;
}

FittedModel truncate(const FittedModel& model, int m) {
  if (m < 0) throw std::invalid_argument("truncate: negative iteration count");
  FittedModel out = model;
  const int replay = std::min(m, model.mstop());
  out.path.assign(model.path.begin(), model.path.begin() + replay);
  for (size_t j = 0; j < out.coefficients.size(); ++j)
    out.coefficients[j] = Vector::Zero(out.learners[j].k());
  if (out.data) {
    // replay the stored increments with the exact update arithmetic of fit()
    out.fitted = out.offset_on(out.layout);
    for (int i = 0; i < replay; ++i) {
      const PathEntry& e = out.path[i];
      out.coefficients[e.learner] += e.increment;
      out.fitted += out.learners[e.learner].design * e.increment;
    }
  } else {
    for (int i = 0; i < replay; ++i)
      out.coefficients[out.path[i].learner] += out.path[i].increment;
  }
  out.risk_path = model.risk_path.head(replay + 1);
  if (m > replay) boost_iterations(out, m, nullptr);
  return out;
}

FittedModel update_family(const FittedModel& model, const std::string& family) {
  if (!model.data)
    throw std::invalid_argument("update_family requires the training data; "
                                "this model was loaded without it");
  ModelSpec spec = model.spec;
  spec.family = family;
  return fit(spec, *model.data, model.curve_weights);
}

// ---------------------------------------------------------------- coef eval --

namespace {

std::vector<std::string> marginal_column_names(const BuiltBaseLearner& b) {
  std::vector<std::string> names;
  switch (b.spec.type) {
    case LearnerType::Intercept:
      names.emplace_back("(intercept)");
      break;
    case LearnerType::Ols:
    case LearnerType::OlsConstrained: {
      if (b.spec.include_intercept) names.emplace_back("(intercept)");
      size_t used = 0;
      for (const auto& v : b.spec.vars) {
        bool factor = false;
        for (const auto& l : b.factor_levels)
          if (l.rfind(v + "=", 0) == 0) {
            names.push_back(l);
            factor = true;
            ++used;
          }
        if (!factor) names.push_back(v);
      }
      (void)used;
      break;
    }
    case LearnerType::Random:
      for (const auto& l : b.factor_levels) names.push_back(b.spec.var + "=" + l);
      break;
    default:
      break;
  }
  return names;
}

bool is_constant_marginal(LearnerType t) {
  return t == LearnerType::Intercept || t == LearnerType::Ols ||
         t == LearnerType::OlsConstrained || t == LearnerType::Random;
}

Vector linspace(double lo, double hi, int n) {
  return Vector::LinSpaced(n, lo, hi);
}

/// Basis evaluation of a covariate marginal on an n-point grid; for Fpc the
/// grid is the stored observation grid.
struct MarginalEval {
  Vector grid;
  Matrix basis;  // n x K_raw
};

MarginalEval eval_marginal(const BuiltBaseLearner& b, int n) {
  MarginalEval e;
  switch (b.spec.type) {
    case LearnerType::Bbs:
    case LearnerType::BbsConstrained:
    case LearnerType::Signal:
    case LearnerType::Concurrent:
      e.grid = linspace(b.spec.basis.lower, b.spec.basis.upper, n);
      e.basis = bspline_design(e.grid, b.spec.basis);
      break;
    case LearnerType::Fpc:
      e.grid = b.modes->grid;
      e.basis = b.modes->eigenfunctions;
      break;
    default:
      throw std::logic_error("eval_marginal: not a smooth marginal");
  }
  return e;
}

}  // namespace

std::vector<CoefEval> coef_eval(const FittedModel& model, int n1, int n2) {
  std::vector<CoefEval> out;
  for (size_t j = 0; j < model.learners.size(); ++j) {
    const BuiltBaseLearner& b = model.learners[j];
    const Vector theta_raw = b.transform * model.coefficients[j];
    CoefEval e;
    e.label = b.label;
    if (b.spec.type == LearnerType::Compose) {
      const BuiltBaseLearner& left = *b.left;
      const BuiltBaseLearner& right = *b.right;
      const Vector raw =
          (b.transform.rows() == b.transform.cols() && b.transform.isIdentity(0.0))
              ? model.coefficients[j]
              : theta_raw;
      const Eigen::Index krr = right.transform.rows();
      const Eigen::Index krl = left.transform.rows();
      Eigen::Map<const Matrix, 0, Eigen::Stride<1, Eigen::Dynamic>> theta_mat(
          raw.data(), krl, krr, Eigen::Stride<1, Eigen::Dynamic>(1, krr));
      MarginalEval re = eval_marginal(right, n2);
      if (is_constant_marginal(left.spec.type)) {
        // one coefficient curve over t per left column
        const auto names = marginal_column_names(left);
        for (Eigen::Index c = 0; c < krl; ++c) {
          CoefEval ec;
          ec.label = b.label + "[" + (c < static_cast<Eigen::Index>(names.size())
                                          ? names[c]
                                          : std::to_string(c)) +
                     "]";
          ec.kind = CoefEval::Kind::Curve;
          ec.x1 = re.grid;
          ec.values = re.basis * theta_mat.row(c).transpose();
          out.push_back(std::move(ec));
        }
        continue;
      }
      MarginalEval le = eval_marginal(left, n1);
      e.kind = CoefEval::Kind::Surface;
      e.x1 = le.grid;
      e.x2 = re.grid;
      e.values = le.basis * theta_mat * re.basis.transpose();
      out.push_back(std::move(e));
      continue;
    }
    switch (b.spec.type) {
      case LearnerType::Hist: {
        const Eigen::Index kt = b.spec.basis_t.dim();
        Eigen::Map<const Matrix, 0, Eigen::Stride<1, Eigen::Dynamic>> theta_mat(
            theta_raw.data(), b.spec.basis.dim(), kt,
            Eigen::Stride<1, Eigen::Dynamic>(1, kt));
        e.kind = CoefEval::Kind::Surface;
        e.x1 = linspace(b.spec.basis.lower, b.spec.basis.upper, n1);
        e.x2 = linspace(b.spec.basis_t.lower, b.spec.basis_t.upper, n2);
        e.values = bspline_design(e.x1, b.spec.basis) * theta_mat *
                   bspline_design(e.x2, b.spec.basis_t).transpose();
        // outside the integration limits the effect never enters the model;
        // report a structural zero there instead of basis extrapolation
        for (Eigen::Index a = 0; a < e.values.rows(); ++a)
          for (Eigen::Index c = 0; c < e.values.cols(); ++c)
            if (!b.spec.limits.admits(e.x1[a], e.x2[c])) e.values(a, c) = 0.0;
        break;
      }
      case LearnerType::Bbs:
      case LearnerType::BbsConstrained:
      case LearnerType::Signal:
      case LearnerType::Concurrent:
      case LearnerType::Fpc: {
        MarginalEval me = eval_marginal(b, n1);
        e.kind = CoefEval::Kind::Curve;
        e.x1 = me.grid;
        e.values = me.basis * theta_raw;
        break;
      }
      default: {
        e.kind = CoefEval::Kind::Constant;
        e.values = theta_raw;
        break;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace fnboost
