#include "fnboost/baselearners.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace fnboost {

namespace {

constexpr double kTimeMatchTol = 1e-9;

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector row_kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index k = 0; k < a.size(); ++k)
    out.segment(k * b.size(), b.size()) = a[k] * b;
  return out;
}

}  // namespace

// ---------------------------------------------------------------- limits ----

bool LimitsFunction::admits(double s, double t) const {
  switch (kind) {
    case Kind::Historical: return s <= t + kTimeMatchTol;
    case Kind::Lag: return s >= t - delta - kTimeMatchTol && s <= t + kTimeMatchTol;
    case Kind::Lead: return s <= t - delta + kTimeMatchTol;
    case Kind::Custom: return s >= lower_fn(t) - kTimeMatchTol && s <= upper_fn(t) + kTimeMatchTol;
  }
  return false;
}

LimitsFunction LimitsFunction::historical() { return {}; }

LimitsFunction LimitsFunction::lag(double delta) {
  LimitsFunction f;
  f.kind = Kind::Lag;
  f.delta = delta;
  return f;
}

LimitsFunction LimitsFunction::lead(double delta) {
  LimitsFunction f;
  f.kind = Kind::Lead;
  f.delta = delta;
  return f;
}

LimitsFunction LimitsFunction::custom(std::function<double(double)> lower,
                                      std::function<double(double)> upper) {
  LimitsFunction f;
  f.kind = Kind::Custom;
  f.lower_fn = std::move(lower);
  f.upper_fn = std::move(upper);
  return f;
}

// --------------------------------------------------------- spec factories ----

BaseLearnerSpec intercept_spec() {
  BaseLearnerSpec s;
  s.type = LearnerType::Intercept;
  s.df = 1.0;
  return s;
}

BaseLearnerSpec ols_spec(std::vector<std::string> vars, bool constrained) {
  BaseLearnerSpec s;
  s.type = constrained ? LearnerType::OlsConstrained : LearnerType::Ols;
  s.vars = std::move(vars);
  return s;
}

BaseLearnerSpec random_spec(std::string var) {
  BaseLearnerSpec s;
  s.type = LearnerType::Random;
  s.var = std::move(var);
  s.df = 4.0;
  return s;
}

BaseLearnerSpec bbs_spec(std::string var, bool constrained) {
  BaseLearnerSpec s;
  s.type = constrained ? LearnerType::BbsConstrained : LearnerType::Bbs;
  s.var = std::move(var);
  s.basis = SplineBasis{20, 3, 0.0, 1.0};
  s.diff_order = 2;
  s.df = 4.0;
  return s;
}

BaseLearnerSpec signal_spec(std::string var) {
  BaseLearnerSpec s;
  s.type = LearnerType::Signal;
  s.var = std::move(var);
  s.basis = SplineBasis{10, 3, 0.0, 1.0};
  s.diff_order = 1;
  s.df = 4.0;
  return s;
}

BaseLearnerSpec fpc_spec(std::string var) {
  BaseLearnerSpec s;
  s.type = LearnerType::Fpc;
  s.var = std::move(var);
  return s;
}

BaseLearnerSpec concurrent_spec(std::string var) {
  BaseLearnerSpec s;
  s.type = LearnerType::Concurrent;
  s.var = std::move(var);
  s.basis = SplineBasis{20, 3, 0.0, 1.0};
  s.diff_order = 2;
  s.df = 4.0;
  return s;
}

BaseLearnerSpec hist_spec(std::string var, LimitsFunction limits) {
  BaseLearnerSpec s;
  s.type = LearnerType::Hist;
  s.var = std::move(var);
  s.basis = SplineBasis{10, 3, 0.0, 1.0};
  s.basis_t = SplineBasis{10, 3, 0.0, 1.0};
  s.diff_order = 1;
  s.limits = limits;
  s.df = 4.0;
  return s;
}

BaseLearnerSpec compose_spec(ComposeOp op, BaseLearnerSpec left, BaseLearnerSpec right) {
  BaseLearnerSpec s;
  s.type = LearnerType::Compose;
  s.op = op;
  s.left = std::make_shared<BaseLearnerSpec>(std::move(left));
  s.right = std::make_shared<BaseLearnerSpec>(std::move(right));
  return s;
}

// -------------------------------------------------------- response layout ----

ResponseLayout response_layout(const Response& response) {
  ResponseLayout layout;
  if (std::holds_alternative<Vector>(response)) {
    layout.is_scalar = true;
    layout.n_curves = static_cast<int>(std::get<Vector>(response).size());
    layout.curve_id.resize(layout.n_curves);
    for (int i = 0; i < layout.n_curves; ++i) layout.curve_id[i] = i;
    return layout;
  }
  if (std::holds_alternative<GridResponse>(response)) {
    const auto& r = std::get<GridResponse>(response);
    const int N = static_cast<int>(r.values.rows());
    const int G = static_cast<int>(r.grid.size());
    layout.is_grid = true;
    layout.n_curves = N;
    layout.time_grid = r.grid;
    layout.times.resize(static_cast<Eigen::Index>(N) * G);
    layout.curve_id.resize(static_cast<size_t>(N) * G);
    for (int g = 0; g < G; ++g)
      for (int i = 0; i < N; ++i) {
        layout.times[static_cast<Eigen::Index>(g) * N + i] = r.grid[g];
        layout.curve_id[static_cast<size_t>(g) * N + i] = i;
      }
    return layout;
  }
  const auto& r = std::get<LongResponse>(response);
  layout.n_curves = r.n_curves;
  layout.times = r.times;
  layout.curve_id = r.curve_id;
  return layout;
}

// ------------------------------------------------------------ df <-> lambda --

namespace {

/// Demmler-Reinsch reduction: df(lambda) = rank-restricted sum of 1/(1+lambda d).
struct DrSpectrum {
  Vector d;  // nonnegative, length = rank of the gram matrix
  int rank = 0;
  int null_df = 0;  // count of d ~ 0: the unpenalized directions
};

DrSpectrum dr_spectrum(const Matrix& gram, const Matrix& penalty) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("degrees-of-freedom calibration: eigendecomposition failed");
  const Vector s = eig.eigenvalues();
  const double smax = s.cwiseAbs().maxCoeff();
  const double tol = std::max(1.5e-8 * smax, 1e-13);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s[k] > tol) keep.push_back(k);
  DrSpectrum out;
  out.rank = static_cast<int>(keep.size());
  if (out.rank == 0)
    throw std::invalid_argument("degrees-of-freedom calibration: design has rank 0");
  Matrix us(gram.rows(), out.rank);
  for (int k = 0; k < out.rank; ++k)
    us.col(k) = eig.eigenvectors().col(keep[k]) / std::sqrt(s[keep[k]]);
  Matrix m = us.transpose() * penalty * us;
  Eigen::SelfAdjointEigenSolver<Matrix> eig2(m);
  out.d = eig2.eigenvalues().cwiseMax(0.0);
  const double dmax = out.d.maxCoeff();
  const double dtol = std::max(1e-10 * dmax, 1e-14);
  for (Eigen::Index k = 0; k < out.d.size(); ++k)
    if (out.d[k] <= dtol) {
      out.d[k] = 0.0;  // numerically null: keep it exactly unpenalized
      ++out.null_df;
    }
  return out;
}

double df_value(const DrSpectrum& sp, double lambda) {
  double df = 0.0;
  for (Eigen::Index k = 0; k < sp.d.size(); ++k) df += 1.0 / (1.0 + lambda * sp.d[k]);
  return df;
}

}  // namespace

double df_of_lambda(const Matrix& gram, const Matrix& penalty, double lambda) {
  return df_value(dr_spectrum(gram, penalty), lambda);
}

double df_to_lambda_gram(const Matrix& gram, const Matrix& penalty, double df_target) {
  const DrSpectrum sp = dr_spectrum(gram, penalty);
  if (df_target > sp.rank + 1e-8)
    throw std::invalid_argument("df target " + std::to_string(df_target) +
                                " exceeds design rank " + std::to_string(sp.rank));
  const double df_min = df_value(sp, kLambdaInfinite);
  if (df_target < df_min - 1e-4)
    throw std::invalid_argument("df target " + std::to_string(df_target) +
                                " below the minimum achievable " +
                                std::to_string(df_min) +
                                " (effectively unpenalized directions)");
  if (std::abs(df_target - sp.rank) < 1e-9) return 0.0;
  double lo = -10.0, hi = 12.0;
  while (df_value(sp, std::pow(10.0, hi)) > df_target + 1e-7 && hi < 16.0) hi += 2.0;
  if (df_value(sp, std::pow(10.0, hi)) > df_target - 1e-4 && hi >= 16.0)
    return kLambdaInfinite;
  while (df_value(sp, std::pow(10.0, lo)) < df_target - 1e-7 && lo > -14.0) lo -= 2.0;
  if (df_value(sp, std::pow(10.0, lo)) < df_target) return 0.0;
  for (int it = 0; it < 300 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double df = df_value(sp, std::pow(10.0, mid));
    if (std::abs(df - df_target) < 1e-10) return std::pow(10.0, mid);
    (df > df_target ? lo : hi) = mid;
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

double df_to_lambda(const Matrix& design, const Matrix& penalty, const Vector& weights,
                    double df_target) {
  if (weights.size() != design.rows())
    throw std::invalid_argument("df_to_lambda: weight/row mismatch");
  const Matrix gram = design.transpose() * weights.asDiagonal() * design;
  return df_to_lambda_gram(gram, penalty, df_target);
}

// --------------------------------------------------------------- constraint --

ConstraintResult apply_constraint(const Matrix& design, const Matrix& penalty) {
  const Eigen::Index k = design.cols();
  Vector c = design.transpose() * Vector::Ones(design.rows());
  const double scale = std::max(design.cwiseAbs().maxCoeff() * design.rows(), 1.0);
  ConstraintResult out;
  if (c.norm() < 1e-12 * scale) {
    // already centered: constraint is vacuous, keep the basis unchanged
    out.design = design;
    out.penalty = penalty;
    out.transform = Matrix::Identity(k, k);
    return out;
  }
  if (k == 1)
    throw std::invalid_argument(
        "sum-to-zero constraint would annihilate a single-column design");
  Eigen::HouseholderQR<Matrix> qr(c);
  Matrix q = qr.householderQ();
  out.transform = q.rightCols(k - 1);
  out.design = design * out.transform;
  out.penalty = out.transform.transpose() * penalty * out.transform;
  return out;
}

// ------------------------------------------------------------- design parts --

namespace {

bool is_time_marginal(const BaseLearnerSpec& spec) {
  return (spec.type == LearnerType::Bbs || spec.type == LearnerType::BbsConstrained) &&
         spec.var.empty();
}

SplineBasis resolve_range(SplineBasis basis, double lo, double hi, bool auto_range) {
  if (!auto_range) return basis;
  if (!(hi > lo)) throw std::invalid_argument("degenerate variable range for spline basis");
  basis.lower = lo;
  basis.upper = hi;
  return basis;
}

/// Dummy/numeric columns for one scalar covariate. `levels` fixes the factor
/// coding; when empty it is filled from the data (training pass).
Matrix scalar_columns(const Dataset& data, const std::string& name,
                      std::vector<std::string>& levels) {
  const ScalarCovariate& z = data.scalar(name);
  const int n = z.n();
  if (!z.is_factor) {
    if (!levels.empty())
      throw std::invalid_argument("variable '" + name + "' was a factor in training");
    return Eigen::Map<const Matrix>(z.values.data(), n, 1);
  }
  if (levels.empty()) levels = z.levels;
  Matrix d = Matrix::Zero(n, static_cast<Eigen::Index>(levels.size()));
  for (int i = 0; i < n; ++i) {
    const std::string& lab = z.levels[z.level_index[i]];
    const auto it = std::find(levels.begin(), levels.end(), lab);
    if (it == levels.end())
      throw std::invalid_argument("unseen factor level '" + lab + "' for variable '" +
                                  name + "'");
    d(i, it - levels.begin()) = 1.0;
  }
  return d;
}

Matrix ols_design(const Dataset& data, const BaseLearnerSpec& spec,
                  std::vector<std::string>& levels) {
  std::vector<Matrix> blocks;
  Eigen::Index n = 0, k = 0;
  if (spec.type == LearnerType::Random) {
    blocks.push_back(scalar_columns(data, spec.var, levels));
  } else {
    for (const auto& v : spec.vars) {
      std::vector<std::string> var_levels;
      // one shared level list per learner keeps the serialized state simple;
      // encode as "var=level" keys
      std::vector<std::string> scoped;
      for (const auto& l : levels)
        if (l.rfind(v + "=", 0) == 0) scoped.push_back(l.substr(v.size() + 1));
      Matrix cols = scalar_columns(data, v, scoped);
      if (data.scalar(v).is_factor && std::none_of(levels.begin(), levels.end(),
                                                   [&](const std::string& l) {
                                                     return l.rfind(v + "=", 0) == 0;
                                                   }))
        for (const auto& l : scoped) levels.push_back(v + "=" + l);
      blocks.push_back(std::move(cols));
    }
  }
  for (const auto& b : blocks) {
    n = b.rows();
    k += b.cols();
  }
  const bool with_intercept = spec.type != LearnerType::Random && spec.include_intercept;
  Matrix d(n, k + (with_intercept ? 1 : 0));
  Eigen::Index col = 0;
  if (with_intercept) {
    d.col(0).setOnes();
    col = 1;
  }
  for (const auto& b : blocks) {
    d.middleCols(col, b.cols()) = b;
    col += b.cols();
  }
  return d;
}

Matrix signal_design(const FunctionalCovariate& x, const SplineBasis& basis,
                     IntScheme scheme) {
  const Vector delta = integration_weights(x.grid, scheme).weights;
  const Matrix phi = bspline_design(x.grid, basis);
  return (x.values * delta.asDiagonal()) * phi;
}

Matrix concurrent_design(const FunctionalCovariate& x, const SplineBasis& basis,
                         const ResponseLayout& layout) {
  const int n = layout.n();
  Matrix d(n, basis.dim());
  const double span = x.grid[x.grid.size() - 1] - x.grid[0];
  for (int o = 0; o < n; ++o) {
    const double t = layout.times[o];
    Eigen::Index r = -1;
    for (Eigen::Index j = 0; j < x.grid.size(); ++j)
      if (std::abs(x.grid[j] - t) <= kTimeMatchTol * std::max(span, 1.0)) {
        r = j;
        break;
      }
    if (r < 0)
      throw std::invalid_argument("concurrent effect: covariate '" + x.name +
                                  "' is not observed at response time " +
                                  std::to_string(t));
    const Vector tv = Vector::Constant(1, t);
    d.row(o) = x.values(layout.curve_id[o], r) * bspline_design(tv, basis).row(0);
  }
  return d;
}

Matrix hist_design(const FunctionalCovariate& x, const BaseLearnerSpec& spec,
                   const SplineBasis& basis_s, const SplineBasis& basis_t,
                   const ResponseLayout& layout, const std::string& label) {
  const Eigen::Index r_len = x.grid.size();
  const Vector delta = integration_weights(x.grid, spec.int_scheme).weights;
  const Matrix phi_s = bspline_design(x.grid, basis_s);
  double min_cell = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 1; r < r_len; ++r)
    min_cell = std::min(min_cell, x.grid[r] - x.grid[r - 1]);

  // cache window weights and the t-basis row per distinct response time
  std::vector<double> distinct;
  std::vector<int> time_index(layout.n());
  for (int o = 0; o < layout.n(); ++o) {
    const double t = layout.times[o];
    int idx = -1;
    for (size_t u = 0; u < distinct.size(); ++u)
      if (std::abs(distinct[u] - t) <= kTimeMatchTol) {
        idx = static_cast<int>(u);
        break;
      }
    if (idx < 0) {
      idx = static_cast<int>(distinct.size());
      distinct.push_back(t);
    }
    time_index[o] = idx;
  }
  Matrix srow(static_cast<Eigen::Index>(distinct.size()), r_len);  // window weights
  Vector tvals = Eigen::Map<const Vector>(distinct.data(), distinct.size());
  const Matrix psi_t = bspline_design(tvals, basis_t);
  bool warned = false;
  for (size_t u = 0; u < distinct.size(); ++u) {
    double window = 0.0;
    for (Eigen::Index r = 0; r < r_len; ++r) {
      const bool in = spec.limits.admits(x.grid[r], distinct[u]);
      srow(u, r) = in ? delta[r] : 0.0;
      if (in) window += delta[r];
    }
    if (window == 0.0 && !warned) {
      std::cerr << "warning: " << label << ": empty integration window at t = "
                << distinct[u] << "; contribution is zero there\n";
      warned = true;
    }
    if (spec.standardize == HistStandardize::Length && window > 0.0)
      srow.row(u) /= std::max(window, min_cell);
  }

  const int ks = basis_s.dim(), kt = basis_t.dim();
  Matrix d(layout.n(), static_cast<Eigen::Index>(ks) * kt);
  for (int o = 0; o < layout.n(); ++o) {
    const int u = time_index[o];
    const Vector s_part =
        phi_s.transpose() * x.values.row(layout.curve_id[o]).transpose().cwiseProduct(
                                srow.row(u).transpose());
    d.row(o) = row_kron(s_part, psi_t.row(u).transpose());
  }
  return d;
}

Matrix expand_to_long(const Matrix& per_curve, const ResponseLayout& layout) {
  Matrix out(layout.n(), per_curve.cols());
  for (int o = 0; o < layout.n(); ++o) out.row(o) = per_curve.row(layout.curve_id[o]);
  return out;
}

std::string default_label(const BaseLearnerSpec& spec);

std::string compose_op_label(ComposeOp op) {
  switch (op) {
    case ComposeOp::Kronecker: return "%O%";
    case ComposeOp::KroneckerTOnly: return "%A0%";
    case ComposeOp::RowTensor: return "%X%";
    case ComposeOp::RowTensorConstrained: return "%Xc%";
  }
  return "%?%";
}

std::string default_label(const BaseLearnerSpec& spec) {
  if (!spec.label.empty()) return spec.label;
  switch (spec.type) {
    case LearnerType::Intercept: return "intercept";
    case LearnerType::Ols:
    case LearnerType::OlsConstrained: {
      std::string vars;
      for (size_t i = 0; i < spec.vars.size(); ++i)
        vars += (i ? "," : "") + spec.vars[i];
      return (spec.type == LearnerType::Ols ? "bols(" : "bolsc(") + vars + ")";
    }
    case LearnerType::Random: return "brandom(" + spec.var + ")";
    case LearnerType::Bbs:
      return "bbs(" + (spec.var.empty() ? std::string("t") : spec.var) + ")";
    case LearnerType::BbsConstrained:
      return "bbsc(" + (spec.var.empty() ? std::string("t") : spec.var) + ")";
    case LearnerType::Signal: return "bsignal(" + spec.var + ")";
    case LearnerType::Fpc: return "bfpc(" + spec.var + ")";
    case LearnerType::Concurrent: return "bconcurrent(" + spec.var + ")";
    case LearnerType::Hist: return "bhist(" + spec.var + ")";
    case LearnerType::Compose:
      return default_label(*spec.left) + " " + compose_op_label(spec.op) + " " +
             default_label(*spec.right);
  }
  return "learner";
}

/// Build the design/penalty of one non-composed term without calibrating
/// lambda. Covariate-marginal designs have one row per curve.
BuiltBaseLearner build_marginal(const BaseLearnerSpec& spec, const Dataset& data,
                                const ResponseLayout& layout) {
  BuiltBaseLearner b;
  b.spec = spec;
  b.label = default_label(spec);
  b.spec.label = b.label;
  const int n_curves = layout.n_curves;

  switch (spec.type) {
    case LearnerType::Intercept: {
      b.design = Matrix::Ones(n_curves, 1);
      b.penalty = Matrix::Zero(1, 1);
      break;
    }
    case LearnerType::Ols:
    case LearnerType::OlsConstrained:
    case LearnerType::Random: {
      b.design = ols_design(data, spec, b.factor_levels);
      if (spec.type == LearnerType::Random)
        b.penalty = Matrix::Identity(b.design.cols(), b.design.cols());
      else
        b.penalty = Matrix::Zero(b.design.cols(), b.design.cols());
      if (spec.type == LearnerType::OlsConstrained) {
        ConstraintResult c = apply_constraint(b.design, b.penalty);
        b.design = c.design;
        b.penalty = c.penalty;
        b.transform = c.transform;
      }
      break;
    }
    case LearnerType::Bbs:
    case LearnerType::BbsConstrained: {
      Vector values;
      if (is_time_marginal(spec)) {
        values = layout.is_grid ? layout.time_grid : layout.times;
        if (values.size() == 0)
          throw std::invalid_argument("time-marginal smooth requires a functional response");
      } else {
        const ScalarCovariate& z = data.scalar(spec.var);
        if (z.is_factor)
          throw std::invalid_argument("bbs(" + spec.var + "): variable is a factor");
        values = z.values;
      }
      b.spec.basis = resolve_range(spec.basis, values.minCoeff(), values.maxCoeff(),
                                   spec.auto_range);
      b.spec.auto_range = false;
      b.design = bspline_design(values, b.spec.basis);
      b.penalty = difference_penalty(b.spec.basis.dim(), spec.diff_order);
      if (spec.type == LearnerType::BbsConstrained) {
        ConstraintResult c = apply_constraint(b.design, b.penalty);
        b.design = c.design;
        b.penalty = c.penalty;
        b.transform = c.transform;
      }
      b.rows_are_curves = !is_time_marginal(spec);
      break;
    }
    case LearnerType::Signal: {
      const FunctionalCovariate& x = data.functional(spec.var);
      b.spec.basis = resolve_range(spec.basis, x.grid[0], x.grid[x.grid.size() - 1],
                                   spec.auto_range);
      b.spec.auto_range = false;
      b.design = signal_design(x, b.spec.basis, spec.int_scheme);
      b.penalty = difference_penalty(b.spec.basis.dim(), spec.diff_order);
      break;
    }
    case LearnerType::Fpc: {
      const FunctionalCovariate& x = data.functional(spec.var);
      b.modes = fpca(x, spec.pve, spec.npc);
      b.design = b.modes->scores;
      b.penalty = Matrix::Identity(b.design.cols(), b.design.cols());
      break;
    }
    case LearnerType::Concurrent: {
      const FunctionalCovariate& x = data.functional(spec.var);
      if (layout.times.size() == 0)
        throw std::invalid_argument(b.label + ": requires a functional response");
      b.spec.basis = resolve_range(spec.basis, layout.times.minCoeff(),
                                   layout.times.maxCoeff(), spec.auto_range);
      b.spec.auto_range = false;
      b.design = concurrent_design(x, b.spec.basis, layout);
      b.penalty = difference_penalty(b.spec.basis.dim(), spec.diff_order);
      b.rows_are_curves = false;
      break;
    }
    case LearnerType::Hist: {
      const FunctionalCovariate& x = data.functional(spec.var);
      if (layout.times.size() == 0)
        throw std::invalid_argument(b.label + ": requires a functional response");
      b.spec.basis = resolve_range(spec.basis, x.grid[0], x.grid[x.grid.size() - 1],
                                   spec.auto_range);
      b.spec.basis_t = resolve_range(spec.basis_t, layout.times.minCoeff(),
                                     layout.times.maxCoeff(), spec.auto_range);
      b.spec.auto_range = false;
      b.design = hist_design(x, spec, b.spec.basis, b.spec.basis_t, layout, b.label);
      const int ks = b.spec.basis.dim(), kt = b.spec.basis_t.dim();
      b.penalty = kronecker(difference_penalty(ks, spec.diff_order),
                            Matrix::Identity(kt, kt)) +
                  kronecker(Matrix::Identity(ks, ks),
                            difference_penalty(kt, spec.diff_order));
      b.rows_are_curves = false;
      break;
    }
    case LearnerType::Compose:
      throw std::logic_error("build_marginal called on a composed spec");
  }
  if (b.transform.size() == 0)
    b.transform = Matrix::Identity(b.design.cols(), b.design.cols());
  return b;
}

double marginal_df(const BuiltBaseLearner& b) {
  if (b.spec.df) return *b.spec.df;
  return static_cast<double>(b.design.cols());
}

}  // namespace

// --------------------------------------------------------------- builders ----

BuiltBaseLearner build_learner(const BaseLearnerSpec& spec, const Dataset& data,
                               const ResponseLayout& layout, const Vector& obs_weights) {
  BuiltBaseLearner b;
  if (spec.df && spec.lambda)
    throw std::invalid_argument(default_label(spec) +
                                ": specify either df or lambda, not both");
  if (spec.type == LearnerType::Compose) {
    b.spec = spec;
    b.label = spec.label.empty() ? default_label(spec) : spec.label;
    b.spec.label = b.label;
    auto left = std::make_shared<BuiltBaseLearner>(build_marginal(*spec.left, data, layout));
    auto right = std::make_shared<BuiltBaseLearner>(build_marginal(*spec.right, data, layout));
    if (spec.op == ComposeOp::RowTensorConstrained && left->transform.isIdentity(1e-12)) {
      ConstraintResult c = apply_constraint(left->design, left->penalty);
      left->design = c.design;
      left->penalty = c.penalty;
      left->transform = c.transform;
    }
    const int kl = left->k(), kr = right->k();
    if (spec.op == ComposeOp::KroneckerTOnly) {
      const double dfl = marginal_df(*left);
      if (std::abs(dfl - kl) > 1e-9)
        throw std::invalid_argument(
            b.label + ": the number of degrees of freedom in the first base-learner "
                      "has to be equal to the number of its columns");
      b.penalty = kronecker(Matrix::Identity(kl, kl), right->penalty);
    } else {
      b.penalty = kronecker(left->penalty, Matrix::Identity(kr, kr)) +
                  kronecker(Matrix::Identity(kl, kl), right->penalty);
    }
    // dense long-format design: row o pairs curve i(o) with time t(o)
    const Matrix l_long =
        left->rows_are_curves ? expand_to_long(left->design, layout) : left->design;
    Matrix r_long;
    if (right->rows_are_curves) {
      r_long = expand_to_long(right->design, layout);
    } else if (layout.is_grid && right->design.rows() == layout.time_grid.size()) {
      r_long.resize(layout.n(), kr);
      const int n_curves = layout.n_curves;
      for (int o = 0; o < layout.n(); ++o) r_long.row(o) = right->design.row(o / n_curves);
    } else {
      r_long = right->design;
    }
    if (l_long.rows() != r_long.rows())
      throw std::invalid_argument(b.label + ": marginal designs disagree on row count");
    b.design.resize(l_long.rows(), static_cast<Eigen::Index>(kl) * kr);
    for (Eigen::Index o = 0; o < l_long.rows(); ++o)
      b.design.row(o) = row_kron(l_long.row(o).transpose(), r_long.row(o).transpose());
    b.transform = kronecker(left->transform, right->transform);
    b.spec.left = std::make_shared<BaseLearnerSpec>(left->spec);   // resolved ranges
    b.spec.right = std::make_shared<BaseLearnerSpec>(right->spec);
    b.left = left;
    b.right = right;
    b.rows_are_curves = false;
    if (!spec.df && !spec.lambda) b.spec.df = marginal_df(*left) * marginal_df(*right);
  } else {
    b = build_marginal(spec, data, layout);
  }

  if (b.design.rows() != obs_weights.size())
    throw std::invalid_argument(b.label + ": weight vector length " +
                                std::to_string(obs_weights.size()) +
                                " does not match design rows " +
                                std::to_string(b.design.rows()));
  const Matrix gram = b.design.transpose() * obs_weights.asDiagonal() * b.design;
  try {
    if (b.spec.lambda) {
      b.lambda = *b.spec.lambda;
      b.df = df_of_lambda(gram, b.penalty, b.lambda);
    } else if (b.spec.df) {
      b.df = *b.spec.df;
      b.lambda = df_to_lambda_gram(gram, b.penalty, b.df);
    } else {
      b.lambda = 0.0;
      b.df = df_of_lambda(gram, b.penalty, 0.0);
      b.spec.df = b.df;
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument(b.label + ": " + e.what());
  }
  return b;
}

Matrix learner_design(const BuiltBaseLearner& b, const Dataset& data,
                      const ResponseLayout& layout) {
  const BaseLearnerSpec& spec = b.spec;
  switch (spec.type) {
    case LearnerType::Intercept:
      return Matrix::Ones(layout.n_curves, 1);
    case LearnerType::Ols:
    case LearnerType::OlsConstrained:
    case LearnerType::Random: {
      std::vector<std::string> levels = b.factor_levels;
      Matrix d = ols_design(data, spec, levels);
      return d * b.transform;
    }
    case LearnerType::Bbs:
    case LearnerType::BbsConstrained: {
      Vector values;
      if (is_time_marginal(spec))
        values = layout.is_grid ? layout.time_grid : layout.times;
      else
        values = data.scalar(spec.var).values;
      return bspline_design(values, spec.basis) * b.transform;
    }
    case LearnerType::Signal:
      return signal_design(data.functional(spec.var), spec.basis, spec.int_scheme) *
             b.transform;
    case LearnerType::Fpc: {
      const FunctionalCovariate& x = data.functional(spec.var);
      Matrix centered = x.values.rowwise() - b.modes->mean.transpose();
      return fpca_scores(*b.modes, centered) * b.transform;
    }
    case LearnerType::Concurrent:
      return concurrent_design(data.functional(spec.var), spec.basis, layout) *
             b.transform;
    case LearnerType::Hist:
      return hist_design(data.functional(spec.var), spec, spec.basis, spec.basis_t,
                         layout, b.label) *
             b.transform;
    case LearnerType::Compose: {
      Matrix l = learner_design(*b.left, data, layout);
      if (b.left->rows_are_curves) l = expand_to_long(l, layout);
      Matrix r = learner_design(*b.right, data, layout);
      if (b.right->rows_are_curves) {
        r = expand_to_long(r, layout);
      } else if (is_time_marginal(b.right->spec)) {
        // time marginal evaluates on the stacked observation times
        r = bspline_design(layout.times, b.right->spec.basis) * b.right->transform;
      }
      if (l.rows() != r.rows())
        throw std::invalid_argument(b.label + ": marginal designs disagree on row count");
      Matrix d(l.rows(), l.cols() * r.cols());
      for (Eigen::Index o = 0; o < l.rows(); ++o)
        d.row(o) = row_kron(l.row(o).transpose(), r.row(o).transpose());
      return d;
    }
  }
  throw std::logic_error("learner_design: unhandled learner type");
}

}  // namespace fnboost
