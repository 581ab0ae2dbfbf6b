#include "fnboost/resampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace fnboost {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 step keyed by the stream index
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

void run_parallel(int n_tasks, int jobs, const std::function<void(int)>& task) {
  jobs = std::max(1, std::min(jobs, n_tasks));
  if (jobs == 1) {
    for (int i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

FoldMatrix make_folds(int n_curves, FoldMatrix::Type type, int B, std::uint64_t seed,
                      const std::vector<int>& grouping) {
  if (n_curves < 2) throw std::invalid_argument("make_folds: need at least 2 curves");
  if (!grouping.empty() && static_cast<int>(grouping.size()) != n_curves)
    throw std::invalid_argument("make_folds: grouping length mismatch");
  FoldMatrix f;
  f.type = type;
  f.grouping = grouping;
  int n_units = n_curves;
  std::vector<int> unit_of(n_curves);
  if (grouping.empty()) {
    std::iota(unit_of.begin(), unit_of.end(), 0);
  } else {
    unit_of = grouping;
    n_units = *std::max_element(grouping.begin(), grouping.end()) + 1;
  }
  f.n_units = n_units;

  std::mt19937_64 rng(seed);
  Eigen::MatrixXi unit_w;
  switch (type) {
    case FoldMatrix::Type::Kfold: {
      if (B < 2) throw std::invalid_argument("make_folds: kfold needs B >= 2");
      if (B > n_units)
        throw std::invalid_argument("make_folds: more folds than independent units");
      std::vector<int> assign(n_units);
      for (int u = 0; u < n_units; ++u) assign[u] = u % B;
      std::shuffle(assign.begin(), assign.end(), rng);
      unit_w = Eigen::MatrixXi::Ones(n_units, B);
      for (int u = 0; u < n_units; ++u) unit_w(u, assign[u]) = 0;
      break;
    }
    case FoldMatrix::Type::Bootstrap: {
      if (B < 1) throw std::invalid_argument("make_folds: B must be positive");
      unit_w = Eigen::MatrixXi::Zero(n_units, B);
      std::uniform_int_distribution<int> pick(0, n_units - 1);
      for (int b = 0; b < B; ++b)
        for (int draw = 0; draw < n_units; ++draw) ++unit_w(pick(rng), b);
      break;
    }
    case FoldMatrix::Type::Subsampling: {
      if (B < 1) throw std::invalid_argument("make_folds: B must be positive");
      const int half = n_units / 2;
      unit_w = Eigen::MatrixXi::Zero(n_units, B);
      std::vector<int> order(n_units);
      std::iota(order.begin(), order.end(), 0);
      for (int b = 0; b < B; ++b) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int k = 0; k < half; ++k) unit_w(order[k], b) = 1;
      }
      break;
    }
  }
  f.weights.resize(n_curves, unit_w.cols());
  for (int i = 0; i < n_curves; ++i) f.weights.row(i) = unit_w.row(unit_of[i]);
  return f;
}

Dataset subset_curves(const Dataset& data, const std::vector<int>& multiplicity) {
  const int n = static_cast<int>(multiplicity.size());
  if (n != data.n_curves())
    throw std::invalid_argument("subset_curves: multiplicity length " +
                                std::to_string(n) + " does not match " +
                                std::to_string(data.n_curves()) + " curves");
  std::vector<int> rows;  // resampled curve order: curve i repeated m_i times
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < multiplicity[i]; ++r) rows.push_back(i);
  if (rows.empty()) throw std::invalid_argument("subset_curves: empty selection");

  Dataset out;
  for (const auto& z : data.scalars) {
    ScalarCovariate s;
    s.name = z.name;
    s.is_factor = z.is_factor;
    if (z.is_factor) {
      s.levels = z.levels;
      for (int i : rows) s.level_index.push_back(z.level_index[i]);
    } else {
      s.values.resize(rows.size());
      for (size_t k = 0; k < rows.size(); ++k) s.values[k] = z.values[rows[k]];
    }
    out.scalars.push_back(std::move(s));
  }
  for (const auto& x : data.functionals) {
    FunctionalCovariate f;
    f.name = x.name;
    f.grid = x.grid;
    f.values.resize(rows.size(), x.values.cols());
    for (size_t k = 0; k < rows.size(); ++k) f.values.row(k) = x.values.row(rows[k]);
    out.functionals.push_back(std::move(f));
  }
  if (std::holds_alternative<Vector>(data.response)) {
    const auto& y = std::get<Vector>(data.response);
    Vector v(rows.size());
    for (size_t k = 0; k < rows.size(); ++k) v[k] = y[rows[k]];
    out.response = v;
  } else if (std::holds_alternative<GridResponse>(data.response)) {
    const auto& y = std::get<GridResponse>(data.response);
    GridResponse g;
    g.grid = y.grid;
    g.values.resize(rows.size(), y.values.cols());
    for (size_t k = 0; k < rows.size(); ++k) g.values.row(k) = y.values.row(rows[k]);
    out.response = std::move(g);
  } else {
    const auto& y = std::get<LongResponse>(data.response);
    std::vector<std::vector<int>> per_curve(y.n_curves);
    for (Eigen::Index o = 0; o < y.values.size(); ++o)
      per_curve[y.curve_id[o]].push_back(static_cast<int>(o));
    LongResponse l;
    l.n_curves = static_cast<int>(rows.size());
    for (size_t k = 0; k < rows.size(); ++k)
      for (int o : per_curve[rows[k]]) {
        l.values.conservativeResize(l.values.size() + 1);
        l.times.conservativeResize(l.times.size() + 1);
        l.values[l.values.size() - 1] = y.values[o];
        l.times[l.times.size() - 1] = y.times[o];
        l.curve_id.push_back(static_cast<int>(k));
      }
    out.response = std::move(l);
  }
  return out;
}

namespace {

/// Replay a fitted path on held-out data, collecting risk at the grid points.
Vector replay_oob_risk(const FittedModel& model, const Dataset& oob,
                       const std::vector<int>& grid, const Family& fam,
                       IntScheme num_int) {
  const ResponseLayout layout = response_layout(oob.response);
  Vector y;
  if (std::holds_alternative<Vector>(oob.response))
    y = std::get<Vector>(oob.response);
  else if (std::holds_alternative<GridResponse>(oob.response))
    y = grid_to_long(std::get<GridResponse>(oob.response)).values;
  else
    y = std::get<LongResponse>(oob.response).values;
  const Vector w = response_integration_weights(oob.response, num_int);

  std::vector<Matrix> designs(model.learners.size());
  for (size_t j = 0; j < model.learners.size(); ++j) {
    Matrix z = learner_design(model.learners[j], oob, layout);
    if (model.learners[j].rows_are_curves && z.rows() != y.size()) {
      Matrix zl(y.size(), z.cols());
      for (Eigen::Index o = 0; o < y.size(); ++o) zl.row(o) = z.row(layout.curve_id[o]);
      z = std::move(zl);
    }
    designs[j] = std::move(z);
  }
  Vector eta = model.offset_on(layout);
  Vector risks(grid.size());
  size_t gi = 0;
  const double n_oob = layout.n_curves;
  auto record = [&](int m) {
    while (gi < grid.size() && grid[gi] == m) {
      risks[gi] = integrated_risk(fam, w, y, eta) / n_oob;
      ++gi;
    }
  };
  record(0);
  for (int m = 1; m <= model.mstop() && gi < grid.size(); ++m) {
    const PathEntry& e = model.path[m - 1];
    eta += designs[e.learner] * e.increment;
    record(m);
  }
  return risks;
}

struct OobObserver : FitObserver {
  const Vector* y = nullptr;
  const Vector* w_int = nullptr;
  const std::vector<int>* curve_id = nullptr;
  std::vector<char> oob;  // per curve
  const std::vector<int>* grid = nullptr;
  const Family* fam = nullptr;
  double n_oob = 0.0;
  Vector risks;
  size_t gi = 0;

  void after_iteration(int m, const Vector& fitted) override {
    while (gi < grid->size() && (*grid)[gi] == m) {
      double r = 0.0;
      for (Eigen::Index o = 0; o < y->size(); ++o)
        if (oob[(*curve_id)[o]])
          r += (*w_int)[o] * fam->loss((*y)[o], fitted[o]);
      risks[gi] = r / n_oob;
      ++gi;
    }
  }
};

}  // namespace

CvResult oob_risk_curves(const ModelSpec& spec, const Dataset& data,
                         const FoldMatrix& folds, const std::vector<int>& grid,
                         CvMode mode, int jobs) {
  if (grid.empty()) throw std::invalid_argument("oob_risk_curves: empty iteration grid");
  std::vector<int> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  if (sorted_grid.front() < 0)
    throw std::invalid_argument("oob_risk_curves: negative iteration in grid");
  const int B = static_cast<int>(folds.weights.cols());
  const int n = static_cast<int>(folds.weights.rows());
  const ResponseLayout layout = response_layout(data.response);
  if (n != layout.n_curves)
    throw std::invalid_argument("oob_risk_curves: fold matrix does not match curve count");
  for (int b = 0; b < B; ++b)
    if ((folds.weights.col(b).array() > 0).all())
      throw std::invalid_argument("fold " + std::to_string(b + 1) +
                                  " has an empty out-of-bag set");

  ModelSpec run_spec = spec;
  run_spec.control.mstop = sorted_grid.back();
  const Family fam = family_from_name(spec.family);

  FittedModel preproc;
  if (mode == CvMode::FixedPreprocessing) {
    ModelSpec s0 = spec;
    s0.control.mstop = 0;
    preproc = fit(s0, data);
  }
  CvResult out;
  out.grid = sorted_grid;
  out.risk.resize(B, static_cast<Eigen::Index>(sorted_grid.size()));

  run_parallel(B, jobs, [&](int b) {
    std::vector<int> mult(n);
    for (int i = 0; i < n; ++i) mult[i] = folds.weights(i, b);
    if (mode == CvMode::RefitAll) {
      Dataset inbag = subset_curves(data, mult);
      std::vector<int> oob_mult(n, 0);
      for (int i = 0; i < n; ++i) oob_mult[i] = mult[i] == 0 ? 1 : 0;
      Dataset oob = subset_curves(data, oob_mult);
      FittedModel m;
      try {
        m = fit(run_spec, inbag);
      } catch (const std::exception& e) {
        throw std::runtime_error("fold " + std::to_string(b + 1) + ": " + e.what());
      }
      out.risk.row(b) = replay_oob_risk(m, oob, sorted_grid, fam, spec.num_int);
    } else {
      Vector cw(n);
      int n_oob = 0;
      for (int i = 0; i < n; ++i) {
        cw[i] = mult[i];
        if (mult[i] == 0) ++n_oob;
      }
      OobObserver obs;
      obs.oob.resize(n);
      for (int i = 0; i < n; ++i) obs.oob[i] = mult[i] == 0;
      obs.grid = &sorted_grid;
      obs.fam = &fam;
      obs.n_oob = n_oob;
      obs.risks.resize(sorted_grid.size());
      const Vector y_long = preproc.y_long;
      const Vector w_int = response_integration_weights(data.response, spec.num_int);
      obs.y = &y_long;
      obs.w_int = &w_int;
      obs.curve_id = &preproc.layout.curve_id;
      try {
        fit(run_spec, data, cw, &obs, &preproc);
      } catch (const std::exception& e) {
        throw std::runtime_error("fold " + std::to_string(b + 1) + ": " + e.what());
      }
      out.risk.row(b) = obs.risks;
    }
  });

  Vector mean = out.risk.colwise().mean();
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < mean.size(); ++k)
    if (mean[k] < mean[best]) best = k;
  out.mstop_opt = sorted_grid[best];
  out.boundary = out.mstop_opt == sorted_grid.back();
  return out;
}

BootstrapCiResult bootstrap_ci(const ModelSpec& spec, const Dataset& data, int B_outer,
                               int B_inner, const std::vector<int>& grid,
                               const std::vector<double>& quantiles, std::uint64_t seed,
                               FoldMatrix::Type inner_type, int jobs, int n1, int n2) {
  if (B_outer < 2 || B_inner < 2)
    throw std::invalid_argument("bootstrap_ci: need at least 2 folds at each level");
  const ResponseLayout layout = response_layout(data.response);

  // resolve variable-dependent basis ranges once, on the full data, so every
  // fold's coefficients are evaluated on a common grid
  ModelSpec resolved = spec;
  {
    ModelSpec s0 = spec;
    s0.control.mstop = 0;
    FittedModel full0 = fit(s0, data);
    resolved.formula.clear();
    for (const auto& b : full0.learners) resolved.formula.push_back(b.spec);
    resolved.timeformula.reset();  // already folded into the composed specs
  }

  FoldMatrix outer = make_folds(layout.n_curves, FoldMatrix::Type::Bootstrap, B_outer,
                                derive_seed(seed, 0));
  BootstrapCiResult out;
  out.fold_estimates.resize(B_outer);
  out.selected_mstop.resize(B_outer);

  run_parallel(B_outer, jobs, [&](int b) {
    std::vector<int> mult(layout.n_curves);
    for (int i = 0; i < layout.n_curves; ++i) mult[i] = outer.weights(i, b);
    Dataset fold_data = subset_curves(data, mult);
    try {
      const ResponseLayout fold_layout = response_layout(fold_data.response);
      FoldMatrix inner = make_folds(fold_layout.n_curves, inner_type, B_inner,
                                    derive_seed(seed, 1 + b));
      CvResult cv =
          oob_risk_curves(resolved, fold_data, inner, grid, CvMode::RefitAll, 1);
      ModelSpec fold_spec = resolved;
      fold_spec.control.mstop = cv.mstop_opt;
      FittedModel m = fit(fold_spec, fold_data);
      out.fold_estimates[b] = coef_eval(m, n1, n2);
      out.selected_mstop[b] = cv.mstop_opt;
    } catch (const std::exception& e) {
      throw std::runtime_error("outer fold " + std::to_string(b + 1) + ": " + e.what());
    }
  });

  // pointwise quantile bands across folds, per coefficient entry
  const size_t n_entries = out.fold_estimates[0].size();
  for (size_t e = 0; e < n_entries; ++e) {
    const CoefEval& ref = out.fold_estimates[0][e];
    BootstrapBand band;
    band.label = ref.label;
    band.kind = ref.kind;
    band.x1 = ref.x1;
    band.x2 = ref.x2;
    band.quantiles = quantiles;
    for (double q : quantiles) {
      Matrix vals(ref.values.rows(), ref.values.cols());
      std::vector<double> samples(B_outer);
      for (Eigen::Index r = 0; r < vals.rows(); ++r)
        for (Eigen::Index c = 0; c < vals.cols(); ++c) {
          for (int b = 0; b < B_outer; ++b)
            samples[b] = out.fold_estimates[b][e].values(r, c);
          std::sort(samples.begin(), samples.end());
          const double pos = q * (B_outer - 1);
          const int lo = static_cast<int>(std::floor(pos));
          const int hi = std::min(lo + 1, B_outer - 1);
          vals(r, c) = samples[lo] + (pos - lo) * (samples[hi] - samples[lo]);
        }
      band.values.push_back(std::move(vals));
    }
    out.bands.push_back(std::move(band));
  }
  return out;
}

}  // namespace fnboost
