#include "fnboost/gamlss.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fnboost {

LssFamily gaussian_lss() {
  LssFamily f;
  f.name = "gaussian_lss";
  f.parameters = {"mu", "sigma"};
  f.loss = [](double y, const std::vector<double>& eta) {
    const double r = y - eta[0];
    return eta[1] + 0.5 * r * r * std::exp(-2.0 * eta[1]);
  };
  f.gradients = {
      [](double y, const std::vector<double>& eta) {
        return (y - eta[0]) * std::exp(-2.0 * eta[1]);
      },
      [](double y, const std::vector<double>& eta) {
        const double r = y - eta[0];
        return r * r * std::exp(-2.0 * eta[1]) - 1.0;
      },
  };
  f.offsets = {
      [](const Vector& y) { return y.mean(); },
      [](const Vector& y) {
        const double m = y.mean();
        const double var = (y.array() - m).square().sum() /
                           std::max<double>(y.size() - 1, 1);
        return 0.5 * std::log(std::max(var, 1e-12));
      },
  };
  f.inverse_links = {
      [](double eta) { return eta; },
      [](double eta) { return std::exp(eta); },
  };
  return f;
}

LssFittedModel fit_lss(const std::vector<std::vector<BaseLearnerSpec>>& formulas,
                       const LssFamily& family, const Dataset& data,
                       const Control& control) {
  const int p = static_cast<int>(family.parameters.size());
  if (static_cast<int>(formulas.size()) != p)
    throw std::invalid_argument("fit_lss: one learner list per distribution parameter");
  for (const auto& fl : formulas)
    if (fl.empty())
      throw std::invalid_argument("fit_lss: every parameter needs at least one learner");
  data.validate();
  const ResponseLayout layout = response_layout(data.response);

  Vector y;
  if (std::holds_alternative<Vector>(data.response))
    y = std::get<Vector>(data.response);
  else if (std::holds_alternative<GridResponse>(data.response))
    y = grid_to_long(std::get<GridResponse>(data.response)).values;
  else
    y = std::get<LongResponse>(data.response).values;
  const Eigen::Index n = y.size();
  const Vector w = Vector::Ones(n);  // multi-parameter fits use unit weights

  const double nu = control.nu.value_or(family.default_nu);
  if (!(nu > 0.0 && nu <= 1.0))
    throw std::invalid_argument("step length nu must lie in (0,1]");

  LssFittedModel model;
  model.family = family;
  model.learners.resize(p);
  model.coefficients.resize(p);
  model.offsets.resize(p);
  model.eta.resize(p);
  for (int q = 0; q < p; ++q) {
    for (const auto& spec : formulas[q]) {
      BuiltBaseLearner b = build_learner(spec, data, layout, w);
      if (b.design.rows() != n)
        throw std::invalid_argument(b.label + ": design rows do not match observations");
      model.coefficients[q].push_back(Vector::Zero(b.k()));
      model.learners[q].push_back(std::move(b));
    }
    model.offsets[q] = family.offsets[q](y);
    model.eta[q] = Vector::Constant(n, model.offsets[q]);
  }

  auto joint_loss = [&](const std::vector<Vector>& eta) {
    double l = 0.0;
    std::vector<double> e(p);
    for (Eigen::Index o = 0; o < n; ++o) {
      for (int q = 0; q < p; ++q) e[q] = eta[q][o];
      l += family.loss(y[o], e);
    }
    return l;
  };

  // per-learner frozen solvers
  std::vector<std::vector<Eigen::LDLT<Matrix>>> solvers(p);
  for (int q = 0; q < p; ++q)
    for (const auto& b : model.learners[q]) {
      Matrix a = b.design.transpose() * b.design + b.lambda * b.penalty;
      Eigen::LDLT<Matrix> ldlt(a);
      if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("singular penalized normal equations for learner '" +
                                 b.label + "'");
      solvers[q].push_back(std::move(ldlt));
    }

  model.risk_path.resize(control.mstop + 1);
  model.risk_path[0] = joint_loss(model.eta);

  std::vector<double> e(p);
  for (int m = 1; m <= control.mstop; ++m) {
    // partial gradients at the current predictors
    std::vector<Vector> grads(p, Vector(n));
    for (Eigen::Index o = 0; o < n; ++o) {
      for (int q = 0; q < p; ++q) e[q] = model.eta[q][o];
      for (int q = 0; q < p; ++q) grads[q][o] = family.gradients[q](y[o], e);
    }
    int best_q = -1, best_j = -1;
    double best_decrease = -std::numeric_limits<double>::infinity();
    Vector best_theta;
    const double current = model.risk_path[m - 1];
    for (int q = 0; q < p; ++q) {
      for (size_t j = 0; j < model.learners[q].size(); ++j) {
        const BuiltBaseLearner& b = model.learners[q][j];
        Vector theta = solvers[q][j].solve(b.design.transpose() * grads[q]);
        if (!theta.allFinite()) continue;
        // trial step: actual joint-loss change decides across parameters
        std::vector<Vector> trial = model.eta;
        trial[q] += nu * (b.design * theta);
        const double decrease = current - joint_loss(trial);
        if (decrease > best_decrease) {
          best_decrease = decrease;
          best_q = q;
          best_j = static_cast<int>(j);
          best_theta = std::move(theta);
        }
      }
    }
    if (best_q < 0)
      throw std::runtime_error("multi-parameter boosting: no admissible update at "
                               "iteration " + std::to_string(m));
    LssPathEntry entry;
    entry.parameter = best_q;
    entry.learner = best_j;
    entry.increment = nu * best_theta;
    model.coefficients[best_q][best_j] += entry.increment;
    model.eta[best_q] += model.learners[best_q][best_j].design * entry.increment;
    model.path.push_back(std::move(entry));
    model.risk_path[m] = joint_loss(model.eta);
    if (model.risk_path[m] > model.risk_path[m - 1] +
                                 1e-10 * std::abs(model.risk_path[m - 1]) + 1e-12)
      throw std::runtime_error(
          "multi-parameter boosting: joint loss increased at iteration " +
          std::to_string(m) + "; reduce the step length");
  }
  return model;
}

}  // namespace fnboost
