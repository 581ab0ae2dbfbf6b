#pragma once

#include "fnboost/boosting.hpp"

namespace fnboost {

/// Multi-parameter family: joint negative log-likelihood with one additive
/// predictor per distribution parameter.
struct LssFamily {
  std::string name;
  std::vector<std::string> parameters;
  /// loss(y, eta) with eta holding one predictor value per parameter
  std::function<double(double y, const std::vector<double>& eta)> loss;
  /// negative partial gradients, one per parameter
  std::vector<std::function<double(double y, const std::vector<double>& eta)>> gradients;
  std::vector<std::function<double(const Vector& y)>> offsets;  // scalar offsets
  std::vector<std::function<double(double eta)>> inverse_links;
  double default_nu = 0.1;
};

/// Gaussian location-scale family: identity link for the mean, log link for
/// the standard deviation.
LssFamily gaussian_lss();

struct LssPathEntry {
  int parameter = 0;
  int learner = 0;
  Vector increment;
};

struct LssFittedModel {
  LssFamily family;
  std::vector<std::vector<BuiltBaseLearner>> learners;     // per parameter
  std::vector<std::vector<Vector>> coefficients;           // per parameter/learner
  std::vector<double> offsets;                             // per parameter
  std::vector<Vector> eta;                                 // current predictors
  std::vector<LssPathEntry> path;
  Vector risk_path;  // joint negative log-likelihood, index 0 = offsets only
  int mstop() const { return static_cast<int>(path.size()); }
};

/// Noncyclic multi-parameter boosting: each iteration fits every learner of
/// every parameter to that parameter's partial gradient and applies the single
/// update with the largest joint-loss decrease.
LssFittedModel fit_lss(const std::vector<std::vector<BaseLearnerSpec>>& formulas,
                       const LssFamily& family, const Dataset& data,
                       const Control& control = Control());

}  // namespace fnboost
