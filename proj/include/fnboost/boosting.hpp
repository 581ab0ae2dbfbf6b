#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fnboost/baselearners.hpp"
#include "fnboost/families.hpp"

namespace fnboost {

struct Control {
  int mstop = 100;
  std::optional<double> nu;  // step length; family default when unset
  bool use_array_path = true;  // structured per-iteration solves on grid responses
};

enum class OffsetMode { Smooth, Scalar };

struct ModelSpec {
  std::vector<BaseLearnerSpec> formula;
  std::optional<BaseLearnerSpec> timeformula;  // t-marginal smooth, functional responses
  std::string family = "gaussian";
  Control control;
  OffsetMode offset_mode = OffsetMode::Smooth;
  IntScheme num_int = IntScheme::Equal;  // loss integration weights
};

struct PathEntry {
  int learner = 0;
  Vector increment;  // nu * theta_hat of the selected learner
};

/// Observer hook invoked after the offset (m = 0) and after every iteration
/// with the current long-format fitted values.
struct FitObserver {
  virtual ~FitObserver() = default;
  virtual void after_iteration(int m, const Vector& fitted) = 0;
};

struct FittedModel {
  ModelSpec spec;
  std::vector<BuiltBaseLearner> learners;
  std::vector<Vector> coefficients;  // accumulated per learner
  std::vector<PathEntry> path;
  Vector risk_path;  // index 0 = offset-only risk, length mstop + 1

  double offset_scalar = 0.0;
  bool offset_is_smooth = false;
  SplineBasis offset_basis;
  Vector offset_coef;  // smooth offset spline coefficients

  // retained training state; absent (data == nullptr) on deserialized models
  std::shared_ptr<const Dataset> data;
  ResponseLayout layout;
  Vector y_long;
  Vector obs_weights;  // numInt x per-curve weights
  Vector curve_weights;
  Vector fitted;

  int mstop() const { return static_cast<int>(path.size()); }
  /// Offset evaluated per long observation of the given layout.
  Vector offset_on(const ResponseLayout& layout) const;
};

/// Run component-wise gradient boosting. `curve_weights` (default all-ones)
/// weight whole curves, e.g. resampling in-bag multiplicities; weight-zero
/// curves stay out of every fit but are tracked in the fitted values.
/// `fixed_preprocessing` (optional) supplies a full-data fit whose smooth
/// offset, constraint transforms, and built designs are reused; only the
/// smoothing parameters and scalar offsets are recomputed for the weights.
FittedModel fit(const ModelSpec& spec, const Dataset& data,
                const Vector& curve_weights = Vector(), FitObserver* observer = nullptr,
                const FittedModel* fixed_preprocessing = nullptr);

/// Linear predictor for new data at iteration `at` (default: current mstop).
Vector predict(const FittedModel& model, const Dataset& newdata,
               std::optional<int> at = std::nullopt, bool response_scale = false);

/// Fitted contribution of learner j on the training data (long format).
Vector learner_contribution(const FittedModel& model, int j,
                            std::optional<int> at = std::nullopt);

/// Coefficients of learner j at iteration `at`.
Vector coefficients_at(const FittedModel& model, int j, int at);

/// Shrink to m iterations by path replay, or continue fitting up to m.
FittedModel truncate(const FittedModel& model, int m);

/// Refit from iteration 0 with a different family, identical learners.
FittedModel update_family(const FittedModel& model, const std::string& family);

/// Coefficient functions/surfaces evaluated on regular grids.
struct CoefEval {
  std::string label;
  enum class Kind { Constant, Curve, Surface } kind = Kind::Constant;
  Vector x1;      // covariate/s grid (Curve, Surface)
  Vector x2;      // t grid (Surface)
  Matrix values;  // Constant: Kx1; Curve: n1 x 1; Surface: n1 x n2
};
std::vector<CoefEval> coef_eval(const FittedModel& model, int n1 = 40, int n2 = 40);

}  // namespace fnboost
