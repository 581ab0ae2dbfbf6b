#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fnboost/data.hpp"
#include "fnboost/fpca.hpp"

namespace fnboost {

/// Admissible integration window of a time-dependent functional effect.
struct LimitsFunction {
  enum class Kind { Historical, Lag, Lead, Custom };
  Kind kind = Kind::Historical;
  double delta = 0.0;
  std::function<double(double t)> lower_fn, upper_fn;  // Custom only

  bool admits(double s, double t) const;
  static LimitsFunction historical();
  static LimitsFunction lag(double delta);
  static LimitsFunction lead(double delta);
  static LimitsFunction custom(std::function<double(double)> lower,
                               std::function<double(double)> upper);
};

enum class LearnerType {
  Intercept,
  Ols,
  OlsConstrained,
  Random,
  Bbs,
  BbsConstrained,
  Signal,
  Fpc,
  Concurrent,
  Hist,
  Compose
};

enum class ComposeOp { Kronecker, KroneckerTOnly, RowTensor, RowTensorConstrained };

enum class HistStandardize { None, Length };

/// Declarative description of one additive term. Field relevance depends on
/// `type`; unused fields keep their defaults.
struct BaseLearnerSpec {
  LearnerType type = LearnerType::Intercept;

  std::vector<std::string> vars;  // scalar covariates (Ols/Random)
  std::string var;                // single covariate (Bbs/Signal/Fpc/Concurrent/Hist)

  SplineBasis basis;       // Bbs/Signal/Concurrent; Hist s-basis
  SplineBasis basis_t;     // Hist t-basis
  bool auto_range = true;  // derive basis boundaries from the data
  int diff_order = 2;
  IntScheme int_scheme = IntScheme::Trapezoid;
  bool include_intercept = true;  // Ols

  double pve = 0.99;  // Fpc
  std::optional<int> npc;

  LimitsFunction limits;  // Hist
  HistStandardize standardize = HistStandardize::None;

  ComposeOp op = ComposeOp::Kronecker;  // Compose
  std::shared_ptr<BaseLearnerSpec> left, right;

  std::optional<double> df;
  std::optional<double> lambda;
  std::string label;
};

// Spec factories with the conventional defaults per learner kind.
BaseLearnerSpec intercept_spec();
BaseLearnerSpec ols_spec(std::vector<std::string> vars, bool constrained = false);
BaseLearnerSpec random_spec(std::string var);
BaseLearnerSpec bbs_spec(std::string var, bool constrained = false);
BaseLearnerSpec signal_spec(std::string var);
BaseLearnerSpec fpc_spec(std::string var);
BaseLearnerSpec concurrent_spec(std::string var);
BaseLearnerSpec hist_spec(std::string var, LimitsFunction limits = LimitsFunction::historical());
BaseLearnerSpec compose_spec(ComposeOp op, BaseLearnerSpec left, BaseLearnerSpec right);

/// How the stacked (long-format) response observations index curves and times.
/// Grid responses are stacked time-major: observation o = g*N + i.
struct ResponseLayout {
  std::vector<int> curve_id;  // length n
  Vector times;               // length n; empty for scalar responses
  Vector time_grid;           // distinct times of a grid response; else empty
  int n_curves = 0;
  bool is_grid = false;
  bool is_scalar = false;
  int n() const { return is_scalar ? n_curves : static_cast<int>(times.size()); }
};

ResponseLayout response_layout(const Response& response);

/// A term ready for boosting: frozen design, penalty, smoothing parameter, and
/// whatever fitted state is needed to evaluate the term on new data.
struct BuiltBaseLearner {
  BaseLearnerSpec spec;
  Matrix design;    // n_rows x K (rows = curves, or long observations)
  Matrix penalty;   // K x K, symmetric PSD
  Matrix transform; // K_raw x K; identity when unconstrained
  double lambda = 0.0;
  double df = 0.0;
  std::string label;

  // Fitted state reused when rebuilding designs for prediction.
  std::optional<FpcaResult> modes;         // Fpc
  std::vector<std::string> factor_levels;  // Ols/Random factor coding
  std::shared_ptr<BuiltBaseLearner> left, right;  // Compose marginals
  bool rows_are_curves = true;  // false for long-format (per-observation) rows

  /// Post-transform coefficient dimension; valid also when the design is
  /// absent (deserialized models keep only the transform).
  int k() const {
    return static_cast<int>(design.cols() ? design.cols() : transform.cols());
  }
};

/// Build a learner's design/penalty and calibrate lambda against the target
/// degrees of freedom using the given observation weights.
BuiltBaseLearner build_learner(const BaseLearnerSpec& spec, const Dataset& data,
                               const ResponseLayout& layout, const Vector& obs_weights);

/// Rebuild the (post-transform) design of a built learner on new data.
Matrix learner_design(const BuiltBaseLearner& b, const Dataset& data,
                      const ResponseLayout& layout);

/// Sum-to-zero constraint: reparameterize so every fitted contribution sums to
/// zero over curves. Returns the orthonormal null-space transform of Z'1.
struct ConstraintResult {
  Matrix design;     // Z Q
  Matrix penalty;    // Q' P Q
  Matrix transform;  // Q, K_raw x K
};
ConstraintResult apply_constraint(const Matrix& design, const Matrix& penalty);

/// Solve trace[Z (Z'WZ + lambda P)^-1 Z'W] = df_target for lambda.
double df_to_lambda(const Matrix& design, const Matrix& penalty, const Vector& weights,
                    double df_target);
double df_to_lambda_gram(const Matrix& gram, const Matrix& penalty, double df_target);
double df_of_lambda(const Matrix& gram, const Matrix& penalty, double lambda);

/// Effectively-infinite smoothing parameter sentinel.
inline constexpr double kLambdaInfinite = 1e16;

}  // namespace fnboost
