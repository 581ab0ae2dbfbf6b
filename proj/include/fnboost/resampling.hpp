#pragma once

#include <cstdint>
#include <vector>

#include "fnboost/boosting.hpp"

namespace fnboost {

/// Curve-level resampling weights, one column per fold. With a grouping,
/// sampling happens at the group (independent-unit) level and weights are
/// constant within each group.
struct FoldMatrix {
  enum class Type { Bootstrap, Kfold, Subsampling };
  Type type = Type::Bootstrap;
  Eigen::MatrixXi weights;    // n_curves x B
  std::vector<int> grouping;  // curve -> unit; empty = one unit per curve
  int n_units = 0;
};

FoldMatrix make_folds(int n_curves, FoldMatrix::Type type, int B, std::uint64_t seed,
                      const std::vector<int>& grouping = {});

/// splitmix64 stream derivation, used for reproducible per-fold substreams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class CvMode {
  RefitAll,            // rebuild everything per fold from the resampled data
  FixedPreprocessing,  // keep full-data smooth offset and constraint transforms
};

struct CvResult {
  Matrix risk;  // B x |grid|: mean out-of-bag risk per held-out curve
  std::vector<int> grid;
  int mstop_opt = 0;
  bool boundary = false;  // optimum at the largest grid value: enlarge the grid
};

CvResult oob_risk_curves(const ModelSpec& spec, const Dataset& data,
                         const FoldMatrix& folds, const std::vector<int>& grid,
                         CvMode mode = CvMode::RefitAll, int jobs = 1);

/// Duplicate/drop whole curves according to per-curve multiplicities.
Dataset subset_curves(const Dataset& data, const std::vector<int>& multiplicity);

struct BootstrapBand {
  std::string label;
  CoefEval::Kind kind = CoefEval::Kind::Constant;
  Vector x1, x2;
  std::vector<double> quantiles;
  std::vector<Matrix> values;  // one matrix per quantile
};

struct BootstrapCiResult {
  std::vector<std::vector<CoefEval>> fold_estimates;  // per outer fold
  std::vector<int> selected_mstop;
  std::vector<BootstrapBand> bands;
};

/// Nested bootstrap: outer folds are explicit resampled datasets; the inner
/// resampling selects each fold's stopping iteration.
BootstrapCiResult bootstrap_ci(const ModelSpec& spec, const Dataset& data, int B_outer,
                               int B_inner, const std::vector<int>& grid,
                               const std::vector<double>& quantiles, std::uint64_t seed,
                               FoldMatrix::Type inner_type = FoldMatrix::Type::Bootstrap,
                               int jobs = 1, int n1 = 40, int n2 = 40);

}  // namespace fnboost
