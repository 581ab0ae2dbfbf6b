#pragma once

#include <string>
#include <variant>
#include <vector>

#include "fnboost/splines.hpp"

namespace fnboost {

/// Functional covariate observed on one shared grid: N curves x R points.
struct FunctionalCovariate {
  std::string name;
  Matrix values;  // N x R
  Vector grid;    // strictly increasing, length R
};

struct ScalarCovariate {
  std::string name;
  bool is_factor = false;
  Vector values;                    // numeric values, length N (empty for factors)
  std::vector<std::string> levels;  // lexicographically ordered
  std::vector<int> level_index;     // per-observation level, 0-based
  int n() const { return is_factor ? static_cast<int>(level_index.size())
                                   : static_cast<int>(values.size()); }
};

struct GridResponse {
  Matrix values;  // N x G
  Vector grid;    // length G
};

/// Curve-specific response: n = sum_i G_i stacked observations.
struct LongResponse {
  Vector values;
  Vector times;
  std::vector<int> curve_id;  // 0-based, contiguous 0..N-1
  int n_curves = 0;
};

using Response = std::variant<Vector, GridResponse, LongResponse>;

struct Dataset {
  std::vector<ScalarCovariate> scalars;
  std::vector<FunctionalCovariate> functionals;
  Response response;

  int n_curves() const;
  const ScalarCovariate& scalar(const std::string& name) const;
  const FunctionalCovariate& functional(const std::string& name) const;
  bool has_scalar(const std::string& name) const;
  bool has_functional(const std::string& name) const;
  void validate() const;
};

/// Load a dataset from a JSON manifest listing response layout and CSV files.
Dataset load_dataset(const std::string& manifest_path);

/// Subtract the per-column mean; requires N >= 2.
FunctionalCovariate center_functional(const FunctionalCovariate& x);

/// Stack a grid response time-major: each time point replicated across all
/// curves, so observation o = g*N + i holds y_i(t_g).
LongResponse grid_to_long(const GridResponse& r);

/// Inverse reshape of grid_to_long; requires a complete N x G long layout.
GridResponse long_to_grid(const LongResponse& r);

/// Minimal CSV support: header row mandatory, IEEE-754 doubles with '.'
/// decimal; factor cells are quoted strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
Matrix csv_to_matrix(const CsvTable& t, const std::string& context);

}  // namespace fnboost
