#pragma once

#include <optional>

#include "fnboost/data.hpp"

namespace fnboost {

/// Truncated Karhunen-Loeve decomposition of a centered functional covariate.
struct FpcaResult {
  Vector eigenvalues;     // length K, descending, > 0
  Matrix eigenfunctions;  // R x K, orthonormal under the quadrature inner product
  Matrix scores;          // N x K, zero column means
  Vector mean;            // per-grid-point mean removed before decomposition
  Vector grid;
  double pve_achieved = 0.0;
};

/// Decompose x into its leading principal components. Truncation keeps npc
/// components when given, otherwise the smallest K reaching the requested
/// proportion of variance explained.
FpcaResult fpca(const FunctionalCovariate& x, double pve = 0.99,
                std::optional<int> npc = std::nullopt);

/// Quadrature-weighted projection scores of (already centered) curves onto the
/// stored eigenfunctions: z_ik = sum_r delta_r x_i(s_r) e_k(s_r).
Matrix fpca_scores(const FpcaResult& result, const Matrix& centered_curves);

}  // namespace fnboost
