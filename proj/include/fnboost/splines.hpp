#pragma once

#include <Eigen/Dense>

#include <string>

namespace fnboost {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Equidistant B-spline basis with degree-fold repeated boundary knots.
/// Basis dimension K = inner_knots + degree + 1.
struct SplineBasis {
  int inner_knots = 10;
  int degree = 3;
  double lower = 0.0;
  double upper = 1.0;

  int dim() const { return inner_knots + degree + 1; }
  Vector knot_vector() const;
};

/// Design matrix of B-spline evaluations, len(x) x K. Rows sum to one
/// inside [lower, upper]; points exactly at the upper boundary fall into
/// the last interval. Throws if any x lies outside the boundary.
Matrix bspline_design(const Vector& x, const SplineBasis& basis);

/// P = D^T D with D the order-th difference operator, K x K.
/// Requires K > order.
Matrix difference_penalty(int K, int order);

enum class IntScheme { Trapezoid, Riemann, Equal };

struct IntegrationWeights {
  Vector weights;
  IntScheme scheme;
};

/// Quadrature weights on a strictly increasing grid.
/// Equal: all ones. Riemann: right-aligned cell widths (first cell
/// s_2 - s_1). Trapezoid: composite trapezoid weights.
IntegrationWeights integration_weights(const Vector& grid, IntScheme scheme);

IntScheme int_scheme_from_name(const std::string& name);
std::string int_scheme_name(IntScheme s);

}  // namespace fnboost
