#include "fnboost/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fnboost {

Vector SplineBasis::knot_vector() const {
  if (inner_knots < 0 || degree < 0)
    throw std::invalid_argument("SplineBasis: inner_knots and degree must be >= 0");
  if (!(lower < upper))
    throw std::invalid_argument("SplineBasis: need lower < upper");
  // (degree+1)-fold boundary knots, inner knots equidistant.
  const int n_spans = inner_knots + 1;
  const double h = (upper - lower) / n_spans;
  Vector knots(inner_knots + 2 * (degree + 1));
  int p = 0;
  for (int i = 0; i <= degree; ++i) knots[p++] = lower;
  for (int i = 1; i <= inner_knots; ++i) knots[p++] = lower + i * h;
  for (int i = 0; i <= degree; ++i) knots[p++] = upper;
  return knots;
}

namespace {

// Index of the knot span containing x; x == upper maps to the last span.
int find_span(double x, const Vector& knots, int degree, int K) {
  const int last = K - 1;  // last valid span start index
  if (x >= knots[K]) return last;
  int lo = degree, hi = K;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (x < knots[mid]) hi = mid;
    else lo = mid;
  }
  return lo;
}

}  // namespace

Matrix bspline_design(const Vector& x, const SplineBasis& basis) {
  const int K = basis.dim();
  const int d = basis.degree;
  const Vector knots = basis.knot_vector();
  const double tol = 1e-12 * (basis.upper - basis.lower);
  Matrix B = Matrix::Zero(x.size(), K);
  std::vector<double> left(d + 1), right(d + 1), N(d + 1);
  for (Eigen::Index row = 0; row < x.size(); ++row) {
    double xi = x[row];
    if (xi < basis.lower - tol || xi > basis.upper + tol)
      throw std::out_of_range("bspline_design: evaluation point outside boundary");
    xi = std::clamp(xi, basis.lower, basis.upper);
    const int span = find_span(xi, knots, d, K);
    // Cox-de Boor triangular scheme over the d+1 active functions.
    N[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
      left[j] = xi - knots[span + 1 - j];
      right[j] = knots[span + j] - xi;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double tmp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      N[j] = saved;
    }
    for (int j = 0; j <= d; ++j) B(row, span - d + j) = N[j];
  }
  return B;
}

Matrix difference_penalty(int K, int order) {
  if (order < 1) throw std::invalid_argument("difference_penalty: order must be >= 1");
  if (K <= order) throw std::invalid_argument("difference_penalty: need K > order");
  Matrix D = Matrix::Identity(K, K);
  for (int o = 0; o < order; ++o) {
    const int rows = K - o - 1;
    Matrix Dnext(rows, K);
    Dnext = D.bottomRows(rows) - D.topRows(rows);
    D = Dnext;
  }
  return D.transpose() * D;
}

IntegrationWeights integration_weights(const Vector& grid, IntScheme scheme) {
  const Eigen::Index R = grid.size();
  for (Eigen::Index r = 1; r < R; ++r)
    if (!(grid[r] > grid[r - 1]))
      throw std::invalid_argument("integration_weights: grid must be strictly increasing");
  IntegrationWeights out;
  out.scheme = scheme;
  if (scheme == IntScheme::Equal) {
    out.weights = Vector::Ones(R);
    return out;
  }
  if (R < 2)
    throw std::invalid_argument("integration_weights: grid length < 2 for non-equal scheme");
  Vector w = Vector::Zero(R);
  if (scheme == IntScheme::Riemann) {
    w[0] = grid[1] - grid[0];
    for (Eigen::Index r = 1; r < R; ++r) w[r] = grid[r] - grid[r - 1];
  } else {  // Trapezoid
    for (Eigen::Index r = 0; r + 1 < R; ++r) {
      const double h = grid[r + 1] - grid[r];
      w[r] += 0.5 * h;
      w[r + 1] += 0.5 * h;
    }
  }
  out.weights = w;
  return out;
}

IntScheme int_scheme_from_name(const std::string& name) {
  if (name == "trapezoid") return IntScheme::Trapezoid;
  if (name == "riemann") return IntScheme::Riemann;
  if (name == "equal") return IntScheme::Equal;
  throw std::invalid_argument("unknown integration scheme: " + name);
}

std::string int_scheme_name(IntScheme s) {
  switch (s) {
    case IntScheme::Trapezoid: return "trapezoid";
    case IntScheme::Riemann: return "riemann";
    default: return "equal";
  }
}

}  // namespace fnboost
