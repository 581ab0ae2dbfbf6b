#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnboost/splines.hpp>

#include <random>

using namespace fnboost;

namespace {

// Independent Cox-de Boor recursion, computed naively over all basis
// functions instead of the local-support evaluation used by the library.
double bspline_rec(const Vector& knots, int i, int p, double x, double upper) {
  if (p == 0) {
    // half-open cells, except the last nonempty cell which is closed
    const bool last = knots[i + 1] >= upper && knots[i] < upper;
    if (last) return (x >= knots[i] && x <= knots[i + 1]) ? 1.0 : 0.0;
    return (x >= knots[i] && x < knots[i + 1]) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  if (knots[i + p] > knots[i])
    left = (x - knots[i]) / (knots[i + p] - knots[i]) *
           bspline_rec(knots, i, p - 1, x, upper);
  if (knots[i + p + 1] > knots[i + 1])
    right = (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1]) *
            bspline_rec(knots, i + 1, p - 1, x, upper);
  return left + right;
}

}  // namespace

TEST_CASE("basis dimension and knot vector") {
  SplineBasis b{10, 3, 0.0, 1.0};
  CHECK(b.dim() == 14);
  Vector k = b.knot_vector();
  CHECK(k.size() == 10 + 2 * (3 + 1));  // inner + repeated boundary knots
  for (int i = 0; i < 4; ++i) {
    CHECK(k[i] == doctest::Approx(0.0));
    CHECK(k[k.size() - 1 - i] == doctest::Approx(1.0));
  }
  // equidistant interior
  for (int i = 4; i < k.size() - 4; ++i)
    CHECK(k[i] == doctest::Approx((i - 3) / 11.0));
}

TEST_CASE("design matches the naive recursion oracle") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_int_distribution<int> ki(1, 12), di(0, 3);
    SplineBasis b{ki(rng), di(rng), -0.5, 2.0};
    std::uniform_real_distribution<double> ux(b.lower, b.upper);
    Vector x(40);
    for (int i = 0; i < 38; ++i) x[i] = ux(rng);
    x[38] = b.lower;
    x[39] = b.upper;
    Matrix design = bspline_design(x, b);
    Vector knots = b.knot_vector();
    REQUIRE(design.cols() == b.dim());
    for (int i = 0; i < x.size(); ++i)
      for (int j = 0; j < b.dim(); ++j)
        CHECK(design(i, j) ==
              doctest::Approx(bspline_rec(knots, j, b.degree, x[i], b.upper))
                  .epsilon(1e-12));
  }
}

TEST_CASE("partition of unity") {
  SplineBasis b{7, 3, 0.0, 10.0};
  Vector x = Vector::LinSpaced(101, 0.0, 10.0);
  Matrix design = bspline_design(x, b);
  for (int i = 0; i < x.size(); ++i)
    CHECK(design.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((design.array() >= -1e-14).all());
}

TEST_CASE("out-of-range evaluation throws") {
  SplineBasis b{5, 3, 0.0, 1.0};
  Vector x(1);
  x[0] = 1.0 + 1e-9;
  CHECK_THROWS_AS(bspline_design(x, b), std::out_of_range);
  x[0] = -1e-9;
  CHECK_THROWS_AS(bspline_design(x, b), std::out_of_range);
}

TEST_CASE("difference penalty golden values") {
  // first-order: tridiagonal with 1,2,...,2,1 on the diagonal
  Matrix p1 = difference_penalty(5, 1);
  Matrix want(5, 5);
  want << 1, -1, 0, 0, 0,  //
      -1, 2, -1, 0, 0,     //
      0, -1, 2, -1, 0,     //
      0, 0, -1, 2, -1,     //
      0, 0, 0, -1, 1;
  CHECK((p1 - want).cwiseAbs().maxCoeff() == 0.0);

  Matrix p2 = difference_penalty(5, 2);
  Matrix want2(5, 5);
  want2 << 1, -2, 1, 0, 0,  //
      -2, 5, -4, 1, 0,      //
      1, -4, 6, -4, 1,      //
      0, 1, -4, 5, -2,      //
      0, 0, 1, -2, 1;
  CHECK((p2 - want2).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS(difference_penalty(2, 2));
}

TEST_CASE("penalty annihilates polynomials up to order-1") {
  // D^T D of order d is zero on polynomial coefficient sequences of degree < d
  for (int order = 1; order <= 3; ++order) {
    Matrix p = difference_penalty(9, order);
    for (int deg = 0; deg < order; ++deg) {
      Vector poly(9);
      for (int i = 0; i < 9; ++i) poly[i] = std::pow(i + 1.0, deg);
      CHECK((p * poly).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("integration weights") {
  Vector g(4);
  g << 0.0, 1.0, 3.0, 4.0;

  Vector eq = integration_weights(g, IntScheme::Equal).weights;
  CHECK(eq.isApprox(Vector::Ones(4)));

  Vector ri = integration_weights(g, IntScheme::Riemann).weights;
  Vector ri_want(4);
  ri_want << 1.0, 1.0, 2.0, 1.0;  // right-aligned widths, first repeats
  CHECK(ri.isApprox(ri_want));

  Vector tr = integration_weights(g, IntScheme::Trapezoid).weights;
  Vector tr_want(4);
  tr_want << 0.5, 1.5, 1.5, 0.5;
  CHECK(tr.isApprox(tr_want));
  CHECK(tr.sum() == doctest::Approx(4.0));  // total length of the interval
}

TEST_CASE("trapezoid weights integrate linear functions exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector g(12);
  g[0] = 0.0;
  for (int i = 1; i < 12; ++i) g[i] = g[i - 1] + 0.05 + u(rng);
  Vector w = integration_weights(g, IntScheme::Trapezoid).weights;
  // integral of 2x + 3 over [g0, g_end]
  Vector f = 2.0 * g.array() + 3.0;
  double want = g[11] * g[11] + 3.0 * g[11] - (g[0] * g[0] + 3.0 * g[0]);
  CHECK(w.dot(f) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("scheme names round-trip") {
  for (auto s : {IntScheme::Trapezoid, IntScheme::Riemann, IntScheme::Equal})
    CHECK(int_scheme_from_name(int_scheme_name(s)) == s);
  CHECK_THROWS(int_scheme_from_name("simpson"));
}
