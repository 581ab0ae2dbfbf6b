#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnboost/families.hpp>

#include <cmath>
#include <random>

using namespace fnboost;

namespace {

// central finite difference of the loss in f
double fd_gradient(const Family& fam, double y, double f, double h = 1e-6) {
  return (fam.loss(y, f + h) - fam.loss(y, f - h)) / (2.0 * h);
}

void check_gradient(const Family& fam, double y, double f, double tol = 1e-6) {
  CHECK(-fd_gradient(fam, y, f) ==
        doctest::Approx(fam.negative_gradient(y, f)).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("negative gradients match finite differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uy(-3.0, 3.0), uf(-3.0, 3.0);

  for (int i = 0; i < 100; ++i) {
    const double y = uy(rng), f = uf(rng);
    check_gradient(gaussian(), y, f);
    if (std::abs(y - f) > 1e-3) {  // laplace/quantile kink at the residual zero
      check_gradient(laplace(), y, f);
      check_gradient(quantile(0.3), y, f);
      check_gradient(quantile(0.85), y, f);
    }
    if (std::abs(std::abs(y - f) - 1.0) > 1e-3) check_gradient(huber(1.0), y, f);
    check_gradient(binomial(), uy(rng) > 0 ? 1.0 : 0.0, f);
    check_gradient(poisson(), std::floor(std::abs(y)), f);
  }
}

TEST_CASE("gaussian family basics") {
  Family g = gaussian();
  CHECK(g.loss(2.0, 0.5) == doctest::Approx(0.5 * 1.5 * 1.5));
  CHECK(g.link(0.7) == doctest::Approx(0.7));
  Vector y(3), w(3);
  y << 1, 2, 6;
  w << 1, 1, 2;
  CHECK(g.offset(y, w) == doctest::Approx(15.0 / 4.0));  // weighted mean
}

TEST_CASE("laplace and quantile offsets") {
  Vector y(5), w(5);
  y << 5, 1, 3, 2, 4;
  w = Vector::Ones(5);
  CHECK(laplace().offset(y, w) == doctest::Approx(3.0));  // median
  CHECK(quantile(0.5).offset(y, w) == doctest::Approx(3.0));
  // weighted median ignores zero-weight points
  w << 1, 1, 0, 1, 1;
  const double m = laplace().offset(y, w);
  CHECK(m >= 2.0);
  CHECK(m <= 4.0);
}

TEST_CASE("binomial is numerically stable at extreme margins") {
  Family b = binomial();
  CHECK(std::isfinite(b.loss(1.0, 800.0)));
  CHECK(std::isfinite(b.loss(1.0, -800.0)));
  CHECK(std::isfinite(b.negative_gradient(0.0, 800.0)));
  CHECK(b.loss(1.0, 30.0) == doctest::Approx(0.0).epsilon(1e-10));
  // inverse link is the logistic function
  CHECK(b.inverse_link(0.0) == doctest::Approx(0.5));
  CHECK(b.validate);
  Vector bad(2);
  bad << 0.0, 0.5;
  CHECK_THROWS(b.validate(bad));
}

TEST_CASE("poisson link and default step length") {
  Family p = poisson();
  CHECK(p.default_nu == doctest::Approx(0.01));
  CHECK(p.inverse_link(p.link(2.5)) == doctest::Approx(2.5));
  Vector bad(1);
  bad << -1.0;
  CHECK_THROWS(p.validate(bad));
}

TEST_CASE("adaptive huber delta tracks the median absolute residual") {
  Family h = huber();  // no fixed delta: adapts each iteration
  REQUIRE(h.pre_iteration);
  Vector y(5), f(5), w(5);
  y << 0, 1, 2, 3, 10;
  f = Vector::Zero(5);
  w = Vector::Ones(5);
  h.pre_iteration(y, f, w);
  // after adapting, |r|=1 is inside the quadratic zone while |r|=10 is linear
  const double g_small = h.negative_gradient(1.0, 0.0);
  const double g_large = h.negative_gradient(10.0, 0.0);
  CHECK(g_small == doctest::Approx(1.0));
  CHECK(g_large < 10.0);
  CHECK(g_large == doctest::Approx(2.0));  // clipped at delta = median |r| = 2
}

TEST_CASE("family_from_name") {
  CHECK(family_from_name("gaussian").name == "gaussian");
  CHECK(family_from_name("quantile:0.25").name.substr(0, 8) == "quantile");
  CHECK_THROWS(family_from_name("gamma"));
  CHECK_THROWS(family_from_name("quantile:1.5"));
}

TEST_CASE("integrated risk with layout weights") {
  Family g = gaussian();
  GridResponse r;
  r.values = Matrix::Zero(2, 3);
  r.grid = Vector::LinSpaced(3, 0.0, 2.0);
  Vector fitted = Vector::Ones(6);  // long layout, all residuals are -1

  // Equal weights: every observation counts 1 -> risk = 6 * 0.5
  CHECK(integrated_risk(g, Response{r}, fitted, IntScheme::Equal) ==
        doctest::Approx(3.0));
  // Trapezoid on [0,2]: weights (.5,1,.5) per curve -> risk = 2 * 2 * 0.5
  CHECK(integrated_risk(g, Response{r}, fitted, IntScheme::Trapezoid) ==
        doctest::Approx(2.0));

  Vector w = response_integration_weights(Response{r}, IntScheme::Trapezoid);
  REQUIRE(w.size() == 6);
  CHECK(w.sum() == doctest::Approx(4.0));
}

TEST_CASE("weighted quantile reduces to the sample quantile") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Vector y(201);
  for (int i = 0; i < y.size(); ++i) y[i] = n(rng);
  Vector w = Vector::Ones(y.size());
  std::vector<double> sorted(y.data(), y.data() + y.size());
  std::sort(sorted.begin(), sorted.end());
  CHECK(weighted_quantile(y, w, 0.5) == doctest::Approx(sorted[100]));
  CHECK(weighted_mean(y, w) == doctest::Approx(y.mean()));
}
