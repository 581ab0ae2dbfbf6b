#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnboost/fpca.hpp>

#include <cmath>
#include <random>

using namespace fnboost;

namespace {

// Rank-3 Karhunen-Loeve model on [0,1] with orthonormal Fourier functions
// and score variances zeta = (4, 1, 0.25).
FunctionalCovariate make_kl(int n, int r, unsigned seed) {
  FunctionalCovariate x;
  x.name = "x";
  x.grid = Vector::LinSpaced(r, 0.0, 1.0);
  x.values = Matrix::Zero(n, r);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double zeta[3] = {4.0, 1.0, 0.25};
  Matrix phi(3, r);
  for (int j = 0; j < r; ++j) {
    const double s = x.grid[j];
    phi(0, j) = std::sqrt(2.0) * std::sin(2.0 * M_PI * s);
    phi(1, j) = std::sqrt(2.0) * std::cos(2.0 * M_PI * s);
    phi(2, j) = std::sqrt(2.0) * std::sin(4.0 * M_PI * s);
  }
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k)
      x.values.row(i) += std::sqrt(zeta[k]) * nd(rng) * phi.row(k);
  return x;
}

double inner(const Vector& grid, const Vector& a, const Vector& b) {
  const Vector w = integration_weights(grid, IntScheme::Trapezoid).weights;
  return (w.array() * a.array() * b.array()).sum();
}

}  // namespace

TEST_CASE("recovers a rank-3 model") {
  FunctionalCovariate x = make_kl(400, 101, 1);
  FpcaResult f = fpca(x, 0.999);

  REQUIRE(f.eigenvalues.size() >= 3);
  // eigenvalues sorted descending, roughly matching (4, 1, 0.25)
  CHECK(f.eigenvalues[0] == doctest::Approx(4.0).epsilon(0.25));
  CHECK(f.eigenvalues[1] == doctest::Approx(1.0).epsilon(0.25));
  CHECK(f.eigenvalues[2] == doctest::Approx(0.25).epsilon(0.25));
  CHECK(f.pve_achieved >= 0.999);

  // eigenfunctions are orthonormal in the quadrature inner product
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      CHECK(inner(f.grid, f.eigenfunctions.col(a), f.eigenfunctions.col(b)) ==
            doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-8).scale(1.0));

  // leading eigenfunction matches sqrt(2) sin(2 pi s) up to sign
  Vector want(101);
  for (int j = 0; j < 101; ++j)
    want[j] = std::sqrt(2.0) * std::sin(2.0 * M_PI * f.grid[j]);
  const double align = inner(f.grid, f.eigenfunctions.col(0), want);
  CHECK(std::abs(align) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("scores reconstruct the centered curves") {
  FunctionalCovariate x = make_kl(100, 61, 7);
  FpcaResult f = fpca(x, 0.9999999);
  Matrix centered = x.values.rowwise() - f.mean.transpose();
  Matrix recon = f.scores * f.eigenfunctions.transpose();
  CHECK((recon - centered).cwiseAbs().maxCoeff() < 1e-6);
  // scores have zero column means (curves centered before projection)
  CHECK(f.scores.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("npc truncation and errors") {
  FunctionalCovariate x = make_kl(50, 41, 3);
  FpcaResult f = fpca(x, 0.99, 2);
  CHECK(f.eigenvalues.size() == 2);
  CHECK(f.eigenfunctions.cols() == 2);
  CHECK(f.scores.cols() == 2);

  CHECK_THROWS(fpca(x, 0.99, 0));
  CHECK_THROWS(fpca(x, 0.99, 1000));
  CHECK_THROWS(fpca(x, 1.5));

  FunctionalCovariate tiny = x;
  tiny.values = x.values.topRows(1);  // covariance needs N >= 2
  CHECK_THROWS(fpca(tiny));
}

TEST_CASE("fpca_scores matches stored training scores") {
  FunctionalCovariate x = make_kl(80, 51, 9);
  FpcaResult f = fpca(x, 0.99);
  Matrix centered = x.values.rowwise() - f.mean.transpose();
  Matrix z = fpca_scores(f, centered);
  CHECK((z - f.scores).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("deterministic sign convention") {
  FunctionalCovariate x = make_kl(60, 31, 5);
  FpcaResult a = fpca(x, 0.99);
  FpcaResult b = fpca(x, 0.99);
  CHECK((a.eigenfunctions - b.eigenfunctions).cwiseAbs().maxCoeff() == 0.0);
  // convention: the entry of largest magnitude is positive
  for (int k = 0; k < a.eigenfunctions.cols(); ++k) {
    Eigen::Index j;
    a.eigenfunctions.col(k).cwiseAbs().maxCoeff(&j);
    CHECK(a.eigenfunctions(j, k) > 0.0);
  }
}
