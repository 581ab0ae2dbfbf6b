#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnboost/baselearners.hpp>

#include <cmath>
#include <random>

using namespace fnboost;

namespace {

Matrix kron_oracle(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Dataset sof_dataset(int n, int r, unsigned seed, const std::string& name = "x") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  FunctionalCovariate x;
  x.name = name;
  x.grid = Vector::LinSpaced(r, 0.0, 1.0);
  x.values = Matrix::NullaryExpr(n, r, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  Dataset d;
  d.functionals.push_back(x);
  Vector y = Vector::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
  d.response = y;
  return d;
}

Dataset fos_dataset(int n, int g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d;
  ScalarCovariate z;
  z.name = "z";
  z.values = Vector::NullaryExpr(n, [&](Eigen::Index) { return nd(rng); });
  d.scalars.push_back(z);
  ScalarCovariate grp;
  grp.name = "grp";
  grp.is_factor = true;
  grp.levels = {"a", "b", "c"};
  for (int i = 0; i < n; ++i) grp.level_index.push_back(i % 3);
  d.scalars.push_back(grp);
  GridResponse y;
  y.grid = Vector::LinSpaced(g, 0.0, 1.0);
  y.values = Matrix::NullaryExpr(n, g, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  d.response = y;
  return d;
}

}  // namespace

TEST_CASE("limits presets") {
  auto h = LimitsFunction::historical();
  CHECK(h.admits(0.5, 0.5));
  CHECK(h.admits(0.2, 0.5));
  CHECK(!h.admits(0.7, 0.5));

  auto lag = LimitsFunction::lag(0.2);  // t - delta <= s <= t
  CHECK(lag.admits(0.4, 0.5));
  CHECK(!lag.admits(0.25, 0.5));
  CHECK(lag.admits(0.5, 0.5));

  auto lead = LimitsFunction::lead(0.2);  // s <= t - delta
  CHECK(lead.admits(0.3, 0.5));
  CHECK(!lead.admits(0.35, 0.5));
  // inclusive boundary within tolerance
  CHECK(lead.admits(0.3 + 1e-12, 0.5));

  auto c = LimitsFunction::custom([](double t) { return t / 2; },
                                  [](double t) { return t; });
  CHECK(c.admits(0.4, 0.6));
  CHECK(!c.admits(0.2, 0.6));
}

TEST_CASE("signal design equals the explicit triple loop") {
  Dataset d = sof_dataset(9, 17, 21);
  auto layout = response_layout(d.response);
  auto spec = signal_spec("x");
  Vector w = Vector::Ones(layout.n());
  auto b = build_learner(spec, d, layout, w);

  CHECK(b.design.rows() == 9);
  CHECK(b.design.cols() == 14);  // 10 inner knots, cubic
  const FunctionalCovariate& x = d.functional("x");
  const Vector delta = integration_weights(x.grid, IntScheme::Trapezoid).weights;
  const Matrix phi = bspline_design(x.grid, b.spec.basis);
  for (int i = 0; i < 9; ++i)
    for (int k = 0; k < 14; ++k) {
      double want = 0.0;
      for (int j = 0; j < 17; ++j) want += x.values(i, j) * delta[j] * phi(j, k);
      CHECK(b.design(i, k) == doctest::Approx(want).epsilon(1e-12));
    }
  CHECK(b.penalty.isApprox(difference_penalty(14, 1)));
  CHECK(b.df == doctest::Approx(4.0));
  CHECK(std::abs(df_of_lambda(b.design.transpose() * b.design, b.penalty, b.lambda) -
                 4.0) < 1e-6);
}

TEST_CASE("ols factor coding and zero penalty") {
  Dataset d = fos_dataset(9, 5, 2);
  d.response = Vector::Ones(9);  // scalar response for a per-curve design
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto spec = ols_spec({"grp"});
  spec.include_intercept = false;
  auto b = build_learner(spec, d, layout, w);
  CHECK(b.design.cols() == 3);  // full dummy coding, no reference level
  for (int i = 0; i < 9; ++i) {
    CHECK(b.design.row(i).sum() == doctest::Approx(1.0));
    CHECK(b.design(i, i % 3) == 1.0);
  }
  CHECK(b.penalty.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.factor_levels == std::vector<std::string>{"grp=a", "grp=b", "grp=c"});

  // with an intercept the factor block gains one leading column
  auto bi = build_learner(ols_spec({"grp"}), d, layout, w);
  CHECK(bi.design.cols() == 4);

  auto rspec = random_spec("grp");
  rspec.df = 2.0;
  auto br = build_learner(rspec, d, layout, w);
  CHECK(br.penalty.isApprox(Matrix::Identity(3, 3)));
}

TEST_CASE("constraint transform removes the row-sum direction") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix z = Matrix::NullaryExpr(10, 4, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  Matrix p = difference_penalty(4, 1);

  ConstraintResult c = apply_constraint(z, p);
  REQUIRE(c.transform.rows() == 4);
  REQUIRE(c.transform.cols() == 3);
  // Q is orthonormal and orthogonal to c = Z'1
  CHECK((c.transform.transpose() * c.transform - Matrix::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  Vector cvec = z.transpose() * Vector::Ones(10);
  CHECK((c.transform.transpose() * cvec).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(c.design.isApprox(z * c.transform));
  CHECK(c.penalty.isApprox(c.transform.transpose() * p * c.transform));
  // any coefficient vector now yields a sum-to-zero fitted contribution
  Vector theta = Vector::Random(3);
  CHECK(std::abs((c.design * theta).sum()) < 1e-10);
}

TEST_CASE("constraint on centered designs is vacuous") {
  Matrix z(4, 2);
  z << 1, 2, -1, -2, 2, 1, -2, -1;  // columns already sum to zero
  ConstraintResult c = apply_constraint(z, Matrix::Identity(2, 2));
  CHECK(c.transform.isApprox(Matrix::Identity(2, 2)));
  CHECK(c.design.isApprox(z));
}

TEST_CASE("df calibration against the dense trace oracle") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 20 + static_cast<int>(rng() % 30);
    const int k = 5 + static_cast<int>(rng() % 7);
    Matrix z = Matrix::NullaryExpr(n, k, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
    Matrix p = difference_penalty(k, 2);
    const double df_target = 2.5 + 0.3 * (trial % 5);

    const double lambda = df_to_lambda(z, p, Vector::Ones(n), df_target);
    Matrix gram = z.transpose() * z;
    const double trace =
        (z * (gram + lambda * p).ldlt().solve(z.transpose())).trace();
    CHECK(trace == doctest::Approx(df_target).epsilon(1e-6));
  }
}

TEST_CASE("df edge cases") {
  Matrix z = Matrix::Identity(6, 6);
  Matrix p = difference_penalty(6, 2);
  // df = rank -> unpenalized
  CHECK(df_to_lambda(z, p, Vector::Ones(6), 6.0) == 0.0);
  // df below the penalty null space (dimension 2) is not reachable
  CHECK_THROWS(df_to_lambda(z, p, Vector::Ones(6), 1.0));
  // df above the rank is not reachable either
  CHECK_THROWS(df_to_lambda(z, p, Vector::Ones(6), 7.0));
  // df slightly above the null-space dimension requires a huge lambda
  const double l = df_to_lambda(z, p, Vector::Ones(6), 2.0 + 1e-6);
  CHECK(l > 1e6);
}

TEST_CASE("composed learner equals the explicit Kronecker expansion") {
  Dataset d = fos_dataset(6, 7, 31);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto right = bbs_spec("");  // response-time marginal
  right.df = 3.0;
  auto left = ols_spec({"z"});
  left.include_intercept = false;
  auto spec = compose_spec(ComposeOp::Kronecker, left, right);
  spec.df = 6.0;
  auto b = build_learner(spec, d, layout, w);

  const int kl = 1, kr = 24;  // z column; 20-knot cubic time basis
  REQUIRE(b.design.rows() == 42);
  REQUIRE(b.design.cols() == kl * kr);

  const Matrix psi = bspline_design(layout.times, b.right->spec.basis);
  const Vector z = d.scalar("z").values;
  for (int o = 0; o < 42; ++o)
    for (int j = 0; j < kr; ++j)
      CHECK(b.design(o, j) ==
            doctest::Approx(z[layout.curve_id[o]] * psi(o, j)).epsilon(1e-12));

  // penalty: kron(P_left, I) + kron(I, P_right) with a zero left penalty
  Matrix want = kron_oracle(Matrix::Zero(1, 1), Matrix::Identity(kr, kr)) +
                kron_oracle(Matrix::Identity(1, 1), difference_penalty(kr, 2));
  CHECK((b.penalty - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("composed penalty is the Kronecker sum for two smooth marginals") {
  // two genuine smooth marginals: scalar covariate spline x time spline
  Dataset d = fos_dataset(8, 6, 8);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto left = bbs_spec("z");
  left.basis.inner_knots = 3;  // keep it small: K_left = 7
  auto right = bbs_spec("");
  right.basis.inner_knots = 2;  // K_right = 6
  auto spec = compose_spec(ComposeOp::Kronecker, left, right);
  spec.df = 8.0;
  auto b = build_learner(spec, d, layout, w);

  REQUIRE(b.design.cols() == 7 * 6);
  Matrix want = kron_oracle(difference_penalty(7, 2), Matrix::Identity(6, 6)) +
                kron_oracle(Matrix::Identity(7, 7), difference_penalty(6, 2));
  CHECK((b.penalty - want).cwiseAbs().maxCoeff() < 1e-14);

  // row structure: row-wise Kronecker of the marginal design rows, left-major
  const Matrix phi = bspline_design(d.scalar("z").values, b.left->spec.basis);
  const Matrix psi = bspline_design(layout.times, b.right->spec.basis);
  for (int o = 0; o < 10; ++o)
    for (int a = 0; a < 7; ++a)
      for (int c = 0; c < 6; ++c)
        CHECK(b.design(o, a * 6 + c) ==
              doctest::Approx(phi(layout.curve_id[o], a) * psi(o, c)).epsilon(1e-12));
}

TEST_CASE("kronecker_t_only penalizes just the time direction") {
  Dataset d = fos_dataset(8, 6, 12);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto left = ols_spec({"z"});
  left.include_intercept = false;
  left.df = 1.0;
  auto right = bbs_spec("");
  right.basis.inner_knots = 2;
  right.df = 3.0;
  auto spec = compose_spec(ComposeOp::KroneckerTOnly, left, right);
  auto b = build_learner(spec, d, layout, w);
  Matrix want = kron_oracle(Matrix::Identity(1, 1), difference_penalty(6, 2));
  CHECK((b.penalty - want).cwiseAbs().maxCoeff() < 1e-14);

  // requires df_left = K_left so the unpenalized direction is deliberate
  auto bad_left = bbs_spec("z");
  bad_left.df = 3.0;  // below its basis dimension
  auto bad = compose_spec(ComposeOp::KroneckerTOnly, bad_left, right);
  CHECK_THROWS(build_learner(bad, d, layout, w));
}

TEST_CASE("row-tensor constrained composition centers the covariate margin") {
  Dataset d = fos_dataset(9, 5, 40);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto left = ols_spec({"grp"});
  left.include_intercept = false;
  auto right = bbs_spec("");
  right.basis.inner_knots = 2;
  auto spec = compose_spec(ComposeOp::RowTensorConstrained, left, right);
  spec.df = 5.0;
  auto b = build_learner(spec, d, layout, w);

  // constrained left margin: one column dropped from the 3-level dummy block
  CHECK(b.left->design.cols() == 2);
  // fitted contributions sum to zero across curves at every coefficient
  Vector theta = Vector::Random(b.design.cols());
  Vector contrib = b.design * theta;
  for (int t = 0; t < 5; ++t) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) s += contrib[t * 9 + i];
    CHECK(std::abs(s) < 1e-9);
  }
}

TEST_CASE("historical design with a full window matches the signal expansion") {
  // custom limits admitting everything make bhist a time-varying signal term
  std::mt19937_64 rng(51);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d;
  FunctionalCovariate x;
  x.name = "x";
  x.grid = Vector::LinSpaced(12, 0.0, 1.0);
  x.values = Matrix::NullaryExpr(5, 12, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  d.functionals.push_back(x);
  GridResponse y;
  y.grid = Vector::LinSpaced(6, 0.0, 1.0);
  y.values = Matrix::NullaryExpr(5, 6, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  d.response = y;
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto spec = hist_spec(
      "x", LimitsFunction::custom([](double) { return -1e30; },
                                  [](double) { return 1e30; }));
  spec.df.reset();
  spec.lambda = 1.0;
  auto b = build_learner(spec, d, layout, w);

  auto sig = build_learner(signal_spec("x"), d, layout, Vector::Ones(5));
  const Matrix psi = bspline_design(layout.times, b.spec.basis_t);
  const int ks = 14, kt = 14;
  REQUIRE(b.design.cols() == ks * kt);
  for (int o = 0; o < layout.n(); ++o)
    for (int a = 0; a < ks; ++a)
      for (int c = 0; c < kt; ++c)
        CHECK(b.design(o, a * kt + c) ==
              doctest::Approx(sig.design(layout.curve_id[o], a) * psi(o, c))
                  .epsilon(1e-10)
                  .scale(1.0));
}

TEST_CASE("lead limits produce structural zero rows before the gap") {
  Dataset d;
  FunctionalCovariate x;
  x.name = "x";
  x.grid = Vector::LinSpaced(10, 0.0, 9.0);
  x.values = Matrix::Ones(4, 10);
  d.functionals.push_back(x);
  GridResponse y;
  y.grid = x.grid;
  y.values = Matrix::Zero(4, 10);
  d.response = y;
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto spec = hist_spec("x", LimitsFunction::lead(3.0));
  spec.df.reset();
  spec.lambda = 10.0;
  auto b = build_learner(spec, d, layout, w);

  for (int o = 0; o < layout.n(); ++o) {
    const double t = layout.times[o];
    const double norm = b.design.row(o).cwiseAbs().sum();
    if (t < 3.0)
      CHECK(norm == 0.0);  // empty integration window
    else
      CHECK(norm > 0.0);
  }
}

TEST_CASE("hist length standardization rescales by the window size") {
  Dataset d;
  FunctionalCovariate x;
  x.name = "x";
  x.grid = Vector::LinSpaced(11, 0.0, 1.0);
  x.values = Matrix::Ones(3, 11);
  d.functionals.push_back(x);
  GridResponse y;
  y.grid = x.grid;
  y.values = Matrix::Zero(3, 11);
  d.response = y;
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto plain = hist_spec("x");
  plain.df.reset();
  plain.lambda = 1.0;
  auto std_spec = plain;
  std_spec.standardize = HistStandardize::Length;
  auto b0 = build_learner(plain, d, layout, w);
  auto b1 = build_learner(std_spec, d, layout, w);

  // constant curves: the plain row sum is exactly the integration-window
  // weight, so the standardized row is divided by max(window, min cell width)
  const double min_cell = 0.1;
  for (int o = 0; o < layout.n(); ++o) {
    const double window = b0.design.row(o).sum();
    if (window <= 0.0) continue;
    CHECK(b1.design.row(o).sum() ==
          doctest::Approx(window / std::max(window, min_cell)).epsilon(1e-9));
  }
}

TEST_CASE("concurrent design is the elementwise product oracle") {
  Dataset d;
  FunctionalCovariate x;
  x.name = "x";
  x.grid = Vector::LinSpaced(8, 0.0, 1.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  x.values = Matrix::NullaryExpr(5, 8, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
  d.functionals.push_back(x);
  GridResponse y;
  y.grid = x.grid;
  y.values = Matrix::Zero(5, 8);
  d.response = y;
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto spec = concurrent_spec("x");
  spec.df.reset();
  spec.lambda = 0.5;
  auto b = build_learner(spec, d, layout, w);

  const Matrix psi = bspline_design(layout.times, b.spec.basis);
  for (int o = 0; o < layout.n(); ++o) {
    // find the covariate grid index matching this response time
    int r = -1;
    for (int j = 0; j < 8; ++j)
      if (std::abs(x.grid[j] - layout.times[o]) < 1e-9) r = j;
    REQUIRE(r >= 0);
    for (int k = 0; k < b.design.cols(); ++k)
      CHECK(b.design(o, k) ==
            doctest::Approx(x.values(layout.curve_id[o], r) * psi(o, k))
                .epsilon(1e-12)
                .scale(1.0));
  }

  // a response time off the covariate grid is rejected
  GridResponse bad = y;
  bad.grid[3] += 0.013;
  d.response = bad;
  auto layout2 = response_layout(d.response);
  CHECK_THROWS(build_learner(concurrent_spec("x"), d, layout2,
                             Vector::Ones(layout2.n())));
}

TEST_CASE("fpc learner uses scores with an identity penalty") {
  Dataset d = sof_dataset(40, 21, 77);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());
  auto spec = fpc_spec("x");
  spec.npc = 3;
  auto b = build_learner(spec, d, layout, w);
  REQUIRE(b.modes.has_value());
  CHECK(b.design.cols() == 3);
  CHECK(b.penalty.isApprox(Matrix::Identity(3, 3)));
  CHECK(b.design.isApprox(b.modes->scores));
}

TEST_CASE("learner_design reproduces the training design") {
  Dataset d = fos_dataset(7, 6, 19);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());
  auto spec = compose_spec(ComposeOp::Kronecker, ols_spec({"z", "grp"}), bbs_spec(""));
  spec.df = 6.0;
  auto b = build_learner(spec, d, layout, w);
  Matrix again = learner_design(b, d, layout);
  CHECK((again - b.design).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spec validation errors") {
  Dataset d = sof_dataset(5, 9, 3);
  auto layout = response_layout(d.response);
  Vector w = Vector::Ones(layout.n());

  auto both = signal_spec("x");
  both.lambda = 1.0;  // df and lambda together are ambiguous
  CHECK_THROWS(build_learner(both, d, layout, w));

  CHECK_THROWS(build_learner(signal_spec("missing"), d, layout, w));
  CHECK_THROWS(build_learner(hist_spec("x"), d, layout, w));  // scalar response
}
