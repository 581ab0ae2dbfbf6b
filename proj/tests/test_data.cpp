#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fnboost/data.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace fnboost;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("fnboost_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const std::string p = (path / name).string();
    std::ofstream(p) << content;
    return p;
  }
};

}  // namespace

TEST_CASE("csv parsing") {
  TempDir tmp;
  const std::string p = tmp.file("t.csv", "a,b,c\n1,2.5,-3e-2\n4,5,6\n");
  CsvTable t = read_csv(p);
  REQUIRE(t.header.size() == 3);
  CHECK(t.col("b") == 1);
  CHECK_THROWS(t.col("missing"));
  Matrix m = csv_to_matrix(t, "t.csv");
  REQUIRE(m.rows() == 2);
  CHECK(m(0, 2) == doctest::Approx(-0.03));
  CHECK(m(1, 0) == 4.0);
}

TEST_CASE("csv ragged row rejected") {
  TempDir tmp;
  const std::string p = tmp.file("bad.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS(read_csv(p));
}

TEST_CASE("grid/long reshape round trip") {
  GridResponse g;
  g.values = Matrix(3, 4);
  g.values << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  g.grid = Vector::LinSpaced(4, 0.0, 1.0);

  LongResponse l = grid_to_long(g);
  REQUIRE(l.values.size() == 12);
  CHECK(l.n_curves == 3);
  // time-major stacking: observation o = g*N + i
  for (int t = 0; t < 4; ++t)
    for (int i = 0; i < 3; ++i) {
      const int o = t * 3 + i;
      CHECK(l.values[o] == g.values(i, t));
      CHECK(l.times[o] == g.grid[t]);
      CHECK(l.curve_id[o] == i);
    }

  GridResponse back = long_to_grid(l);
  CHECK(back.values.isApprox(g.values));
  CHECK(back.grid.isApprox(g.grid));
}

TEST_CASE("long_to_grid rejects incomplete layouts") {
  LongResponse l;
  l.values = Vector::Ones(3);
  l.times = Vector::LinSpaced(3, 0, 1);
  l.curve_id = {0, 0, 1};
  l.n_curves = 2;
  CHECK_THROWS(long_to_grid(l));
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.response = Vector::Ones(3);

  ScalarCovariate z;
  z.name = "z";
  z.values = Vector::Ones(2);  // wrong length
  d.scalars.push_back(z);
  CHECK_THROWS(d.validate());

  d.scalars[0].values = Vector::Ones(3);
  CHECK_NOTHROW(d.validate());
  CHECK(d.n_curves() == 3);
  CHECK(d.has_scalar("z"));
  CHECK(!d.has_scalar("w"));
  CHECK_THROWS(d.scalar("w"));

  FunctionalCovariate x;
  x.name = "x";
  x.values = Matrix::Ones(3, 5);
  x.grid = Vector::LinSpaced(5, 0, 1);
  d.functionals.push_back(x);
  CHECK_NOTHROW(d.validate());

  d.functionals[0].grid[2] = d.functionals[0].grid[1];  // not increasing
  CHECK_THROWS(d.validate());
}

TEST_CASE("manifest loading with factor covariate") {
  TempDir tmp;
  tmp.file("y.csv", "y\n1\n2\n3\n");
  tmp.file("z.csv", "z,grp\n0.5,b\n1.5,a\n2.5,b\n");
  tmp.file("x.csv", "s1,s2,s3\n1,2,3\n4,5,6\n7,8,9\n");
  tmp.file("x_grid.csv", "s\n0\n0.5\n1\n");
  const std::string manifest = tmp.file("manifest.json", R"({
    "response": {"layout": "scalar", "file": "y.csv"},
    "scalars": [{"name": "z", "file": "z.csv"}, {"name": "grp", "file": "z.csv"}],
    "functionals": [{"name": "x", "file": "x.csv", "grid_file": "x_grid.csv"}]
  })");

  Dataset d = load_dataset(manifest);
  CHECK(d.n_curves() == 3);
  CHECK(std::get<Vector>(d.response)[2] == 3.0);

  const ScalarCovariate& g = d.scalar("grp");
  REQUIRE(g.is_factor);
  REQUIRE(g.levels.size() == 2);
  CHECK(g.levels[0] == "a");  // lexicographic level order
  CHECK(g.level_index == std::vector<int>{1, 0, 1});

  CHECK(d.scalar("z").values[1] == doctest::Approx(1.5));
  CHECK(d.functional("x").values(2, 1) == 8.0);
  CHECK(d.functional("x").grid[1] == doctest::Approx(0.5));
}

TEST_CASE("center_functional subtracts column means") {
  FunctionalCovariate x;
  x.name = "x";
  x.values = Matrix(2, 3);
  x.values << 1, 2, 3, 3, 6, 9;
  x.grid = Vector::LinSpaced(3, 0, 1);
  FunctionalCovariate c = center_functional(x);
  CHECK(c.values.colwise().sum().cwiseAbs().maxCoeff() < 1e-14);
  CHECK(c.values(0, 2) == doctest::Approx(-3.0));
}
