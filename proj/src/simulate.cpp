#include "fnboost/simulate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <stdexcept>

namespace fnboost {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Smooth random curves: low-frequency Fourier series with decaying weights.
Matrix random_curves(int n, const Vector& grid, double span, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x = Matrix::Zero(n, grid.size());
  for (int i = 0; i < n; ++i)
    for (int k = 1; k <= 5; ++k) {
      const double a = gauss(rng) / k, b = gauss(rng) / k;
      for (Eigen::Index r = 0; r < grid.size(); ++r) {
        const double arg = k * kPi * (grid[r] - grid[0]) / span;
        x(i, r) += a * std::sin(arg) + b * std::cos(arg);
      }
    }
  return x;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string matrix_csv(const Matrix& m, const std::string& col_prefix) {
  std::string s;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    s += (c ? "," : "") + col_prefix + std::to_string(c + 1);
  s += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += (c ? "," : "") + fmt(m(r, c));
    s += "\n";
  }
  return s;
}

std::string vector_csv(const Vector& v, const std::string& name) {
  std::string s = name + "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += fmt(v[i]) + "\n";
  return s;
}

}  // namespace

Dataset simulate_sof(int n, int r, double sigma, std::uint64_t seed, SofTruth* truth) {
  if (n < 2 || r < 3) throw std::invalid_argument("simulate_sof: n >= 2, r >= 3");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector s = Vector::LinSpaced(r, 0.0, 1.0);
  Matrix x = random_curves(n, s, 1.0, rng);
  Vector beta(r);
  for (int j = 0; j < r; ++j) beta[j] = std::sin(kPi * s[j]);

  const Vector delta = integration_weights(s, IntScheme::Trapezoid).weights;
  Vector y(n);
  for (int i = 0; i < n; ++i)
    y[i] = (x.row(i).transpose().cwiseProduct(delta)).dot(beta) + sigma * gauss(rng);

  Dataset data;
  data.functionals.push_back(FunctionalCovariate{"X", std::move(x), s});
  data.response = y;
  if (truth) {
    truth->s = s;
    truth->beta = beta;
  }
  return data;
}

Dataset simulate_fos(int n, int g, double sigma, std::uint64_t seed, FosTruth* truth) {
  if (n < 3 || g < 3) throw std::invalid_argument("simulate_fos: n >= 3, g >= 3");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector t = Vector::LinSpaced(g, 0.0, 1.0);
  Vector beta0(g), beta1(g);
  for (int j = 0; j < g; ++j) {
    beta0[j] = 2.0 + std::sin(2.0 * kPi * t[j]);
    beta1[j] = std::cos(kPi * t[j]);
  }
  // three group deviation curves summing to zero at every t
  Matrix geff(3, g);
  for (int j = 0; j < g; ++j) {
    geff(0, j) = std::sin(kPi * t[j]);
    geff(1, j) = -0.5 * std::sin(kPi * t[j]) + 0.3 * std::cos(2.0 * kPi * t[j]);
    geff(2, j) = -geff(0, j) - geff(1, j);
  }

  Vector z(n);
  std::vector<int> group(n);
  for (int i = 0; i < n; ++i) {
    z[i] = gauss(rng);
    group[i] = i % 3;
  }
  Matrix y(n, g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j)
      y(i, j) = beta0[j] + z[i] * beta1[j] + geff(group[i], j) + sigma * gauss(rng);

  Dataset data;
  ScalarCovariate zc;
  zc.name = "z";
  zc.values = z;
  data.scalars.push_back(std::move(zc));
  ScalarCovariate gc;
  gc.name = "group";
  gc.is_factor = true;
  gc.levels = {"g1", "g2", "g3"};
  gc.level_index = group;
  data.scalars.push_back(std::move(gc));
  data.response = GridResponse{std::move(y), t};
  if (truth) {
    truth->t = t;
    truth->beta0 = beta0;
    truth->beta1 = beta1;
    truth->group_effects = geff;
  }
  return data;
}

Dataset simulate_hist(int n, int g, double sigma, std::uint64_t seed, HistTruth* truth) {
  if (n < 2 || g < 8) throw std::invalid_argument("simulate_hist: n >= 2, g >= 8");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double delta_lag = 3.0;
  Vector s = Vector::LinSpaced(g, 0.0, g - 1.0);
  Matrix x = random_curves(n, s, g - 1.0, rng);

  Matrix beta = Matrix::Zero(g, g);  // beta(s_r, t_j)
  for (int r = 0; r < g; ++r)
    for (int j = 0; j < g; ++j)
      if (s[r] <= s[j] - delta_lag)
        beta(r, j) = 2.0 * std::sin(kPi * s[j] / (g - 1.0)) *
                     std::cos(kPi * s[r] / (g - 1.0));

  Matrix y(n, g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j) {
      double acc = 0.0;
      for (int r = 0; r < g; ++r) acc += x(i, r) * beta(r, j);  // unit grid cells
      y(i, j) = acc + sigma * gauss(rng);
    }

  Dataset data;
  data.functionals.push_back(FunctionalCovariate{"X", std::move(x), s});
  data.response = GridResponse{std::move(y), s};
  if (truth) {
    truth->s = s;
    truth->t = s;
    truth->beta = beta;
    truth->delta = delta_lag;
  }
  return data;
}

void write_dataset(const Dataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;

  if (std::holds_alternative<Vector>(data.response)) {
    write_text(dir + "/response.csv", vector_csv(std::get<Vector>(data.response), "y"));
    manifest["response"] = {{"layout", "scalar"}, {"file", "response.csv"}};
  } else if (std::holds_alternative<GridResponse>(data.response)) {
    const auto& r = std::get<GridResponse>(data.response);
    write_text(dir + "/response.csv", matrix_csv(r.values, "t"));
    write_text(dir + "/response_grid.csv", vector_csv(r.grid, "t"));
    manifest["response"] = {{"layout", "grid"},
                            {"file", "response.csv"},
                            {"grid_file", "response_grid.csv"}};
  } else {
    const auto& r = std::get<LongResponse>(data.response);
    std::string s = "id,time,value\n";
    for (Eigen::Index o = 0; o < r.values.size(); ++o)
      s += std::to_string(r.curve_id[o] + 1) + "," + fmt(r.times[o]) + "," +
           fmt(r.values[o]) + "\n";
    write_text(dir + "/response.csv", s);
    manifest["response"] = {{"layout", "long"}, {"file", "response.csv"}};
  }

  manifest["scalars"] = nlohmann::json::array();
  for (const auto& z : data.scalars) {
    const std::string file = z.name + ".csv";
    std::string s = z.name + "\n";
    if (z.is_factor)
      for (int idx : z.level_index) s += "\"" + z.levels[idx] + "\"\n";
    else
      for (Eigen::Index i = 0; i < z.values.size(); ++i) s += fmt(z.values[i]) + "\n";
    write_text(dir + "/" + file, s);
    manifest["scalars"].push_back({{"name", z.name}, {"file", file}});
  }

  manifest["functionals"] = nlohmann::json::array();
  for (const auto& x : data.functionals) {
    const std::string file = x.name + ".csv", grid_file = x.name + "_grid.csv";
    write_text(dir + "/" + file, matrix_csv(x.values, "s"));
    write_text(dir + "/" + grid_file, vector_csv(x.grid, "s"));
    manifest["functionals"].push_back(
        {{"name", x.name}, {"file", file}, {"grid_file", grid_file}});
  }
  write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
}

void write_truth_curve(const Vector& x, const Vector& value, const std::string& path) {
  std::string s = "x,value\n";
  for (Eigen::Index i = 0; i < x.size(); ++i)
    s += fmt(x[i]) + "," + fmt(value[i]) + "\n";
  write_text(path, s);
}

void write_truth_surface(const Vector& s_grid, const Vector& t_grid, const Matrix& value,
                         const std::string& path) {
  std::string s = "s,t,value\n";
  for (Eigen::Index r = 0; r < s_grid.size(); ++r)
    for (Eigen::Index c = 0; c < t_grid.size(); ++c)
      s += fmt(s_grid[r]) + "," + fmt(t_grid[c]) + "," + fmt(value(r, c)) + "\n";
  write_text(path, s);
}

}  // namespace fnboost
