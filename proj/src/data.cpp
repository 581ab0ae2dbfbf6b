#include "fnboost/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fnboost {

using json = nlohmann::json;

int Dataset::n_curves() const {
  if (std::holds_alternative<Vector>(response))
    return static_cast<int>(std::get<Vector>(response).size());
  if (std::holds_alternative<GridResponse>(response))
    return static_cast<int>(std::get<GridResponse>(response).values.rows());
  return std::get<LongResponse>(response).n_curves;
}

const ScalarCovariate& Dataset::scalar(const std::string& name) const {
  for (const auto& s : scalars)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown scalar covariate: " + name);
}

const FunctionalCovariate& Dataset::functional(const std::string& name) const {
  for (const auto& f : functionals)
    if (f.name == name) return f;
  throw std::invalid_argument("unknown functional covariate: " + name);
}

bool Dataset::has_scalar(const std::string& name) const {
  return std::any_of(scalars.begin(), scalars.end(),
                     [&](const auto& s) { return s.name == name; });
}

bool Dataset::has_functional(const std::string& name) const {
  return std::any_of(functionals.begin(), functionals.end(),
                     [&](const auto& f) { return f.name == name; });
}

namespace {

void check_finite(const Matrix& m, const std::string& name) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        throw std::runtime_error("non-finite value in '" + name + "' at row " +
                                 std::to_string(i + 1) + ", column " +
                                 std::to_string(j + 1));
}

void check_strictly_increasing(const Vector& g, const std::string& name) {
  for (Eigen::Index r = 1; r < g.size(); ++r)
    if (!(g[r] > g[r - 1]))
      throw std::runtime_error("grid of '" + name +
                               "' is not strictly increasing at index " +
                               std::to_string(r + 1));
}

}  // namespace

void Dataset::validate() const {
  const int N = n_curves();
  std::set<std::string> names;
  for (const auto& s : scalars) {
    if (!names.insert(s.name).second)
      throw std::runtime_error("duplicate covariate name: " + s.name);
    if (s.n() != N)
      throw std::runtime_error("scalar '" + s.name + "' has " +
                               std::to_string(s.n()) + " rows, expected " +
                               std::to_string(N));
    if (!s.is_factor) check_finite(s.values, s.name);
  }
  for (const auto& f : functionals) {
    if (!names.insert(f.name).second)
      throw std::runtime_error("duplicate covariate name: " + f.name);
    if (f.values.rows() != N)
      throw std::runtime_error("functional '" + f.name + "' has " +
                               std::to_string(f.values.rows()) +
                               " rows, expected " + std::to_string(N));
    if (f.grid.size() != f.values.cols())
      throw std::runtime_error("grid/column mismatch for '" + f.name + "': " +
                               std::to_string(f.grid.size()) + " grid points vs " +
                               std::to_string(f.values.cols()) + " columns");
    check_strictly_increasing(f.grid, f.name);
    check_finite(f.values, f.name);
  }
  if (std::holds_alternative<Vector>(response)) {
    check_finite(std::get<Vector>(response), "response");
  } else if (std::holds_alternative<GridResponse>(response)) {
    const auto& r = std::get<GridResponse>(response);
    if (r.grid.size() != r.values.cols())
      throw std::runtime_error("response grid/column mismatch: " +
                               std::to_string(r.grid.size()) + " vs " +
                               std::to_string(r.values.cols()));
    check_strictly_increasing(r.grid, "response");
    check_finite(r.values, "response");
  } else {
    const auto& r = std::get<LongResponse>(response);
    if (r.values.size() != r.times.size() ||
        r.values.size() != static_cast<Eigen::Index>(r.curve_id.size()))
      throw std::runtime_error("long response: values/times/id length mismatch");
    check_finite(r.values, "response");
    check_finite(r.times, "response times");
    std::vector<int> seen(r.n_curves, 0);
    for (size_t o = 0; o < r.curve_id.size(); ++o) {
      const int id = r.curve_id[o];
      if (id < 0 || id >= r.n_curves)
        throw std::runtime_error("long response: curve id out of range at row " +
                                 std::to_string(o + 1));
      ++seen[id];
    }
    for (int i = 0; i < r.n_curves; ++i)
      if (seen[i] == 0)
        throw std::runtime_error("long response: curve " + std::to_string(i + 1) +
                                 " has no observations");
    // per-curve times must be sorted
    std::vector<double> last(r.n_curves, -std::numeric_limits<double>::infinity());
    for (Eigen::Index o = 0; o < r.times.size(); ++o) {
      const int id = r.curve_id[o];
      if (r.times[o] < last[id])
        throw std::runtime_error("long response: times of curve " +
                                 std::to_string(id + 1) + " are not sorted");
      last[id] = r.times[o];
    }
  }
}

FunctionalCovariate center_functional(const FunctionalCovariate& x) {
  if (x.values.rows() < 2)
    throw std::invalid_argument("center_functional: need N >= 2");
  FunctionalCovariate out = x;
  out.values.rowwise() -= x.values.colwise().mean();
  return out;
}

LongResponse grid_to_long(const GridResponse& r) {
  const int N = static_cast<int>(r.values.rows());
  const int G = static_cast<int>(r.values.cols());
  LongResponse out;
  out.n_curves = N;
  out.values.resize(static_cast<Eigen::Index>(N) * G);
  out.times.resize(static_cast<Eigen::Index>(N) * G);
  out.curve_id.resize(static_cast<size_t>(N) * G);
  for (int g = 0; g < G; ++g)
    for (int i = 0; i < N; ++i) {
      const Eigen::Index o = static_cast<Eigen::Index>(g) * N + i;
      out.values[o] = r.values(i, g);
      out.times[o] = r.grid[g];
      out.curve_id[o] = i;
    }
  return out;
}

GridResponse long_to_grid(const LongResponse& r) {
  const int N = r.n_curves;
  if (r.values.size() % N != 0)
    throw std::invalid_argument("long_to_grid: obs count not divisible by N");
  const int G = static_cast<int>(r.values.size()) / N;
  GridResponse out;
  out.values.resize(N, G);
  out.grid.resize(G);
  for (int g = 0; g < G; ++g) {
    out.grid[g] = r.times[static_cast<Eigen::Index>(g) * N];
    for (int i = 0; i < N; ++i) {
      const Eigen::Index o = static_cast<Eigen::Index>(g) * N + i;
      if (r.curve_id[o] != i || r.times[o] != out.grid[g])
        throw std::invalid_argument("long_to_grid: layout is not a complete time-major grid");
      out.values(i, g) = r.values[o];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

int CsvTable::col(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  throw std::runtime_error("CSV is missing column '" + name + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& path,
                                        size_t lineno) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') { cell += '"'; ++i; }
        else quoted = false;
      } else cell += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  if (quoted)
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unterminated quote");
  cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& cell, const std::string& context, size_t row) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw std::runtime_error(context + ": cannot parse '" + cell + "' as number at row " +
                             std::to_string(row + 1));
  return v;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  CsvTable t;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cells = split_csv_line(line, path, lineno);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": ragged row (" +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(t.header.size()) + ")");
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw std::runtime_error(path + ": empty CSV (header row mandatory)");
  return t;
}

Matrix csv_to_matrix(const CsvTable& t, const std::string& context) {
  Matrix m(t.rows.size(), t.header.size());
  for (size_t i = 0; i < t.rows.size(); ++i)
    for (size_t j = 0; j < t.header.size(); ++j)
      m(i, j) = parse_double(t.rows[i][j], context, i);
  return m;
}

// ---------------------------------------------------------------------------
// Manifest ingestion

namespace {

std::string resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_absolute()) return p.string();
  return (base / p).string();
}

Vector read_column_vector(const std::string& path, const std::string& context) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 1)
    throw std::runtime_error(context + ": expected a single-column CSV in " + path);
  Vector v(t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i)
    v[i] = parse_double(t.rows[i][0], context, i);
  return v;
}

ScalarCovariate read_scalar(const std::string& name, const std::string& path) {
  const CsvTable t = read_csv(path);
  const int j = t.header.size() == 1 ? 0 : t.col(name);
  // numeric unless some cell fails to parse; factors are level-ordered
  // lexicographically
  bool numeric = true;
  for (const auto& row : t.rows) {
    char* end = nullptr;
    std::strtod(row[j].c_str(), &end);
    if (row[j].empty() || end != row[j].c_str() + row[j].size()) { numeric = false; break; }
  }
  ScalarCovariate s;
  s.name = name;
  if (numeric) {
    s.values.resize(t.rows.size());
    for (size_t i = 0; i < t.rows.size(); ++i)
      s.values[i] = parse_double(t.rows[i][j], name, i);
  } else {
    s.is_factor = true;
    std::set<std::string> lv;
    for (const auto& row : t.rows) lv.insert(row[j]);
    s.levels.assign(lv.begin(), lv.end());
    std::map<std::string, int> idx;
    for (size_t k = 0; k < s.levels.size(); ++k) idx[s.levels[k]] = static_cast<int>(k);
    for (const auto& row : t.rows) s.level_index.push_back(idx[row[j]]);
  }
  return s;
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest parse error in " + manifest_path + ": " + e.what());
  }
  const auto base = std::filesystem::path(manifest_path).parent_path();

  Dataset d;
  const auto& resp = m.at("response");
  const std::string layout = resp.at("layout").get<std::string>();
  if (layout == "scalar") {
    d.response = read_column_vector(resolve(base, resp.at("file")), "response");
  } else if (layout == "grid") {
    GridResponse g;
    g.values = csv_to_matrix(read_csv(resolve(base, resp.at("file"))), "response");
    g.grid = read_column_vector(resolve(base, resp.at("grid_file")), "response grid");
    d.response = std::move(g);
  } else if (layout == "long") {
    const CsvTable t = read_csv(resolve(base, resp.at("file")));
    const std::string idc = resp.value("id_column", "id");
    const std::string tc = resp.value("time_column", "time");
    const std::string vc = resp.value("value_column", "value");
    const int ji = t.col(idc), jt = t.col(tc), jv = t.col(vc);
    LongResponse r;
    r.values.resize(t.rows.size());
    r.times.resize(t.rows.size());
    r.curve_id.resize(t.rows.size());
    int maxid = 0;
    for (size_t o = 0; o < t.rows.size(); ++o) {
      r.values[o] = parse_double(t.rows[o][jv], "response value", o);
      r.times[o] = parse_double(t.rows[o][jt], "response time", o);
      const int id = static_cast<int>(parse_double(t.rows[o][ji], "response id", o));
      if (id < 1)
        throw std::runtime_error("long response: ids must form a contiguous 1..N set (row " +
                                 std::to_string(o + 1) + ")");
      r.curve_id[o] = id - 1;
      maxid = std::max(maxid, id);
    }
    r.n_curves = maxid;
    d.response = std::move(r);
  } else {
    throw std::runtime_error("unknown response layout: " + layout);
  }

  for (const auto& s : m.value("scalars", json::array()))
    d.scalars.push_back(read_scalar(s.at("name"), resolve(base, s.at("file"))));

  for (const auto& f : m.value("functionals", json::array())) {
    FunctionalCovariate fc;
    fc.name = f.at("name");
    fc.values = csv_to_matrix(read_csv(resolve(base, f.at("file"))), fc.name);
    fc.grid = read_column_vector(resolve(base, f.at("grid_file")), fc.name + " grid");
    d.functionals.push_back(std::move(fc));
  }

  d.validate();
  return d;
}

}  // namespace fnboost
