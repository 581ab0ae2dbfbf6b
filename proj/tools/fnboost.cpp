#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "fnboost/config.hpp"
#include "fnboost/model_io.hpp"
#include "fnboost/resampling.hpp"
#include "fnboost/simulate.hpp"

namespace {

using fnboost::Vector;
using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return j;
}

void write_file(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> grid;
  if (text.empty()) return grid;
  if (text.find(':') != std::string::npos) {
    int lo = 0, hi = 0, step = 1;
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    lo = std::stoi(text.substr(0, c1));
    hi = std::stoi(c2 == std::string::npos ? text.substr(c1 + 1)
                                           : text.substr(c1 + 1, c2 - c1 - 1));
    if (c2 != std::string::npos) step = std::stoi(text.substr(c2 + 1));
    if (step < 1 || hi < lo) throw std::runtime_error("invalid iteration grid: " + text);
    for (int m = lo; m <= hi; m += step) grid.push_back(m);
  } else {
    size_t pos = 0;
    while (pos < text.size()) {
      const auto comma = text.find(',', pos);
      grid.push_back(std::stoi(text.substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return grid;
}

int effective_jobs(int jobs) {
  if (const char* cap = std::getenv("FNBOOST_THREADS")) {
    const int c = std::atoi(cap);
    if (c > 0) jobs = std::min(jobs, c);
  }
  return std::max(1, jobs);
}

std::string coef_csv(const std::vector<fnboost::CoefEval>& evals) {
  std::string s = "learner,s,t,value\n";
  for (const auto& e : evals) {
    switch (e.kind) {
      case fnboost::CoefEval::Kind::Constant:
        for (Eigen::Index r = 0; r < e.values.rows(); ++r)
          s += "\"" + e.label + "\",,," + fmt(e.values(r, 0)) + "\n";
        break;
      case fnboost::CoefEval::Kind::Curve:
        for (Eigen::Index r = 0; r < e.values.rows(); ++r)
          s += "\"" + e.label + "\"," + fmt(e.x1[r]) + ",," + fmt(e.values(r, 0)) + "\n";
        break;
      case fnboost::CoefEval::Kind::Surface:
        for (Eigen::Index r = 0; r < e.values.rows(); ++r)
          for (Eigen::Index c = 0; c < e.values.cols(); ++c)
            s += "\"" + e.label + "\"," + fmt(e.x1[r]) + "," + fmt(e.x2[c]) + "," +
                 fmt(e.values(r, c)) + "\n";
        break;
    }
  }
  return s;
}

void print_summary(const fnboost::FittedModel& model) {
  std::cout << "family: " << model.spec.family << "\n";
  std::cout << "iterations: " << model.mstop() << "\n";
  std::cout << "offset: " << (model.offset_is_smooth ? "smooth" : "scalar") << "\n";
  std::vector<int> counts(model.learners.size(), 0);
  for (const auto& e : model.path) ++counts[e.learner];
  for (size_t j = 0; j < model.learners.size(); ++j)
    std::cout << "  " << model.learners[j].label << ": df=" << model.learners[j].df
              << " lambda=" << model.learners[j].lambda << " selected=" << counts[j]
              << "\n";
  std::cout << "final risk: " << fmt(model.risk_path[model.risk_path.size() - 1])
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Component-wise gradient boosting for functional regression"};
  app.require_subcommand(1);

  std::string config_path, data_path, model_out, model_in, out_dir = ".", grid_text;
  std::uint64_t seed = 1;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd, bool needs_config, bool needs_data) {
    if (needs_config)
      cmd->add_option("--config", config_path, "model configuration JSON")->required();
    if (needs_data)
      cmd->add_option("--data", data_path, "dataset manifest JSON")->required();
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--jobs", jobs, "parallel fold workers");
  };

  auto* cmd_fit = app.add_subcommand("fit", "fit a model");
  add_common(cmd_fit, true, true);
  cmd_fit->add_option("--model-out", model_out, "model file to write")->required();

  auto* cmd_cv = app.add_subcommand("cv", "out-of-bag risk over the iteration path");
  add_common(cmd_cv, true, true);
  int cv_folds = 10;
  std::string cv_type = "bootstrap", cv_mode = "refit";
  cmd_cv->add_option("--grid", grid_text, "iterations, e.g. 1:500 or 10,20,50")
      ->required();
  cmd_cv->add_option("--folds", cv_folds, "number of folds");
  cmd_cv->add_option("--type", cv_type, "bootstrap | kfold | subsampling");
  cmd_cv->add_option("--mode", cv_mode, "refit | fixed");

  auto* cmd_predict = app.add_subcommand("predict", "predictions for new data");
  add_common(cmd_predict, false, true);
  cmd_predict->add_option("--model-in", model_in, "model file to read")->required();
  bool response_scale = false;
  cmd_predict->add_flag("--response-scale", response_scale,
                        "apply the inverse link");

  auto* cmd_coef = app.add_subcommand("coef", "coefficient functions on a grid");
  add_common(cmd_coef, false, false);
  cmd_coef->add_option("--model-in", model_in, "model file to read")->required();
  int n1 = 40, n2 = 40;
  cmd_coef->add_option("--n1", n1, "grid points, first direction");
  cmd_coef->add_option("--n2", n2, "grid points, second direction");

  auto* cmd_bootstrap = app.add_subcommand("bootstrap", "nested-bootstrap bands");
  add_common(cmd_bootstrap, true, true);
  int b_outer = 100, b_inner = 25;
  std::string quantiles_text = "0.05,0.5,0.95", inner_type = "bootstrap";
  cmd_bootstrap->add_option("--grid", grid_text, "iteration grid")->required();
  cmd_bootstrap->add_option("--b-outer", b_outer, "outer folds");
  cmd_bootstrap->add_option("--b-inner", b_inner, "inner folds");
  cmd_bootstrap->add_option("--quantiles", quantiles_text, "band quantiles");
  cmd_bootstrap->add_option("--type-inner", inner_type, "bootstrap | kfold");

  auto* cmd_simulate = app.add_subcommand("simulate", "synthetic dataset + truth");
  add_common(cmd_simulate, false, false);
  std::string scenario = "sof";
  int sim_n = 200, sim_r = 101, sim_g = 40;
  double sim_sigma = 0.1;
  cmd_simulate->add_option("--scenario", scenario, "sof | fos | hist");
  cmd_simulate->add_option("--n", sim_n, "number of curves");
  cmd_simulate->add_option("--r", sim_r, "covariate grid points (sof)");
  cmd_simulate->add_option("--g", sim_g, "response grid points (fos/hist)");
  cmd_simulate->add_option("--sigma", sim_sigma, "noise standard deviation");

  CLI11_PARSE(app, argc, argv);

  try {
    jobs = effective_jobs(jobs);

    if (cmd_fit->parsed()) {
      fnboost::Dataset data = fnboost::load_dataset(data_path);
      fnboost::ModelSpec spec = fnboost::model_spec_from_json(read_json_file(config_path));
      fnboost::FittedModel model = fnboost::fit(spec, data);
      fnboost::save_model(model, model_out);
      print_summary(model);
    } else if (cmd_cv->parsed()) {
      fnboost::Dataset data = fnboost::load_dataset(data_path);
      fnboost::ModelSpec spec = fnboost::model_spec_from_json(read_json_file(config_path));
      fnboost::FoldMatrix::Type type;
      if (cv_type == "bootstrap") type = fnboost::FoldMatrix::Type::Bootstrap;
      else if (cv_type == "kfold") type = fnboost::FoldMatrix::Type::Kfold;
      else if (cv_type == "subsampling") type = fnboost::FoldMatrix::Type::Subsampling;
      else throw std::runtime_error("unknown fold type: " + cv_type);
      const fnboost::CvMode mode = cv_mode == "fixed"
                                       ? fnboost::CvMode::FixedPreprocessing
                                       : fnboost::CvMode::RefitAll;
      const auto layout = fnboost::response_layout(data.response);
      const auto folds = fnboost::make_folds(layout.n_curves, type, cv_folds, seed);
      const auto grid = parse_grid(grid_text);
      const auto cv = fnboost::oob_risk_curves(spec, data, folds, grid, mode, jobs);
      std::string csv = "fold";
      for (int m : cv.grid) csv += ",m" + std::to_string(m);
      csv += "\n";
      for (Eigen::Index b = 0; b < cv.risk.rows(); ++b) {
        csv += std::to_string(b + 1);
        for (Eigen::Index c = 0; c < cv.risk.cols(); ++c)
          csv += "," + fmt(cv.risk(b, c));
        csv += "\n";
      }
      write_file(out_dir + "/risk.csv", csv);
      json sel{{"mstop", cv.mstop_opt}, {"boundary", cv.boundary}};
      write_file(out_dir + "/selected.json", sel.dump(2) + "\n");
      std::cout << "selected mstop: " << cv.mstop_opt
                << (cv.boundary ? " (boundary; enlarge the grid)" : "") << "\n";
    } else if (cmd_predict->parsed()) {
      fnboost::FittedModel model = fnboost::load_model(model_in);
      fnboost::Dataset data = fnboost::load_dataset(data_path);
      const Vector pred =
          fnboost::predict(model, data, std::nullopt, response_scale);
      const auto layout = fnboost::response_layout(data.response);
      std::string csv = layout.is_scalar ? "id,value\n" : "id,time,value\n";
      for (Eigen::Index o = 0; o < pred.size(); ++o) {
        csv += std::to_string(layout.curve_id[o] + 1);
        if (!layout.is_scalar) csv += "," + fmt(layout.times[o]);
        csv += "," + fmt(pred[o]) + "\n";
      }
      write_file(out_dir + "/predictions.csv", csv);
      std::cout << "wrote " << pred.size() << " predictions\n";
    } else if (cmd_coef->parsed()) {
      fnboost::FittedModel model = fnboost::load_model(model_in);
      write_file(out_dir + "/coefficients.csv",
                 coef_csv(fnboost::coef_eval(model, n1, n2)));
      std::cout << "wrote coefficient grids for " << model.learners.size()
                << " learners\n";
    } else if (cmd_bootstrap->parsed()) {
      fnboost::Dataset data = fnboost::load_dataset(data_path);
      fnboost::ModelSpec spec = fnboost::model_spec_from_json(read_json_file(config_path));
      std::vector<double> quantiles;
      for (size_t pos = 0; pos < quantiles_text.size();) {
        const auto comma = quantiles_text.find(',', pos);
        quantiles.push_back(std::stod(quantiles_text.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      const auto inner = inner_type == "kfold" ? fnboost::FoldMatrix::Type::Kfold
                                               : fnboost::FoldMatrix::Type::Bootstrap;
      const auto result = fnboost::bootstrap_ci(spec, data, b_outer, b_inner,
                                                parse_grid(grid_text), quantiles, seed,
                                                inner, jobs);
      std::string csv = "learner,quantile,s,t,value\n";
      for (const auto& band : result.bands)
        for (size_t q = 0; q < band.quantiles.size(); ++q)
          for (Eigen::Index r = 0; r < band.values[q].rows(); ++r)
            for (Eigen::Index c = 0; c < band.values[q].cols(); ++c) {
              csv += "\"" + band.label + "\"," + fmt(band.quantiles[q]) + ",";
              csv += band.x1.size() ? fmt(band.x1[r]) : "";
              csv += ",";
              csv += band.x2.size() ? fmt(band.x2[c]) : "";
              csv += "," + fmt(band.values[q](r, c)) + "\n";
            }
      write_file(out_dir + "/bands.csv", csv);
      std::string mstops = "fold,mstop\n";
      for (size_t b = 0; b < result.selected_mstop.size(); ++b)
        mstops += std::to_string(b + 1) + "," +
                  std::to_string(result.selected_mstop[b]) + "\n";
      write_file(out_dir + "/mstops.csv", mstops);
      std::cout << "wrote bands for " << result.bands.size() << " coefficients\n";
    } else if (cmd_simulate->parsed()) {
      if (scenario == "sof") {
        fnboost::SofTruth truth;
        const auto data = fnboost::simulate_sof(sim_n, sim_r, sim_sigma, seed, &truth);
        fnboost::write_dataset(data, out_dir);
        fnboost::write_truth_curve(truth.s, truth.beta, out_dir + "/truth_beta.csv");
      } else if (scenario == "fos") {
        fnboost::FosTruth truth;
        const auto data = fnboost::simulate_fos(sim_n, sim_g, sim_sigma, seed, &truth);
        fnboost::write_dataset(data, out_dir);
        fnboost::write_truth_curve(truth.t, truth.beta0, out_dir + "/truth_beta0.csv");
        fnboost::write_truth_curve(truth.t, truth.beta1, out_dir + "/truth_beta1.csv");
      } else if (scenario == "hist") {
        fnboost::HistTruth truth;
        const auto data = fnboost::simulate_hist(sim_n, sim_g, sim_sigma, seed, &truth);
        fnboost::write_dataset(data, out_dir);
        fnboost::write_truth_surface(truth.s, truth.t, truth.beta,
                                     out_dir + "/truth_beta.csv");
      } else {
        throw std::runtime_error("unknown scenario: " + scenario);
      }
      std::cout << "wrote dataset to " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    json diag{{"error", e.what()}};
    std::cerr << diag.dump() << "\n";
    return 1;
  }
  return 0;
}
