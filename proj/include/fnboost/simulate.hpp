#pragma once

#include <cstdint>
#include <string>

#include "fnboost/data.hpp"

namespace fnboost {

/// Scalar-on-function: y_i = integral x_i(s) beta(s) ds + noise on s in [0,1],
/// with beta(s) = sin(pi s). Covariate name: "X".
struct SofTruth {
  Vector s;
  Vector beta;
};
Dataset simulate_sof(int n, int r, double sigma, std::uint64_t seed,
                     SofTruth* truth = nullptr);

/// Function-on-scalar: y_i(t) = beta0(t) + z_i beta1(t) + group effect + noise
/// on t in [0,1]. Covariates: numeric "z", 3-level factor "group".
struct FosTruth {
  Vector t;
  Vector beta0;
  Vector beta1;
  Matrix group_effects;  // 3 x G, summing to zero per t
};
Dataset simulate_fos(int n, int g, double sigma, std::uint64_t seed,
                     FosTruth* truth = nullptr);

/// Historical effect: y_i(t) = sum_{s <= t - delta} x_i(s) beta(s,t) + noise on
/// the integer grid 0..g-1 with delta = 3. Covariate name: "X".
struct HistTruth {
  Vector s;
  Vector t;
  Matrix beta;  // R x G, zero outside s <= t - delta
  double delta = 3.0;
};
Dataset simulate_hist(int n, int g, double sigma, std::uint64_t seed,
                      HistTruth* truth = nullptr);

/// Write a dataset (and optional coefficient truths) as CSV files plus a
/// manifest.json into `dir`, 17 significant digits.
void write_dataset(const Dataset& data, const std::string& dir);
void write_truth_curve(const Vector& x, const Vector& value, const std::string& path);
void write_truth_surface(const Vector& s, const Vector& t, const Matrix& value,
                         const std::string& path);

}  // namespace fnboost
