#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "fnboost/data.hpp"

namespace fnboost {

/// Loss, negative gradient, link pair and offset rule for the modeled
/// characteristic of the response distribution.
struct Family {
  std::string name;
  std::function<double(double y, double f)> loss;
  std::function<double(double y, double f)> negative_gradient;
  std::function<double(double mu)> link;
  std::function<double(double eta)> inverse_link;
  std::function<double(const Vector& y, const Vector& w)> offset;
  double default_nu = 0.1;
  /// Optional per-iteration hook (adaptive Huber delta).
  std::function<void(const Vector& y, const Vector& f, const Vector& w)> pre_iteration;
  /// Optional response-domain check, throws on violation.
  std::function<void(const Vector& y)> validate;
};

Family gaussian();
Family laplace();
Family quantile(double tau);
Family huber(std::optional<double> delta = std::nullopt);
Family binomial();
Family poisson();

/// "gaussian" | "laplace" | "quantile:<tau>" | "huber" | "binomial" | "poisson"
Family family_from_name(const std::string& name);

/// Sum of weight * loss over aligned observations.
double integrated_risk(const Family& fam, const Vector& weights, const Vector& y,
                       const Vector& fitted);

/// Risk of a fitted long/grid/scalar response with numInt integration weights.
double integrated_risk(const Family& fam, const Response& response, const Vector& fitted,
                       IntScheme num_int);

/// Per-long-observation loss integration weights for a response layout.
Vector response_integration_weights(const Response& response, IntScheme num_int);

double weighted_mean(const Vector& y, const Vector& w);
double weighted_quantile(const Vector& y, const Vector& w, double tau);
double weighted_median(const Vector& y, const Vector& w);

}  // namespace fnboost
