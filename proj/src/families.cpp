#include "fnboost/families.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fnboost {

double weighted_mean(const Vector& y, const Vector& w) {
  const double sw = w.sum();
  if (sw <= 0) throw std::invalid_argument("weighted_mean: weights sum to zero");
  return y.dot(w) / sw;
}

double weighted_quantile(const Vector& y, const Vector& w, double tau) {
  if (y.size() == 0) throw std::invalid_argument("weighted_quantile: empty input");
  std::vector<Eigen::Index> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });
  const double total = w.sum();
  double cum = 0.0;
  for (Eigen::Index k : idx) {
    cum += w[k];
    if (cum >= tau * total - 1e-12 * total) return y[k];
  }
  return y[idx.back()];
}

double weighted_median(const Vector& y, const Vector& w) {
  return weighted_quantile(y, w, 0.5);
}

namespace {

double identity(double x) { return x; }

double logit(double p) {
  const double q = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return std::log(q / (1.0 - q));
}

double expit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

Family gaussian() {
  Family f;
  f.name = "gaussian";
  f.loss = [](double y, double eta) { return 0.5 * (y - eta) * (y - eta); };
  f.negative_gradient = [](double y, double eta) { return y - eta; };
  f.link = identity;
  f.inverse_link = identity;
  f.offset = [](const Vector& y, const Vector& w) { return weighted_mean(y, w); };
  return f;
}

Family laplace() {
  Family f;
  f.name = "laplace";
  f.loss = [](double y, double eta) { return std::abs(y - eta); };
  f.negative_gradient = [](double y, double eta) {
    const double r = y - eta;
    return r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
  };
  f.link = identity;
  f.inverse_link = identity;
  f.offset = [](const Vector& y, const Vector& w) { return weighted_median(y, w); };
  return f;
}

Family quantile(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("quantile: tau must lie in (0,1)");
  Family f;
  f.name = "quantile:" + std::to_string(tau);
  f.loss = [tau](double y, double eta) {
    const double r = y - eta;
    return r * (tau - (r < 0 ? 1.0 : 0.0));
  };
  f.negative_gradient = [tau](double y, double eta) {
    const double r = y - eta;
    return r > 0 ? tau : (r < 0 ? tau - 1.0 : 0.0);
  };
  f.link = identity;
  f.inverse_link = identity;
  f.offset = [tau](const Vector& y, const Vector& w) {
    return weighted_quantile(y, w, tau);
  };
  return f;
}

Family huber(std::optional<double> delta) {
  if (delta && *delta <= 0) throw std::invalid_argument("huber: delta must be > 0");
  Family f;
  f.name = "huber";
  // adaptive delta: weighted median of |residuals| each iteration
  auto d = std::make_shared<double>(delta.value_or(1.0));
  f.loss = [d](double y, double eta) {
    const double r = std::abs(y - eta);
    return r <= *d ? 0.5 * r * r : *d * (r - 0.5 * *d);
  };
  f.negative_gradient = [d](double y, double eta) {
    const double r = y - eta;
    return std::abs(r) <= *d ? r : *d * (r > 0 ? 1.0 : -1.0);
  };
  f.link = identity;
  f.inverse_link = identity;
  f.offset = [](const Vector& y, const Vector& w) { return weighted_median(y, w); };
  if (!delta) {
    f.pre_iteration = [d](const Vector& y, const Vector& f_, const Vector& w) {
      Vector absr = (y - f_).cwiseAbs();
      *d = std::max(weighted_median(absr, w), 1e-10);
    };
  }
  return f;
}

Family binomial() {
  Family f;
  f.name = "binomial";
  // negative Bernoulli log-likelihood on the logit scale
  f.loss = [](double y, double eta) {
    return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))) - y * eta;
  };
  f.negative_gradient = [](double y, double eta) { return y - expit(eta); };
  f.link = logit;
  f.inverse_link = expit;
  f.offset = [](const Vector& y, const Vector& w) { return logit(weighted_mean(y, w)); };
  f.validate = [](const Vector& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw std::invalid_argument("binomial: response must lie in {0,1} (row " +
                                    std::to_string(i + 1) + ")");
  };
  return f;
}

Family poisson() {
  Family f;
  f.name = "poisson";
  f.loss = [](double y, double eta) { return std::exp(eta) - y * eta; };
  f.negative_gradient = [](double y, double eta) { return y - std::exp(eta); };
  f.link = [](double mu) { return std::log(std::max(mu, 1e-12)); };
  f.inverse_link = [](double eta) { return std::exp(eta); };
  f.offset = [](const Vector& y, const Vector& w) {
    return std::log(std::max(weighted_mean(y, w), 1e-12));
  };
  f.default_nu = 0.01;  // infinite pseudo-residuals need small steps
  f.validate = [](const Vector& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] < 0 || std::abs(y[i] - std::round(y[i])) > 1e-8)
        throw std::invalid_argument(
            "poisson: response must be a nonnegative integer (row " +
            std::to_string(i + 1) + ")");
  };
  return f;
}

Family family_from_name(const std::string& name) {
  if (name == "gaussian") return gaussian();
  if (name == "laplace") return laplace();
  if (name == "huber") return huber();
  if (name == "binomial") return binomial();
  if (name == "poisson") return poisson();
  if (name.rfind("quantile:", 0) == 0) return quantile(std::stod(name.substr(9)));
  throw std::invalid_argument("unknown family: " + name);
}

double integrated_risk(const Family& fam, const Vector& weights, const Vector& y,
                       const Vector& fitted) {
  if (weights.size() != y.size() || y.size() != fitted.size())
    throw std::invalid_argument("integrated_risk: weight/observation length mismatch");
  double risk = 0.0;
  for (Eigen::Index o = 0; o < y.size(); ++o)
    risk += weights[o] * fam.loss(y[o], fitted[o]);
  return risk;
}

Vector response_integration_weights(const Response& response, IntScheme num_int) {
  if (std::holds_alternative<Vector>(response))
    return Vector::Ones(std::get<Vector>(response).size());
  if (std::holds_alternative<GridResponse>(response)) {
    const auto& r = std::get<GridResponse>(response);
    const Vector wt = integration_weights(r.grid, num_int).weights;
    const int N = static_cast<int>(r.values.rows());
    Vector w(static_cast<Eigen::Index>(N) * r.grid.size());
    for (Eigen::Index g = 0; g < r.grid.size(); ++g)
      w.segment(g * N, N).setConstant(wt[g]);
    return w;
  }
  const auto& r = std::get<LongResponse>(response);
  if (num_int == IntScheme::Equal) return Vector::Ones(r.values.size());
  // per-curve weights over each curve's own time grid
  Vector w(r.values.size());
  std::vector<std::vector<Eigen::Index>> per_curve(r.n_curves);
  for (Eigen::Index o = 0; o < r.times.size(); ++o)
    per_curve[r.curve_id[o]].push_back(o);
  for (const auto& obs : per_curve) {
    Vector t(obs.size());
    for (size_t k = 0; k < obs.size(); ++k) t[k] = r.times[obs[k]];
    const Vector wi = integration_weights(t, num_int).weights;
    for (size_t k = 0; k < obs.size(); ++k) w[obs[k]] = wi[k];
  }
  return w;
}

double integrated_risk(const Family& fam, const Response& response, const Vector& fitted,
                       IntScheme num_int) {
  const Vector w = response_integration_weights(response, num_int);
  Vector y;
  if (std::holds_alternative<Vector>(response)) y = std::get<Vector>(response);
  else if (std::holds_alternative<GridResponse>(response))
    y = grid_to_long(std::get<GridResponse>(response)).values;
  else y = std::get<LongResponse>(response).values;
  return integrated_risk(fam, w, y, fitted);
}

}  // namespace fnboost
