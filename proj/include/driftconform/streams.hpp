#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftconform/rng.hpp"
#include "driftconform/types.hpp"

namespace driftconform {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// TV distance between N(m1, s^2) and N(m2, s^2).
inline double gaussian_mean_shift_tv(double delta, double sigma) {
  return 2.0 * normal_cdf(std::abs(delta) / (2.0 * sigma)) - 1.0;
}

// TV distance between N(0, a^2) and N(0, b^2); densities cross at +-x*.
inline double gaussian_scale_tv(double a, double b) {
  if (a == b) return 0.0;
  if (a > b) std::swap(a, b);
  const double x2 = 2.0 * std::log(b / a) * a * a * b * b / (b * b - a * a);
  const double xs = std::sqrt(x2);
  return 2.0 * (normal_cdf(xs / a) - normal_cdf(xs / b));
}

// sup_x e^{-x}(1 - e^{-eps x}) = (1+eps)^{-1/eps} * eps / (1+eps), the KS
// (and TV) distance between Exp(1) and Exp(1+eps).
inline double exp_rate_ks(double eps) {
  if (!(eps > 0.0)) return 0.0;
  return std::pow(1.0 + eps, -1.0 / eps) * eps / (1.0 + eps);
}

enum class Scenario {
  PiecewiseVariance,
  LinearBias,
  SmoothVariance,
  Stationary,
  CovShiftMean,
  CovShiftVar,
  ExpRateBlocks,
  PiecewiseFlat,
};

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::PiecewiseVariance: return "piecewise_variance";
    case Scenario::LinearBias: return "linear_bias";
    case Scenario::SmoothVariance: return "smooth_variance";
    case Scenario::Stationary: return "stationary";
    case Scenario::CovShiftMean: return "covshift_mean";
    case Scenario::CovShiftVar: return "covshift_var";
    case Scenario::ExpRateBlocks: return "exp_rate_blocks";
    case Scenario::PiecewiseFlat: return "piecewise_flat";
  }
  throw std::logic_error("unknown scenario");
}

inline Scenario scenario_from_name(const std::string& name) {
  for (Scenario s :
       {Scenario::PiecewiseVariance, Scenario::LinearBias,
        Scenario::SmoothVariance, Scenario::Stationary, Scenario::CovShiftMean,
        Scenario::CovShiftVar, Scenario::ExpRateBlocks,
        Scenario::PiecewiseFlat}) {
    if (scenario_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown scenario: " + name);
}

// Parameterization of one synthetic drifting data-generating process.
struct StreamConfig {
  Scenario scenario = Scenario::Stationary;
  std::size_t d = 5;
  std::int64_t T = 10000;
  std::vector<std::int64_t> change_points;

  // regression family: Y = 2 X_1 + X_2 + mu_t + sigma_t * eps
  std::vector<double> sigma_levels = {0.5, 2.0, 3.5};
  double base_sigma = 0.5;
  double kappa = 0.002;
  double variance_growth = 0.008;

  // covariate-shift family: X ~ N(mu_t 1, I) or N(0, sigma_t^2 I),
  // Y = X^T beta* (+ ||X||^2/100 when misspecified) + eps
  std::vector<double> mean_levels = {0.0, 3.0, -2.0};
  std::vector<double> cov_sigma_levels = {1.0, 5.0, 10.0};
  bool misspecified = false;
  FeatureVec beta_star;

  // response-only adversarial streams
  double eps = 1.0;
  std::int64_t n_blocks = 4;
  std::int64_t k_pieces = 8;
  std::vector<int> flat_signs;  // V_j in {-1, +1}

  bool is_standard_regression() const {
    return scenario == Scenario::PiecewiseVariance ||
           scenario == Scenario::LinearBias ||
           scenario == Scenario::SmoothVariance ||
           scenario == Scenario::Stationary;
  }
  bool is_cov_shift() const {
    return scenario == Scenario::CovShiftMean ||
           scenario == Scenario::CovShiftVar;
  }
  bool is_response_only() const {
    return scenario == Scenario::ExpRateBlocks ||
           scenario == Scenario::PiecewiseFlat;
  }
};

// Fills scenario defaults and validates invariants.
inline StreamConfig resolve_stream(StreamConfig cfg) {
  if (cfg.T < 1) throw std::invalid_argument("stream horizon must be >= 1");
  if (cfg.change_points.empty()) {
    if (cfg.scenario == Scenario::PiecewiseVariance)
      cfg.change_points = {4000, 7000};
    else if (cfg.is_cov_shift())
      cfg.change_points = {3333, 6667};
  }
  for (std::size_t i = 0; i + 1 < cfg.change_points.size(); ++i) {
    if (cfg.change_points[i] >= cfg.change_points[i + 1])
      throw std::invalid_argument("change points must be strictly increasing");
  }
  if (!cfg.change_points.empty() && cfg.change_points.back() >= cfg.T)
    throw std::invalid_argument("change points must precede the horizon");
  if (cfg.is_standard_regression() && cfg.d < 2)
    throw std::invalid_argument("regression scenarios need d >= 2");
  if (cfg.is_cov_shift()) {
    if (cfg.d != 10 && cfg.beta_star.empty())
      cfg.d = std::max<std::size_t>(cfg.d, 1);
    if (!cfg.beta_star.empty() && cfg.beta_star.size() != cfg.d)
      throw std::invalid_argument("beta_star dimension mismatch");
  }
  if (cfg.scenario == Scenario::ExpRateBlocks) {
    if (cfg.n_blocks < 1) throw std::invalid_argument("n_blocks must be >= 1");
    if (!(cfg.eps > 0.0 && cfg.eps <= 1.0))
      throw std::invalid_argument("exp block eps must lie in (0,1]");
  }
  if (cfg.scenario == Scenario::PiecewiseFlat) {
    if (cfg.k_pieces < 1) throw std::invalid_argument("k_pieces must be >= 1");
    if (!(cfg.eps >= 0.0 && cfg.eps < 1.0))
      throw std::invalid_argument("flat-density eps must lie in [0,1)");
    if (cfg.flat_signs.empty()) {
      cfg.flat_signs.resize(static_cast<std::size_t>(cfg.k_pieces));
      for (std::size_t j = 0; j < cfg.flat_signs.size(); ++j)
        cfg.flat_signs[j] = (j % 2 == 0) ? 1 : -1;
    }
    if (cfg.flat_signs.size() != static_cast<std::size_t>(cfg.k_pieces))
      throw std::invalid_argument("flat_signs size must equal k_pieces");
    for (int v : cfg.flat_signs)
      if (v != 1 && v != -1)
        throw std::invalid_argument("flat_signs entries must be +-1");
  }
  return cfg;
}

namespace detail {

// Regime convention for the fixed-design regression scenarios: a new
// regime starts AT the change point (sigma_t = 2.0 for 4000 <= t < 7000).
inline std::size_t regime_at_or_after(const std::vector<std::int64_t>& cps,
                                      std::int64_t t) {
  std::size_t idx = 0;
  for (std::int64_t cp : cps)
    if (t >= cp) ++idx;
  return idx;
}

// Covariate-shift convention: a new regime starts strictly after the change
// point (mu_t = 3 for 3333 < t <= 6667).
inline std::size_t regime_after(const std::vector<std::int64_t>& cps,
                                std::int64_t t) {
  std::size_t idx = 0;
  for (std::int64_t cp : cps)
    if (t > cp) ++idx;
  return idx;
}

}  // namespace detail

inline double stream_mu_at(const StreamConfig& cfg, std::int64_t t) {
  switch (cfg.scenario) {
    case Scenario::LinearBias: return cfg.kappa * static_cast<double>(t);
    case Scenario::CovShiftMean:
      return cfg.mean_levels.at(
          std::min(detail::regime_after(cfg.change_points, t),
                   cfg.mean_levels.size() - 1));
    default: return 0.0;
  }
}

inline double stream_sigma_at(const StreamConfig& cfg, std::int64_t t) {
  switch (cfg.scenario) {
    case Scenario::PiecewiseVariance:
      return cfg.sigma_levels.at(
          std::min(detail::regime_at_or_after(cfg.change_points, t),
                   cfg.sigma_levels.size() - 1));
    case Scenario::LinearBias:
    case Scenario::Stationary:
      return cfg.base_sigma;
    case Scenario::SmoothVariance:
      return std::sqrt(1.0 + cfg.variance_growth * static_cast<double>(t));
    case Scenario::CovShiftVar:
      return cfg.cov_sigma_levels.at(
          std::min(detail::regime_after(cfg.change_points, t),
                   cfg.cov_sigma_levels.size() - 1));
    default: return 1.0;
  }
}

inline double exp_block_rate(const StreamConfig& cfg, std::int64_t t) {
  const std::int64_t block_len = (cfg.T + cfg.n_blocks - 1) / cfg.n_blocks;
  const std::int64_t block = (t - 1) / block_len;
  return block % 2 == 0 ? 1.0 : 1.0 + cfg.eps;
}

// Density of the piecewise-flat law on [0,1]: proportional to 1 + eps V_j
// on the j-th of k equal pieces.
inline double piecewise_flat_density(const StreamConfig& cfg, double y) {
  if (y < 0.0 || y > 1.0) return 0.0;
  const auto k = static_cast<std::size_t>(cfg.k_pieces);
  double vbar = 0.0;
  for (int v : cfg.flat_signs) vbar += v;
  vbar /= static_cast<double>(k);
  auto j = static_cast<std::size_t>(y * static_cast<double>(k));
  if (j >= k) j = k - 1;
  return (1.0 + cfg.eps * cfg.flat_signs[j]) / (1.0 + cfg.eps * vbar);
}

// Draws one point from the distribution D_t.  The config must be resolved.
inline DataPoint sample_at(const StreamConfig& cfg, std::int64_t t,
                           RngStream& rng) {
  if (t < 1 || t > cfg.T) throw std::invalid_argument("time index out of range");
  DataPoint z;
  z.t = t;
  if (cfg.is_standard_regression()) {
    z.x.resize(cfg.d);
    for (auto& v : z.x) v = rng.normal();
    z.y = 2.0 * z.x[0] + z.x[1] + stream_mu_at(cfg, t) +
          stream_sigma_at(cfg, t) * rng.normal();
    return z;
  }
  if (cfg.is_cov_shift()) {
    if (cfg.beta_star.size() != cfg.d)
      throw std::invalid_argument("cov-shift stream requires beta_star");
    z.x.resize(cfg.d);
    const double mu = stream_mu_at(cfg, t);
    const double sd = cfg.scenario == Scenario::CovShiftVar
                          ? stream_sigma_at(cfg, t)
                          : 1.0;
    for (auto& v : z.x) v = mu + sd * rng.normal();
    z.y = dot(z.x, cfg.beta_star) + rng.normal();
    if (cfg.misspecified) z.y += squared_norm(z.x) / 100.0;
    return z;
  }
  if (cfg.scenario == Scenario::ExpRateBlocks) {
    z.y = rng.exponential(exp_block_rate(cfg, t));
    return z;
  }
  // PiecewiseFlat: inverse CDF across the k flat pieces.
  const auto k = static_cast<std::size_t>(cfg.k_pieces);
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w =
        piecewise_flat_density(cfg, (static_cast<double>(j) + 0.5) /
                                        static_cast<double>(k)) /
        static_cast<double>(k);
    if (u < cum + w || j == k - 1) {
      const double frac = std::clamp((u - cum) / w, 0.0, 1.0);
      z.y = (static_cast<double>(j) + frac) / static_cast<double>(k);
      return z;
    }
    cum += w;
  }
  throw std::logic_error("piecewise-flat sampling fell through");
}

// M i.i.d. draws from D_t.  Callers pass a substream derived per (run, t)
// so oracle evaluation never advances the main stream generator.
inline std::vector<DataPoint> oracle_batch(const StreamConfig& cfg,
                                           std::int64_t t, std::size_t m,
                                           RngStream& rng) {
  std::vector<DataPoint> batch;
  batch.reserve(m);
  for (std::size_t i = 0; i < m; ++i) batch.push_back(sample_at(cfg, t, rng));
  return batch;
}

// Externally produced stream loaded from CSV (header t,x_1..x_d,y with an
// optional trailing pred column carrying an external model's predictions).
struct ReplayStream {
  std::vector<DataPoint> points;
  std::vector<double> preds;
  std::size_t d = 0;

  bool has_preds() const { return !preds.empty(); }
};

inline ReplayStream load_replay_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open stream file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty stream file: " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  if (header.size() < 2 || header.front() != "t")
    throw std::invalid_argument("stream file must start with a t column");
  const bool has_pred = header.back() == "pred";
  const std::size_t y_col = header.size() - (has_pred ? 2 : 1);
  if (header[y_col] != "y")
    throw std::invalid_argument("stream file is missing the y column");
  ReplayStream out;
  out.d = y_col - 1;

  std::int64_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> fields;
    while (std::getline(ss, field, ',')) fields.push_back(std::stod(field));
    if (fields.size() != header.size())
      throw std::invalid_argument("ragged row in stream file: " + path);
    DataPoint z;
    z.t = row;  // rows are renumbered sequentially
    z.x.assign(fields.begin() + 1, fields.begin() + 1 + out.d);
    z.y = fields[y_col];
    out.points.push_back(std::move(z));
    if (has_pred) out.preds.push_back(fields.back());
  }
  if (out.points.empty())
    throw std::invalid_argument("stream file has no data rows: " + path);
  return out;
}

struct ScenarioVariation {
  double tv_upper = 0.0;
  double ks_upper = 0.0;
  std::int64_t n_cp = 0;
};

// Exact change-point count plus upper bounds on the cumulative TV / KS
// variation, from per-step closed forms.
inline ScenarioVariation scenario_variation(const StreamConfig& cfg) {
  ScenarioVariation out;
  switch (cfg.scenario) {
    case Scenario::Stationary:
    case Scenario::PiecewiseFlat:
      return out;
    case Scenario::PiecewiseVariance: {
      out.n_cp = static_cast<std::int64_t>(cfg.change_points.size());
      for (std::size_t i = 0; i + 1 < cfg.sigma_levels.size(); ++i)
        out.tv_upper +=
            gaussian_scale_tv(cfg.sigma_levels[i], cfg.sigma_levels[i + 1]);
      out.ks_upper = out.tv_upper;
      return out;
    }
    case Scenario::LinearBias: {
      const double step = gaussian_mean_shift_tv(cfg.kappa, cfg.base_sigma);
      out.tv_upper = step * static_cast<double>(cfg.T - 1);
      out.ks_upper = out.tv_upper;
      return out;
    }
    case Scenario::SmoothVariance: {
      for (std::int64_t t = 1; t < cfg.T; ++t)
        out.tv_upper +=
            gaussian_scale_tv(stream_sigma_at(cfg, t), stream_sigma_at(cfg, t + 1));
      out.ks_upper = out.tv_upper;
      return out;
    }
    case Scenario::CovShiftMean:
    case Scenario::CovShiftVar: {
      out.n_cp = static_cast<std::int64_t>(cfg.change_points.size());
      // Pinsker bound on the d-dimensional covariate shift, capped at 1.
      const auto levels = cfg.scenario == Scenario::CovShiftMean
                              ? cfg.mean_levels
                              : cfg.cov_sigma_levels;
      for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        double kl = 0.0;
        if (cfg.scenario == Scenario::CovShiftMean) {
          const double delta = levels[i + 1] - levels[i];
          kl = 0.5 * static_cast<double>(cfg.d) * delta * delta;
        } else {
          const double r2 = (levels[i] * levels[i]) / (levels[i + 1] * levels[i + 1]);
          kl = 0.5 * static_cast<double>(cfg.d) * (r2 - 1.0 - std::log(r2));
        }
        out.tv_upper += std::min(1.0, std::sqrt(kl / 2.0));
      }
      out.ks_upper = out.tv_upper;
      return out;
    }
    case Scenario::ExpRateBlocks: {
      out.n_cp = cfg.n_blocks - 1;
      const double per_boundary = exp_rate_ks(cfg.eps);
      out.ks_upper = per_boundary * static_cast<double>(out.n_cp);
      out.tv_upper = out.ks_upper;
      return out;
    }
  }
  throw std::logic_error("unknown scenario");
}

}  // namespace driftconform
