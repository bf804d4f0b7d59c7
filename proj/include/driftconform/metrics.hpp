#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "driftconform/prediction_set.hpp"
#include "driftconform/types.hpp"

namespace driftconform {

using SetFn = std::function<PredictionSet(const FeatureVec&)>;

// Monte-Carlo estimate of the instantaneous coverage of a prediction-set
// snapshot over one oracle batch.
inline double mc_coverage(const SetFn& set_fn,
                          const std::vector<DataPoint>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty oracle batch");
  std::int64_t covered = 0;
  for (const auto& z : batch)
    if (set_fn(z.x).contains(z.y)) ++covered;
  return static_cast<double>(covered) / static_cast<double>(batch.size());
}

// Coverage of a threshold policy against precomputed sorted oracle scores:
// P(score <= q) under the oracle batch.
inline double coverage_from_sorted_scores(const std::vector<double>& sorted_scores,
                                          double q) {
  if (sorted_scores.empty()) throw std::invalid_argument("empty oracle batch");
  const auto it =
      std::upper_bound(sorted_scores.begin(), sorted_scores.end(), q);
  return static_cast<double>(it - sorted_scores.begin()) /
         static_cast<double>(sorted_scores.size());
}

// Sum over time of |cvg_hat_t - (1 - alpha)|.
inline double cumulative_regret(const std::vector<double>& coverage_series,
                                const Alpha& alpha) {
  double total = 0.0;
  for (double c : coverage_series) total += std::abs(c - alpha.level());
  return total;
}

inline double long_term_coverage(const std::vector<bool>& flags) {
  if (flags.empty()) throw std::invalid_argument("empty coverage series");
  std::int64_t covered = 0;
  for (bool f : flags) covered += f ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(flags.size());
}

// Sliding-window coverage rate; entries before a full window average the
// available prefix.
inline std::vector<double> rolling_coverage(const std::vector<bool>& flags,
                                            std::size_t window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out(flags.size());
  std::int64_t running = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    running += flags[i] ? 1 : 0;
    if (i >= window) running -= flags[i - window] ? 1 : 0;
    const auto len = static_cast<double>(std::min(i + 1, window));
    out[i] = static_cast<double>(running) / len;
  }
  return out;
}

// Two-sample Kolmogorov-Smirnov distance: sup over the pooled sample points
// of |F_a - F_b|.
inline double empirical_ks(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("empirical_ks needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double ks = 0.0;
  while (i < a.size() || j < b.size()) {
    const double x = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i]
                                                                       : b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    ks = std::max(ks, std::abs(static_cast<double>(i) / na -
                               static_cast<double>(j) / nb));
  }
  return ks;
}

struct WidthStats {
  double mean_finite = 0.0;     // mean width over finite-width sets
  std::int64_t n_infinite = 0;  // whole-line sets, never averaged
  std::vector<double> series;   // per-step widths, +inf marks whole line
};

inline WidthStats width_stats(const std::vector<PredictionSet>& sets) {
  WidthStats out;
  out.series.reserve(sets.size());
  double total = 0.0;
  std::int64_t finite = 0;
  for (const auto& s : sets) {
    const double w = s.lebesgue();
    out.series.push_back(w);
    if (std::isinf(w)) {
      ++out.n_infinite;
    } else {
      total += w;
      ++finite;
    }
  }
  out.mean_finite = finite > 0 ? total / static_cast<double>(finite) : 0.0;
  return out;
}

}  // namespace driftconform
