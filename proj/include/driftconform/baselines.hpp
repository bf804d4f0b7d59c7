#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "driftconform/prediction_set.hpp"
#include "driftconform/rng.hpp"
#include "driftconform/types.hpp"

namespace driftconform {

// Online subgradient update of the quantile threshold:
// q_{t+1} = q_t + eta * (1{miscovered} - alpha).
inline double aci_update(double q, double eta, const Alpha& alpha,
                         bool miscovered) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  return q + eta * ((miscovered ? 1.0 : 0.0) - alpha.value());
}

// Decaying ACI stepsize eta_t = (t + 1)^{-gamma}.
inline double decaying_stepsize(std::int64_t t, double gamma) {
  if (t < 1) throw std::invalid_argument("t must be >= 1");
  return std::pow(static_cast<double>(t + 1), -gamma);
}

// Coin-flip policy with perfectly calibrated long-term coverage and linear
// regret: the empty set with probability alpha, the whole line otherwise.
inline PredictionSet vacuous_step(RngStream& rng, const Alpha& alpha) {
  return rng.uniform() < alpha.value() ? PredictionSet::empty()
                                       : PredictionSet::whole_line();
}

// Union of the first (1 - alpha)-fraction of each of n equal subintervals
// of [0,1].  Exactly n disjoint intervals of total measure 1 - alpha.
inline PredictionSet pathological_union(std::int64_t n, const Alpha& alpha) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  std::vector<Interval> intervals;
  intervals.reserve(static_cast<std::size_t>(n));
  const double nd = static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double id = static_cast<double>(i);
    intervals.push_back(Interval{id / nd, (id + alpha.level()) / nd});
  }
  return PredictionSet::from_intervals(std::move(intervals));
}

}  // namespace driftconform
