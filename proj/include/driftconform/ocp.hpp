#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "driftconform/detect.hpp"
#include "driftconform/prediction_set.hpp"
#include "driftconform/quantile.hpp"
#include "driftconform/types.hpp"

namespace driftconform {

// Smallest order statistic q of the round scores minimizing
// |#{s > q} - alpha * |scores||, the per-round quantile recalibration.
inline double quantile_update(std::span<const double> round_scores,
                              const Alpha& alpha) {
  if (round_scores.empty()) throw std::invalid_argument("no calibration scores");
  std::vector<double> sorted(round_scores.begin(), round_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double target = alpha.value() * static_cast<double>(sorted.size());
  double best_q = sorted.front();
  double best_obj = -1.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    const auto above = static_cast<double>(
        sorted.end() -
        std::upper_bound(sorted.begin() + static_cast<std::ptrdiff_t>(i),
                         sorted.end(), sorted[i]));
    const double obj = std::abs(above - target);
    if (best_obj < 0.0 || obj < best_obj) {
      best_obj = obj;
      best_q = sorted[i];
    }
  }
  return best_q;
}

inline double quantile_update(const std::vector<double>& round_scores,
                              const Alpha& alpha) {
  return quantile_update(std::span<const double>(round_scores), alpha);
}

struct OcpSnapshot {
  std::int64_t stage = 1;
  std::int64_t round = 1;
  std::int64_t round_clock = 0;
  double q = 0.0;
};

struct OcpStepResult {
  PredictionSet set;
  bool covered = false;
  bool drift = false;
  OcpSnapshot state;  // post-step state
};

struct OcpConfig {
  Alpha alpha{0.1};
  SigmaSchedule sigma = SigmaSchedule::fixed(4.0);
  std::size_t min_window = 10;
  double q_init = 0.0;
};

inline std::int64_t round_length(std::int64_t r) {
  std::int64_t len = 1;
  for (std::int64_t i = 0; i < r && len < (1LL << 60); ++i) len *= 3;
  return len;
}

// Stage/round state machine for online conformal prediction with pretrained
// scores: geometric round lengths T_r = 3^r, per-round quantile
// recalibration from the previous round, and drift-triggered stage restarts
// that warm-start the quantile.
class DriftOcp {
 public:
  explicit DriftOcp(OcpConfig cfg)
      : cfg_(std::move(cfg)), q_(cfg_.q_init), window_(1) {}

  double q() const { return q_; }
  std::int64_t stage() const { return stage_; }
  std::int64_t round() const { return round_; }
  std::int64_t round_clock() const { return round_clock_; }
  std::int64_t round_start() const { return tau_round_; }
  std::int64_t global_time() const { return global_t_; }
  const std::vector<double>& prev_round_scores() const { return prev_scores_; }
  const std::vector<double>& cur_round_scores() const { return cur_scores_; }

  PredictionSet predict(double center) const {
    return threshold_set(center, q_);
  }

  struct ObserveOutcome {
    bool covered = false;
    bool drift = false;
    OcpSnapshot state;
  };

  ObserveOutcome observe(double score) {
    if (!std::isfinite(score))
      throw std::invalid_argument("non-finite score");
    ObserveOutcome out;
    out.covered = score <= q_;
    window_.push(out.covered);
    cur_scores_.push_back(score);
    ++round_clock_;
    ++global_t_;

    const auto detection =
        drift_scan(window_, cfg_.alpha, cfg_.sigma.at(tau_round_),
                   cfg_.min_window);
    if (detection.detected) {
      // New stage: keep the last quantile, drop the partial round's scores.
      out.drift = true;
      ++stage_;
      round_ = 1;
      begin_round();
      prev_scores_.clear();
    } else if (round_clock_ == round_length(round_)) {
      q_ = quantile_update(cur_scores_, cfg_.alpha);
      ++round_;
      prev_scores_ = std::move(cur_scores_);
      begin_round();
    }
    out.state = OcpSnapshot{stage_, round_, round_clock_, q_};
    return out;
  }

  OcpStepResult step(double center, double score) {
    OcpStepResult res;
    res.set = predict(center);
    auto obs = observe(score);
    res.covered = obs.covered;
    res.drift = obs.drift;
    res.state = obs.state;
    return res;
  }

 private:
  void begin_round() {
    round_clock_ = 0;
    tau_round_ = global_t_ + 1;
    cur_scores_.clear();
    window_.reset(tau_round_);
  }

  OcpConfig cfg_;
  double q_;
  std::int64_t stage_ = 1;
  std::int64_t round_ = 1;
  std::int64_t round_clock_ = 0;
  std::int64_t tau_round_ = 1;
  std::int64_t global_t_ = 0;
  std::vector<double> cur_scores_;
  std::vector<double> prev_scores_;
  CoverageWindow window_;
};

struct OcpTraceRow {
  std::int64_t t = 0;
  std::int64_t stage = 1;
  std::int64_t round = 1;
  double q = 0.0;
  bool covered = false;
  bool drift = false;
};

// Drives predict/observe over a realized (score, center) stream.
// Deterministic given the stream and config; reads no horizon.
inline std::vector<OcpTraceRow> run_driftocp(
    std::span<const std::pair<double, double>> stream, const OcpConfig& cfg) {
  DriftOcp engine(cfg);
  std::vector<OcpTraceRow> trace;
  trace.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    OcpTraceRow row;
    row.t = static_cast<std::int64_t>(i) + 1;
    row.stage = engine.stage();
    row.round = engine.round();
    row.q = engine.q();
    const auto res = engine.step(stream[i].second, stream[i].first);
    row.covered = res.covered;
    row.drift = res.drift;
    trace.push_back(row);
  }
  return trace;
}

}  // namespace driftconform
