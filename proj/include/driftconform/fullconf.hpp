#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "driftconform/detect.hpp"
#include "driftconform/learners.hpp"
#include "driftconform/ocp.hpp"
#include "driftconform/prediction_set.hpp"
#include "driftconform/quantile.hpp"
#include "driftconform/types.hpp"

namespace driftconform {

// Equally spaced discretization of the candidate response axis.
struct CandidateGrid {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t points = 512;

  double point(std::size_t i) const {
    return lo + (hi - lo) * static_cast<double>(i) /
                    static_cast<double>(points - 1);
  }
  double step() const {
    return (hi - lo) / static_cast<double>(points - 1);
  }

  // Default span: calibration responses padded by 3 IQRs on each side.
  static CandidateGrid spanning(std::span<const DataPoint> cal,
                                std::size_t points = 512,
                                double pad_iqrs = 3.0) {
    if (cal.empty()) throw std::invalid_argument("empty calibration set");
    if (points < 2) throw std::invalid_argument("grid needs >= 2 points");
    std::vector<double> ys;
    ys.reserve(cal.size());
    for (const auto& z : cal) ys.push_back(z.y);
    const double q25 = quantile_of_point_masses(ys, 0.25);
    const double q75 = quantile_of_point_masses(ys, 0.75);
    const double pad = pad_iqrs * (q75 - q25);
    double lo = *std::min_element(ys.begin(), ys.end()) - pad;
    double hi = *std::max_element(ys.begin(), ys.end()) + pad;
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    return CandidateGrid{lo, hi, points};
  }
};

struct ConformalBatch {
  std::vector<DataPoint> train;
  std::vector<DataPoint> cal;
  Alpha alpha{0.1};
  CandidateGrid grid;
};

// Builds the model refit with the training context augmented by a
// hypothesized pair (x, y).
using AugmentedFit =
    std::function<PointPredictor(const FeatureVec& x, double y)>;

namespace detail {

// Candidate membership in the full conformal set.  With the left-continuous
// quantile convention, s_test <= Quantile_{1-alpha} of the m+1 point masses
// is equivalent to #{i : s_i < s_test} <= ceil((1-alpha)(m+1)) - 1, which
// avoids sorting the score multiset per candidate.
inline bool candidate_included(double s_test,
                               std::span<const double> cal_scores,
                               std::size_t quantile_rank) {
  std::size_t strictly_below = 0;
  for (double s : cal_scores)
    if (s < s_test) ++strictly_below;
  return strictly_below + 1 <= quantile_rank;
}

}  // namespace detail

// Full conformal prediction set over a candidate grid: refit the model for
// each hypothesized response, threshold the test residual at the
// (1-alpha)-quantile of the augmented score multiset, and merge maximal
// runs of included grid points into closed intervals.
inline PredictionSet full_conformal_set(std::span<const DataPoint> cal,
                                        const Alpha& alpha,
                                        const CandidateGrid& grid,
                                        const FeatureVec& x,
                                        const AugmentedFit& fit) {
  if (cal.empty()) throw std::invalid_argument("empty calibration set");
  if (grid.points < 2 || !(grid.lo < grid.hi))
    throw std::invalid_argument("invalid candidate grid");
  const std::size_t m = cal.size();
  const std::size_t rank = std::min(
      detail::ceil_index(alpha.level() * static_cast<double>(m + 1)), m + 1);
  std::vector<double> cal_scores(m);
  std::vector<Interval> intervals;
  std::optional<std::size_t> run_start;
  for (std::size_t g = 0; g < grid.points; ++g) {
    const double y = grid.point(g);
    const PointPredictor model = fit(x, y);
    for (std::size_t i = 0; i < m; ++i) {
      const double pred = model(cal[i].x);
      if (!std::isfinite(pred)) throw std::runtime_error("learner diverged");
      cal_scores[i] = std::abs(cal[i].y - pred);
    }
    const double pred_test = model(x);
    if (!std::isfinite(pred_test)) throw std::runtime_error("learner diverged");
    const double s_test = std::abs(y - pred_test);
    const bool included = detail::candidate_included(s_test, cal_scores, rank);
    if (included && !run_start) run_start = g;
    if (!included && run_start) {
      intervals.push_back(Interval{grid.point(*run_start), grid.point(g - 1)});
      run_start.reset();
    }
  }
  if (run_start)
    intervals.push_back(
        Interval{grid.point(*run_start), grid.point(grid.points - 1)});
  return PredictionSet::from_intervals(std::move(intervals));
}

inline PredictionSet full_conformal_set(const ConformalBatch& batch,
                                        const Learner& learner,
                                        const FeatureVec& x) {
  std::span<const DataPoint> train(batch.train);
  const Learner* l = &learner;
  return full_conformal_set(
      batch.cal, batch.alpha, batch.grid, x,
      [l, train](const FeatureVec& xq, double yq) {
        return l->augmented_fit(train, xq, yq);
      });
}

// Membership of one realized response in the full conformal set, without
// materializing the grid.  Exact (grid-free) rule; used for Monte-Carlo
// coverage evaluation.
inline bool full_conformal_covers(std::span<const DataPoint> cal,
                                  const Alpha& alpha, const FeatureVec& x,
                                  double y, const AugmentedFit& fit) {
  if (cal.empty()) throw std::invalid_argument("empty calibration set");
  const std::size_t m = cal.size();
  const std::size_t rank = std::min(
      detail::ceil_index(alpha.level() * static_cast<double>(m + 1)), m + 1);
  const PointPredictor model = fit(x, y);
  std::size_t strictly_below = 0;
  const double s_test = std::abs(y - model(x));
  for (const auto& z : cal) {
    const double s = std::abs(z.y - model(z.x));
    if (s < s_test) ++strictly_below;
  }
  return strictly_below + 1 <= rank;
}

// One-step augmented refit of a linear parameter at a hypothesized point,
// with the factor-2 squared-loss gradient.
inline LinearParams augmented_fit_one_step(const LinearParams& theta_prev,
                                           double eta, const FeatureVec& x,
                                           double y) {
  return sgd_update(theta_prev, eta, x, y);
}

struct FullOcpConfig {
  Alpha alpha{0.1};
  SigmaSchedule sigma = SigmaSchedule::fixed(4.0);
  std::size_t min_window = 10;
  std::size_t grid_points = 512;
  double grid_pad_iqrs = 3.0;
};

// Stage/round state machine for online full conformal prediction with
// adaptively trained scores.  Each round freezes a prediction-set forming
// strategy built from all data before the round (training) and the
// preceding round (calibration); drift detection restarts the stage and the
// strategy is rebuilt from data, with no quantile carried over.
class DriftOcpFull {
 public:
  DriftOcpFull(FullOcpConfig cfg, std::unique_ptr<Learner> learner)
      : cfg_(std::move(cfg)), learner_(std::move(learner)) {
    if (!learner_) throw std::invalid_argument("learner required");
  }

  std::int64_t stage() const { return stage_; }
  std::int64_t round() const { return round_; }
  std::int64_t round_clock() const { return round_clock_; }
  std::int64_t round_start() const { return tau_round_; }
  std::int64_t global_time() const { return global_t_; }
  std::size_t history_size() const { return history_.size(); }
  bool whole_line_round() const { return !strategy_.has_value(); }
  const Learner& live_learner() const { return *learner_; }
  const CandidateGrid* grid() const {
    return strategy_ ? &strategy_->grid : nullptr;
  }
  std::span<const DataPoint> calibration_view() const {
    if (!strategy_) return {};
    return std::span<const DataPoint>(history_).subspan(
        strategy_->cal_begin, strategy_->cal_end - strategy_->cal_begin);
  }

  PredictionSet predict(const FeatureVec& x) const {
    if (!strategy_) return PredictionSet::whole_line();
    return full_conformal_set(calibration_view(), cfg_.alpha, strategy_->grid,
                              x, strategy_->fit);
  }

  // Exact membership of a candidate response for the current strategy.
  bool strategy_covers(const FeatureVec& x, double y) const {
    if (!strategy_) return true;
    return full_conformal_covers(calibration_view(), cfg_.alpha, x, y,
                                 strategy_->fit);
  }

  // Consumes the response for a step whose prediction set was already
  // formed.  The point enters the training history in every branch.
  OcpStepResult observe(const DataPoint& z, const PredictionSet& formed_set) {
    OcpStepResult res;
    res.set = formed_set;
    res.covered = formed_set.contains(z.y);
    window_.push(res.covered);
    ++round_clock_;
    ++global_t_;
    history_.push_back(z);
    learner_->observe(z);

    const auto detection =
        drift_scan(window_, cfg_.alpha, cfg_.sigma.at(tau_round_),
                   cfg_.min_window);
    if (detection.detected) {
      res.drift = true;
      ++stage_;
      round_ = 1;
      finish_round();
    } else if (round_clock_ == round_length(round_)) {
      ++round_;
      finish_round();
    }
    res.state = OcpSnapshot{stage_, round_, round_clock_, 0.0};
    return res;
  }

  OcpStepResult step(const DataPoint& z) {
    return observe(z, predict(z.x));
  }

 private:
  struct RoundStrategy {
    std::size_t cal_begin = 0;
    std::size_t cal_end = 0;
    CandidateGrid grid;
    AugmentedFit fit;
  };

  // Closes the current round: its data become the next calibration set
  // (convention (n,0) = (n-1, r_{n-1}) after a drift truncation) and the
  // strategy is rebuilt with the learner frozen at the round boundary.
  void finish_round() {
    const std::size_t cal_begin = round_begin_idx_;
    const std::size_t cal_end = history_.size();
    round_begin_idx_ = cal_end;
    round_clock_ = 0;
    tau_round_ = global_t_ + 1;
    window_.reset(tau_round_);

    RoundStrategy strat;
    strat.cal_begin = cal_begin;
    strat.cal_end = cal_end;
    auto cal = std::span<const DataPoint>(history_)
                   .subspan(cal_begin, cal_end - cal_begin);
    strat.grid =
        CandidateGrid::spanning(cal, cfg_.grid_points, cfg_.grid_pad_iqrs);
    frozen_ = learner_->clone();
    const Learner* frozen = frozen_.get();
    // All data before the new round train the model.  history_ may
    // reallocate as it grows, so the training view is a copy taken here.
    train_snapshot_.assign(history_.begin(), history_.end());
    std::span<const DataPoint> train(train_snapshot_);
    strat.fit = [frozen, train](const FeatureVec& x, double y) {
      return frozen->augmented_fit(train, x, y);
    };
    strategy_ = std::move(strat);
  }

  FullOcpConfig cfg_;
  std::unique_ptr<Learner> learner_;
  std::unique_ptr<Learner> frozen_;
  std::vector<DataPoint> history_;
  std::vector<DataPoint> train_snapshot_;
  std::optional<RoundStrategy> strategy_;
  std::size_t round_begin_idx_ = 0;
  std::int64_t stage_ = 1;
  std::int64_t round_ = 1;
  std::int64_t round_clock_ = 0;
  std::int64_t tau_round_ = 1;
  std::int64_t global_t_ = 0;
  CoverageWindow window_{1};
};

}  // namespace driftconform
