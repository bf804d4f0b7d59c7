#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace driftconform {

enum class SetKind { Empty, WholeLine, Intervals };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// A finite union of disjoint closed intervals on the real line, with
// explicit markers for the empty set and the whole line.  Values are
// immutable after construction; touching intervals are merged so the
// interval count K is canonical.
class PredictionSet {
 public:
  PredictionSet() : kind_(SetKind::Empty) {}

  static PredictionSet empty() { return PredictionSet(); }

  static PredictionSet whole_line() {
    PredictionSet s;
    s.kind_ = SetKind::WholeLine;
    return s;
  }

  static PredictionSet from_intervals(std::vector<Interval> intervals) {
    if (intervals.empty()) return empty();
    for (const auto& iv : intervals) {
      if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi)))
        throw std::invalid_argument("interval endpoints must be finite");
      if (iv.lo > iv.hi)
        throw std::invalid_argument("interval with lo > hi");
    }
    std::sort(intervals.begin(), intervals.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> merged;
    merged.push_back(intervals.front());
    for (std::size_t i = 1; i < intervals.size(); ++i) {
      if (intervals[i].lo <= merged.back().hi) {
        merged.back().hi = std::max(merged.back().hi, intervals[i].hi);
      } else {
        merged.push_back(intervals[i]);
      }
    }
    PredictionSet s;
    s.kind_ = SetKind::Intervals;
    s.intervals_ = std::move(merged);
    return s;
  }

  static PredictionSet single(double lo, double hi) {
    return from_intervals({Interval{lo, hi}});
  }

  SetKind kind() const { return kind_; }
  bool is_empty() const { return kind_ == SetKind::Empty; }
  bool is_whole_line() const { return kind_ == SetKind::WholeLine; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  std::size_t interval_count() const { return intervals_.size(); }

  bool contains(double y) const {
    switch (kind_) {
      case SetKind::Empty: return false;
      case SetKind::WholeLine: return true;
      case SetKind::Intervals: break;
    }
    auto it = std::upper_bound(
        intervals_.begin(), intervals_.end(), y,
        [](double v, const Interval& iv) { return v < iv.lo; });
    if (it == intervals_.begin()) return false;
    --it;
    return y <= it->hi;
  }

  // Total length; +infinity for the whole line.
  double lebesgue() const {
    if (kind_ == SetKind::Empty) return 0.0;
    if (kind_ == SetKind::WholeLine)
      return std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (const auto& iv : intervals_) total += iv.hi - iv.lo;
    return total;
  }

  friend bool operator==(const PredictionSet& a, const PredictionSet& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ != SetKind::Intervals) return true;
    if (a.intervals_.size() != b.intervals_.size()) return false;
    for (std::size_t i = 0; i < a.intervals_.size(); ++i) {
      if (a.intervals_[i].lo != b.intervals_[i].lo ||
          a.intervals_[i].hi != b.intervals_[i].hi)
        return false;
    }
    return true;
  }

 private:
  SetKind kind_;
  std::vector<Interval> intervals_;
};

inline bool set_contains(const PredictionSet& set, double y) {
  return set.contains(y);
}

inline double set_lebesgue(const PredictionSet& set) { return set.lebesgue(); }

// Threshold-form prediction set for the absolute-residual score:
// {y : |y - center| <= q}.  A negative threshold excludes every response.
inline PredictionSet threshold_set(double center, double q) {
  if (!std::isfinite(q)) throw std::invalid_argument("threshold must be finite");
  if (q < 0.0) return PredictionSet::empty();
  return PredictionSet::single(center - q, center + q);
}

}  // namespace driftconform
