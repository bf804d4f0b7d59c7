#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "driftconform/types.hpp"

namespace driftconform {

// Sliding window of coverage indicators for one stage-round.  Prefix counts
// of covered flags are cached so every suffix statistic in a scan costs O(1)
// and one observation costs O(window length) overall.
class CoverageWindow {
 public:
  explicit CoverageWindow(std::int64_t start_global = 1)
      : start_global_(start_global), prefix_{0} {
    if (start_global < 1)
      throw std::invalid_argument("window start must be >= 1");
  }

  void push(bool covered) {
    prefix_.push_back(prefix_.back() + (covered ? 1 : 0));
  }

  void reset(std::int64_t start_global) {
    if (start_global < 1)
      throw std::invalid_argument("window start must be >= 1");
    start_global_ = start_global;
    prefix_.assign(1, 0);
  }

  std::size_t size() const { return prefix_.size() - 1; }
  std::int64_t start_global() const { return start_global_; }

  // Number of covered flags among positions [from, size()).
  std::int64_t covered_in_suffix(std::size_t from) const {
    return prefix_.back() - prefix_[from];
  }

  bool flag(std::size_t i) const { return prefix_[i + 1] - prefix_[i] == 1; }

 private:
  std::int64_t start_global_;
  std::vector<std::int64_t> prefix_;
};

struct DetectionOutcome {
  bool detected = false;
  std::optional<std::size_t> trigger_index;  // window offset j of first trigger
  double statistic = 0.0;                    // max Z over all scanned j
};

// Signed empirical block coverage error: sum of (flag - (1 - alpha)).
inline double block_coverage_error(const std::vector<bool>& flags,
                                   const Alpha& alpha) {
  if (flags.empty()) throw std::invalid_argument("empty coverage window");
  double err = 0.0;
  for (bool f : flags) err += (f ? 1.0 : 0.0) - alpha.level();
  return err;
}

// Scans every suffix [j, end] of the window and reports the first j whose
// normalized block coverage error |cvg-err| / sqrt(len) strictly exceeds
// sigma.  Detection is additionally gated on the window holding at least
// min_window flags.  The returned statistic is the maximum over all j, for
// diagnostics; it does not change the decision.
inline DetectionOutcome drift_scan(const CoverageWindow& window,
                                   const Alpha& alpha, double sigma,
                                   std::size_t min_window = 0) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  DetectionOutcome out;
  const std::size_t n = window.size();
  if (n == 0) return out;
  const bool gate_open = n >= min_window;
  for (std::size_t j = 0; j < n; ++j) {
    const double len = static_cast<double>(n - j);
    const double covered = static_cast<double>(window.covered_in_suffix(j));
    const double err = covered - len * alpha.level();
    const double z = std::abs(err) / std::sqrt(len);
    if (z > out.statistic) out.statistic = z;
    if (gate_open && z > sigma && !out.detected) {
      out.detected = true;
      out.trigger_index = j;
    }
  }
  return out;
}

// Theoretical detection threshold for pretrained scores:
// sigma_{n,r} = 24 * sqrt(log(4 * tau_{n,r})).
inline double theory_threshold_pretrained(std::int64_t tau) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  return 24.0 * std::sqrt(std::log(4.0 * static_cast<double>(tau)));
}

// Theoretical detection threshold for online-trained scores:
// sigma_{n,r} = 10 * log^3(40 * tau_{n,r}).
inline double theory_threshold_full(std::int64_t tau) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  const double l = std::log(40.0 * static_cast<double>(tau));
  return 10.0 * l * l * l;
}

// Detection-threshold schedule: a fixed practical value or one of the
// theoretical schedules evaluated at the round start time.
struct SigmaSchedule {
  enum class Kind { Fixed, TheoryPretrained, TheoryFull };

  Kind kind = Kind::Fixed;
  double fixed_value = 4.0;

  static SigmaSchedule fixed(double sigma) {
    return SigmaSchedule{Kind::Fixed, sigma};
  }
  static SigmaSchedule theory_pretrained() {
    return SigmaSchedule{Kind::TheoryPretrained, 0.0};
  }
  static SigmaSchedule theory_full() {
    return SigmaSchedule{Kind::TheoryFull, 0.0};
  }

  double at(std::int64_t tau_round) const {
    switch (kind) {
      case Kind::Fixed: return fixed_value;
      case Kind::TheoryPretrained: return theory_threshold_pretrained(tau_round);
      case Kind::TheoryFull: return theory_threshold_full(tau_round);
    }
    throw std::logic_error("unknown sigma schedule");
  }
};

}  // namespace driftconform
