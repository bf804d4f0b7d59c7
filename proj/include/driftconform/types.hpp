#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace driftconform {

using FeatureVec = std::vector<double>;

// Target miscoverage level, constrained to (0, 1).
class Alpha {
 public:
  explicit Alpha(double value) : value_(value) {
    if (!(value > 0.0 && value < 1.0))
      throw std::invalid_argument("alpha must lie in (0,1)");
  }
  double value() const { return value_; }
  // The nominal coverage level 1 - alpha.
  double level() const { return 1.0 - value_; }

 private:
  double value_;
};

// One stream observation.  The feature vector may be empty for
// response-only streams.
struct DataPoint {
  FeatureVec x;
  double y = 0.0;
  std::int64_t t = 0;
};

inline double dot(const FeatureVec& a, const FeatureVec& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dimension mismatch in dot product");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const FeatureVec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

}  // namespace driftconform
