#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace driftconform {

namespace detail {

// ceil(x) that tolerates the float noise of products like 0.9 * 10, which
// may land a few ulps above the exact integer.
inline std::size_t ceil_index(double x) {
  const double adjusted = std::ceil(x - 1e-9);
  return adjusted < 1.0 ? 1 : static_cast<std::size_t>(adjusted);
}

}  // namespace detail

// Left-continuous generalized inverse of the empirical CDF of a discrete
// mixture of point masses: inf{x : #{v <= x}/|values| >= level}.  Equals the
// ceil(level * n)-th order statistic, with ties resolving to the smallest
// attaining value.
inline double quantile_of_point_masses(std::span<const double> values,
                                       double level) {
  if (values.empty()) throw std::invalid_argument("empty support");
  if (!(level > 0.0 && level <= 1.0))
    throw std::invalid_argument("quantile level must lie in (0,1]");
  std::vector<double> sorted(values.begin(), values.end());
  const std::size_t k =
      std::min(detail::ceil_index(level * static_cast<double>(sorted.size())),
               sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[k - 1];
}

inline double quantile_of_point_masses(const std::vector<double>& values,
                                       double level) {
  return quantile_of_point_masses(std::span<const double>(values), level);
}

}  // namespace driftconform
