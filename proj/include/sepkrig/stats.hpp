#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sepkrig/error.hpp"

namespace sepkrig::stats {

/// Empirical quantile with linear interpolation between order statistics
/// (position (n-1)p in the sorted sample).
inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw InvalidInputError("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw InvalidInputError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace sepkrig::stats
