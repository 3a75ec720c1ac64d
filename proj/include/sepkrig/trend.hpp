#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sepkrig/grid.hpp"

namespace sepkrig {

/// Moving-average trend shared across all sensors. Rows before `valid_from`
/// have no trend and are excluded from every downstream sum.
struct TrendEstimate {
  Vector m;                  // per-frame trend, NaN before valid_from
  Eigen::Index sensors = 0;  // width of the implied mu matrix
  double sigma = 0.0;
  Eigen::Index window = 0;
  Eigen::Index valid_from = 0;  // 0-based; equals window

  Eigen::Index frames() const { return m.size(); }
  Eigen::Index valid_frames() const { return frames() - valid_from; }
  double last() const { return m(frames() - 1); }

  /// Materialized T x S mean matrix (row-constant).
  Matrix mu() const { return m.replicate(1, sensors); }
};

/// Frames per 24 hours at the given sampling step (seconds).
inline Eigen::Index default_trend_window(double step_seconds) {
  if (!(step_seconds > 0.0)) throw InvalidInputError("step must be positive");
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(86400.0 / step_seconds)));
}

/// m_t = mean of all S*w entries in the w rows preceding t.
inline TrendEstimate moving_average_trend(const ObservationGrid& grid, Eigen::Index w) {
  if (w < 1) throw InvalidInputError("trend window must be positive");
  if (!grid.fully_observed()) throw InvalidInputError("grid must be imputed before trend estimation");
  const Eigen::Index T = grid.frames();
  const Eigen::Index S = grid.sensors();
  if (T <= w)
    throw InsufficientDataError("trend window " + std::to_string(w) + " needs more than " +
                                std::to_string(w) + " frames, grid has " + std::to_string(T));
  std::vector<long double> prefix(static_cast<std::size_t>(T) + 1, 0.0L);
  for (Eigen::Index t = 0; t < T; ++t) {
    long double row = 0.0L;
    for (Eigen::Index s = 0; s < S; ++s) row += grid.values(t, s);
    prefix[static_cast<std::size_t>(t) + 1] = prefix[static_cast<std::size_t>(t)] + row;
  }
  TrendEstimate est;
  est.sensors = S;
  est.window = w;
  est.valid_from = w;
  est.m = Vector::Constant(T, std::numeric_limits<double>::quiet_NaN());
  const long double denom = static_cast<long double>(S) * static_cast<long double>(w);
  for (Eigen::Index t = w; t < T; ++t) {
    const auto hi = static_cast<std::size_t>(t);
    const auto lo = static_cast<std::size_t>(t - w);
    est.m(t) = static_cast<double>((prefix[hi] - prefix[lo]) / denom);
  }
  return est;
}

/// Centered data Y - mu over the valid rows, (T - w) x S.
inline Matrix trend_residuals(const ObservationGrid& grid, const TrendEstimate& trend) {
  if (trend.frames() != grid.frames())
    throw InvalidInputError("trend and grid differ in frame count");
  const Eigen::Index n = trend.valid_frames();
  if (n < 1) throw InsufficientDataError("trend has no valid rows");
  Matrix r(n, grid.sensors());
  for (Eigen::Index s = 0; s < grid.sensors(); ++s)
    for (Eigen::Index i = 0; i < n; ++i)
      r(i, s) = grid.values(trend.valid_from + i, s) - trend.m(trend.valid_from + i);
  return r;
}

/// Root-mean-square residual over all valid cells.
inline double estimate_sigma(const ObservationGrid& grid, const TrendEstimate& trend) {
  const Matrix r = trend_residuals(grid, trend);
  return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

/// Trend plus sigma in one pass, as every fitting pipeline needs both.
inline TrendEstimate fit_trend(const ObservationGrid& grid, Eigen::Index w) {
  TrendEstimate est = moving_average_trend(grid, w);
  est.sigma = estimate_sigma(grid, est);
  return est;
}

/// Future trend: the last valid m_t repeated over the horizon.
inline Vector future_trend(const TrendEstimate& trend, Eigen::Index horizon) {
  if (trend.valid_frames() < 1) throw InsufficientDataError("trend has no valid rows");
  return Vector::Constant(std::max<Eigen::Index>(horizon, 0), trend.last());
}

}  // namespace sepkrig
