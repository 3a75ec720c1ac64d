#pragma once

#include <cstdint>
#include <cstring>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sepkrig/acf.hpp"
#include "sepkrig/seasonal_ar.hpp"
#include "sepkrig/trend.hpp"

namespace sepkrig {

using TemporalModel = std::variant<SeasonalArModel, TemporalAcfModel>;

/// Everything prediction needs: trend (with sigma) and both correlation models.
struct FittedField {
  TrendEstimate trend;
  SpatialAcfModel spatial;
  TemporalModel temporal;

  double sigma() const { return trend.sigma; }
};

struct PredictionTarget {
  std::vector<Point> locations;
  Eigen::Index horizon = 0;  // 0 = same-frame interpolation
};

struct PredictionResult {
  Matrix mean;       // rows: frames (1 when horizon is 0), cols: targets
  Matrix variance;   // same shape, empty when not computed
  Matrix zhat;       // centered temporal forecasts at sensors (forecast-first) or targets
  Matrix weights;    // targets x S spatial weights
  Eigen::Index base_frame = 0;  // last observed row
  Eigen::Index horizon = 0;
};

/// Which step runs first. Both orders agree because a shared temporal filter
/// commutes with the spatial weighting.
enum class PredictionOrder { automatic, forecast_first, interpolate_first };

// ---------------------------------------------------------------------------
// Generic separable algebra on explicit factors.

/// beta_T (y - mu) beta_S^T with beta = rho R^{-1}; centered is T x S.
inline Matrix separable_mean(const Matrix& rho_s, const Matrix& r_s, const Matrix& rho_t, const Matrix& r_t,
                             const Matrix& centered) {
  const auto ls = robust_cholesky(r_s, "spatial correlation matrix");
  const auto lt = robust_cholesky(r_t, "temporal correlation matrix");
  const Matrix beta_s = ls.solve(rho_s.transpose()).transpose();
  const Matrix beta_t = lt.solve(rho_t.transpose()).transpose();
  return beta_t * centered * beta_s.transpose();
}

/// Conditional variances over sigma^2, T' x S':
/// diag(R'_T) diag(R'_S)^T - diag(rho_T R_T^{-1} rho_T^T) diag(rho_S R_S^{-1} rho_S^T)^T.
inline Matrix separable_variance(const Matrix& rho_s, const Matrix& r_s, const Matrix& rp_s, const Matrix& rho_t,
                                 const Matrix& r_t, const Matrix& rp_t) {
  const auto ls = robust_cholesky(r_s, "spatial correlation matrix");
  const auto lt = robust_cholesky(r_t, "temporal correlation matrix");
  const Vector explained_s = (rho_s.transpose().array() * ls.solve(rho_s.transpose()).array()).colwise().sum().transpose();
  const Vector explained_t = (rho_t.transpose().array() * lt.solve(rho_t.transpose()).array()).colwise().sum().transpose();
  return rp_t.diagonal() * rp_s.diagonal().transpose() - explained_t * explained_s.transpose();
}

// ---------------------------------------------------------------------------
// Spatial step.

inline Matrix spatial_weights(const SpatialAcfModel& model, const Matrix& sensor_dist, const Matrix& cross_dist) {
  const Matrix r = spatial_correlation(model, sensor_dist);
  const Matrix rho = spatial_correlation(model, cross_dist);
  const auto llt = robust_cholesky(r, "spatial correlation matrix");
  return llt.solve(rho.transpose()).transpose();
}

/// beta_S = rho_S R_S^{-1}, targets x S.
inline Matrix spatial_weights(const SpatialAcfModel& model, const SensorLayout& layout,
                              std::span<const Point> targets) {
  if (targets.empty()) throw InvalidInputError("no target locations");
  return spatial_weights(model, layout.distances(), cross_distances(targets, layout.coords()));
}

/// diag(rho_S R_S^{-1} rho_S^T): the share of prior variance explained at each target.
inline Vector spatial_explained(const SpatialAcfModel& model, const SensorLayout& layout,
                                std::span<const Point> targets, const Matrix& weights) {
  const Matrix rho = spatial_correlation(model, cross_distances(targets, layout.coords()));
  return (weights.array() * rho.array()).rowwise().sum();
}

namespace detail {

inline void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace detail

/// Caches spatial weights keyed by a content hash of (model, layout, targets).
class WeightsCache {
 public:
  Matrix get(const SpatialAcfModel& model, const SensorLayout& layout, std::span<const Point> targets) {
    const auto key = key_of(model, layout, targets);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    Matrix w = spatial_weights(model, layout, targets);
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(w)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

  static std::uint64_t key_of(const SpatialAcfModel& m, const SensorLayout& layout, std::span<const Point> targets) {
    std::uint64_t h = 1469598103934665603ULL;
    const int fam = static_cast<int>(m.family);
    const double smooth = m.smoothness.value_or(-1.0);
    detail::hash_bytes(h, &fam, sizeof fam);
    detail::hash_bytes(h, &m.range, sizeof m.range);
    detail::hash_bytes(h, &smooth, sizeof smooth);
    detail::hash_bytes(h, &m.nugget_weight, sizeof m.nugget_weight);
    detail::hash_bytes(h, layout.distances().data(), sizeof(double) * static_cast<std::size_t>(layout.distances().size()));
    for (const auto& c : layout.coords()) detail::hash_bytes(h, &c, sizeof c);
    for (const auto& t : targets) detail::hash_bytes(h, &t, sizeof t);
    return h;
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, Matrix> cache_;
};

/// mean(h, i) = mu'(h) + sum_s zhat(h, s) * weights(i, s), summed in sensor
/// order. Shared by the monolithic and the distributed paths so both produce
/// identical bits.
inline Matrix assemble_mean(const Matrix& zhat, const Matrix& weights, const Vector& mu_future) {
  Matrix out(zhat.rows(), weights.rows());
  for (Eigen::Index h = 0; h < zhat.rows(); ++h) {
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index s = 0; s < zhat.cols(); ++s) acc += zhat(h, s) * weights(i, s);
      out(h, i) = mu_future(h) + acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Temporal step.

/// Frames of centered history the temporal model consumes.
inline Eigen::Index temporal_history_needed(const TemporalModel& model, Eigen::Index available) {
  if (const auto* ar = std::get_if<SeasonalArModel>(&model)) return static_cast<Eigen::Index>(ar->max_lag());
  const auto& acf = std::get<TemporalAcfModel>(model);
  return std::min<Eigen::Index>(available, 10 * static_cast<Eigen::Index>(acf.effective_memory()));
}

namespace detail {

/// Dense beta_T and explained variances for an explicit ACF over the last
/// `window` frames; row h-1 forecasts h steps ahead.
struct DenseTemporal {
  Matrix beta;       // H x W
  Vector explained;  // H
};

inline DenseTemporal dense_temporal(const TemporalAcfModel& acf, Eigen::Index window, Eigen::Index horizon) {
  const Matrix r = temporal_correlation(acf, window);
  Matrix rho(horizon, window);
  for (Eigen::Index h = 0; h < horizon; ++h)
    for (Eigen::Index i = 0; i < window; ++i) rho(h, i) = acf(static_cast<long long>(window - 1 - i + h + 1));
  const auto llt = robust_cholesky(r, "temporal correlation matrix");
  DenseTemporal out;
  out.beta = llt.solve(rho.transpose()).transpose();
  out.explained = (out.beta.array() * rho.array()).rowwise().sum();
  return out;
}

}  // namespace detail

/// Centered forecasts of each column of `history` (frames x columns) for
/// steps 1..horizon.
inline Matrix temporal_forecast(const TemporalModel& model, const Matrix& history, Eigen::Index horizon) {
  if (const auto* ar = std::get_if<SeasonalArModel>(&model)) return forecast_columns(*ar, history, horizon);
  const auto& acf = std::get<TemporalAcfModel>(model);
  const Eigen::Index w = temporal_history_needed(model, history.rows());
  if (w < 1) throw InsufficientDataError("no history to forecast from");
  const auto dt = detail::dense_temporal(acf, w, horizon);
  return dt.beta * history.bottomRows(w);
}

/// diag(rho_T R_T^{-1} rho_T^T) per horizon step; 1 for horizon 0.
inline Vector temporal_explained(const TemporalModel& model, Eigen::Index horizon, Eigen::Index available) {
  if (horizon == 0) return Vector::Ones(1);
  if (const auto* ar = std::get_if<SeasonalArModel>(&model)) {
    if (horizon != 1)
      throw CapabilityError("prediction variance for seasonal AR is only available one step ahead (horizon " +
                            std::to_string(horizon) + " requested)");
    return Vector::Constant(1, 1.0 - innovation_variance_ratio(*ar));
  }
  const auto& acf = std::get<TemporalAcfModel>(model);
  const Eigen::Index w = temporal_history_needed(model, available);
  if (w < 1) throw InsufficientDataError("no history for temporal variance");
  return detail::dense_temporal(acf, w, horizon).explained;
}

// ---------------------------------------------------------------------------
// Prediction.

inline PredictionResult predict_mean(const FittedField& field, const SensorLayout& layout, const ObservationGrid& grid,
                                     const PredictionTarget& target,
                                     PredictionOrder order = PredictionOrder::automatic,
                                     WeightsCache* cache = nullptr) {
  if (!grid.fully_observed()) throw InvalidInputError("grid must be imputed before prediction");
  if (grid.sensors() != layout.size()) throw InvalidInputError("grid and layout differ in sensor count");
  if (target.horizon < 0) throw InvalidInputError("horizon must be >= 0");
  const TrendEstimate trend = moving_average_trend(grid, field.trend.window);
  const Matrix history = trend_residuals(grid, trend);

  PredictionResult res;
  res.base_frame = grid.frames() - 1;
  res.horizon = target.horizon;
  res.weights = cache ? cache->get(field.spatial, layout, target.locations)
                      : spatial_weights(field.spatial, layout, target.locations);
  const Eigen::Index rows = std::max<Eigen::Index>(target.horizon, 1);
  const Vector mu_future = future_trend(trend, rows);

  if (target.horizon == 0) {
    res.zhat = history.bottomRows(1);
    res.mean = assemble_mean(res.zhat, res.weights, mu_future);
    return res;
  }
  const Eigen::Index need = temporal_history_needed(field.temporal, history.rows());
  if (history.rows() < need)
    throw InsufficientDataError("temporal model needs " + std::to_string(need) + " valid frames, have " +
                                std::to_string(history.rows()));
  const bool interpolate_first =
      order == PredictionOrder::interpolate_first ||
      (order == PredictionOrder::automatic && res.weights.rows() < res.weights.cols());
  if (!interpolate_first) {
    res.zhat = temporal_forecast(field.temporal, history.bottomRows(need), target.horizon);
    res.mean = assemble_mean(res.zhat, res.weights, mu_future);
  } else {
    const Matrix interpolated = history.bottomRows(need) * res.weights.transpose();
    res.zhat = temporal_forecast(field.temporal, interpolated, target.horizon);
    res.mean = res.zhat;
    for (Eigen::Index h = 0; h < rows; ++h) res.mean.row(h).array() += mu_future(h);
  }
  return res;
}

/// V = sigma^2 (1 - q_h p_i) where q_h and p_i are the explained shares of
/// the temporal and spatial steps (unit-diagonal correlations).
inline Matrix predict_variance(const FittedField& field, const SensorLayout& layout, const PredictionTarget& target,
                               Eigen::Index history_frames, const Matrix* weights = nullptr) {
  const Matrix w = weights ? *weights : spatial_weights(field.spatial, layout, target.locations);
  const Vector p = spatial_explained(field.spatial, layout, target.locations, w);
  const Vector q = temporal_explained(field.temporal, target.horizon, history_frames);
  const double s2 = field.sigma() * field.sigma();
  Matrix v(q.size(), p.size());
  for (Eigen::Index h = 0; h < q.size(); ++h)
    for (Eigen::Index i = 0; i < p.size(); ++i) v(h, i) = std::max(0.0, s2 * (1.0 - q(h) * p(i)));
  return v;
}

/// Mean plus variance when the model supports it; `variance` stays empty
/// otherwise and `variance_error` holds the reason.
inline PredictionResult predict(const FittedField& field, const SensorLayout& layout, const ObservationGrid& grid,
                                const PredictionTarget& target, std::string* variance_error = nullptr,
                                PredictionOrder order = PredictionOrder::automatic) {
  PredictionResult res = predict_mean(field, layout, grid, target, order);
  try {
    res.variance = predict_variance(field, layout, target, grid.frames() - field.trend.window, &res.weights);
  } catch (const CapabilityError& e) {
    if (!variance_error) throw;
    *variance_error = e.what();
  }
  return res;
}

/// Cell-center targets over the layout's bounding box, row-major from the
/// top-left (max y) corner.
inline std::vector<Point> raster_targets(const SensorLayout& layout, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1) throw InvalidInputError("raster resolution must be positive");
  double x0 = layout.coords().front().x, x1 = x0, y0 = layout.coords().front().y, y1 = y0;
  for (const auto& c : layout.coords()) {
    x0 = std::min(x0, c.x);
    x1 = std::max(x1, c.x);
    y0 = std::min(y0, c.y);
    y1 = std::max(y1, c.y);
  }
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      pts.push_back({x0 + (x1 - x0) * (static_cast<double>(c) + 0.5) / static_cast<double>(cols),
                     y1 - (y1 - y0) * (static_cast<double>(r) + 0.5) / static_cast<double>(rows)});
  return pts;
}

}  // namespace sepkrig
