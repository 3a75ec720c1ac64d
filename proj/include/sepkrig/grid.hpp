#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sepkrig/error.hpp"

namespace sepkrig {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using MissingMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Pairwise Euclidean distances between planar points.
inline Matrix build_spatial_distances(std::span<const Point> coords) {
  if (coords.empty()) throw InvalidInputError("no coordinates given");
  const auto n = static_cast<Eigen::Index>(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!std::isfinite(coords[i].x) || !std::isfinite(coords[i].y))
      throw InvalidInputError("non-finite coordinate at point " + std::to_string(i));
  }
  Matrix dist = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = std::hypot(coords[i].x - coords[j].x, coords[i].y - coords[j].y);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

/// Distances from each target (rows) to each reference point (columns).
inline Matrix cross_distances(std::span<const Point> targets, std::span<const Point> refs) {
  Matrix d(static_cast<Eigen::Index>(targets.size()), static_cast<Eigen::Index>(refs.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!std::isfinite(targets[i].x) || !std::isfinite(targets[i].y))
      throw InvalidInputError("non-finite target coordinate at index " + std::to_string(i));
    for (std::size_t j = 0; j < refs.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::hypot(targets[i].x - refs[j].x, targets[i].y - refs[j].y);
  }
  return d;
}

/// Checks symmetry, zero diagonal, nonnegativity and the triangle inequality.
/// Returns an empty string when valid, otherwise a description of the first
/// violation.
inline std::string check_distance_matrix(const Matrix& d, double tol = 1e-9) {
  if (d.rows() != d.cols()) return "distance matrix is not square";
  const Eigen::Index n = d.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(d(i, i)) > tol) return "nonzero diagonal at " + std::to_string(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(d(i, j)) || d(i, j) < 0.0)
        return "negative or non-finite distance at (" + std::to_string(i) + "," + std::to_string(j) + ")";
      if (std::abs(d(i, j) - d(j, i)) > tol)
        return "asymmetric distance at (" + std::to_string(i) + "," + std::to_string(j) + ")";
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        if (d(i, j) > d(i, k) + d(k, j) + tol * (1.0 + d(i, j)))
          return "triangle inequality violated for (" + std::to_string(i) + "," +
                 std::to_string(j) + "," + std::to_string(k) + ")";
  return {};
}

class SensorLayout {
 public:
  SensorLayout() = default;

  SensorLayout(std::vector<std::string> ids, std::vector<Point> coords)
      : ids_(std::move(ids)), coords_(std::move(coords)) {
    validate_ids();
    dist_ = build_spatial_distances(coords_);
  }

  /// Layout with a precomputed distance matrix (e.g. shortest paths around
  /// obstacles). The matrix must be a valid metric on the sensors.
  SensorLayout(std::vector<std::string> ids, std::vector<Point> coords, Matrix dist)
      : ids_(std::move(ids)), coords_(std::move(coords)), dist_(std::move(dist)) {
    validate_ids();
    if (dist_.rows() != size() || dist_.cols() != size())
      throw InvalidInputError("distance override has wrong shape");
    if (auto why = check_distance_matrix(dist_); !why.empty())
      throw InvalidInputError("distance override: " + why);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Point>& coords() const { return coords_; }
  const Matrix& distances() const { return dist_; }

  std::optional<Eigen::Index> index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Layout restricted to the given sensor indices, in the given order.
  SensorLayout subset(std::span<const Eigen::Index> idx) const {
    SensorLayout out;
    out.ids_.reserve(idx.size());
    out.coords_.reserve(idx.size());
    for (auto i : idx) {
      out.ids_.push_back(ids_[static_cast<std::size_t>(i)]);
      out.coords_.push_back(coords_[static_cast<std::size_t>(i)]);
    }
    out.dist_.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b)
        out.dist_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = dist_(idx[a], idx[b]);
    out.rebuild_index();
    return out;
  }

 private:
  void validate_ids() {
    if (ids_.empty()) throw InvalidInputError("layout has no sensors");
    if (ids_.size() != coords_.size())
      throw InvalidInputError("layout ids and coordinates differ in length");
    rebuild_index();
    if (index_.size() != ids_.size()) throw InvalidInputError("duplicate sensor id in layout");
  }

  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], static_cast<Eigen::Index>(i));
  }

  std::vector<std::string> ids_;
  std::vector<Point> coords_;
  Matrix dist_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

/// Readings on an equispaced time grid; column s holds the series of sensor s.
struct ObservationGrid {
  std::vector<std::string> sensor_ids;
  double start_time = 0.0;
  double step = 1.0;
  Matrix values;
  MissingMask missing;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index sensors() const { return values.cols(); }
  double time_of(Eigen::Index row) const { return start_time + static_cast<double>(row) * step; }
  bool fully_observed() const { return !missing.any(); }

  static ObservationGrid from_values(std::vector<std::string> ids, Matrix values,
                                     double start_time = 0.0, double step = 1.0) {
    ObservationGrid g;
    g.sensor_ids = std::move(ids);
    g.start_time = start_time;
    g.step = step;
    g.missing = MissingMask::Constant(values.rows(), values.cols(), false);
    g.values = std::move(values);
    g.validate();
    return g;
  }

  void validate() const {
    if (values.rows() < 1) throw InvalidInputError("grid has no frames");
    if (static_cast<std::size_t>(values.cols()) != sensor_ids.size())
      throw InvalidInputError("grid column count differs from sensor id count");
    if (missing.rows() != values.rows() || missing.cols() != values.cols())
      throw InvalidInputError("missing mask shape differs from values");
    if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInputError("grid step must be positive");
  }
};

/// Last observation carried forward; leading gaps are back-filled from the
/// first observed value of the column.
inline ObservationGrid locf_impute(const ObservationGrid& grid) {
  ObservationGrid out = grid;
  for (Eigen::Index s = 0; s < out.sensors(); ++s) {
    Eigen::Index first = -1;
    for (Eigen::Index t = 0; t < out.frames(); ++t) {
      if (!out.missing(t, s)) {
        first = t;
        break;
      }
    }
    if (first < 0)
      throw ImputationError("sensor '" + out.sensor_ids[static_cast<std::size_t>(s)] +
                            "' has no observed values");
    for (Eigen::Index t = 0; t < first; ++t) out.values(t, s) = out.values(first, s);
    double last = out.values(first, s);
    for (Eigen::Index t = first; t < out.frames(); ++t) {
      if (out.missing(t, s))
        out.values(t, s) = last;
      else
        last = out.values(t, s);
    }
  }
  out.missing.setConstant(false);
  return out;
}

struct Reading {
  std::string sensor_id;
  double timestamp = 0.0;
  double value = 0.0;
};

/// Bins readings into half-open intervals [start + k*step, start + (k+1)*step).
/// The grid starts at the earliest timestamp unless `start_time` is given.
/// Within a bin the reading with the latest timestamp wins (input order breaks
/// ties).
inline ObservationGrid project_to_grid(std::span<const Reading> readings,
                                       const std::vector<std::string>& sensor_ids, double step,
                                       std::optional<double> start_time = std::nullopt) {
  if (readings.empty()) throw InvalidInputError("no readings");
  if (!(step > 0.0) || !std::isfinite(step)) throw InvalidInputError("step must be positive");
  std::unordered_map<std::string, Eigen::Index> col;
  for (std::size_t i = 0; i < sensor_ids.size(); ++i) col.emplace(sensor_ids[i], static_cast<Eigen::Index>(i));

  double lo = readings.front().timestamp;
  double hi = lo;
  for (const auto& r : readings) {
    if (!std::isfinite(r.timestamp)) throw InvalidInputError("non-finite timestamp for " + r.sensor_id);
    if (!col.contains(r.sensor_id)) throw InvalidInputError("unknown sensor_id '" + r.sensor_id + "'");
    lo = std::min(lo, r.timestamp);
    hi = std::max(hi, r.timestamp);
  }
  const double start = start_time.value_or(lo);
  if (lo < start) throw InvalidInputError("reading precedes grid start time");
  const auto frames = static_cast<Eigen::Index>(std::floor((hi - start) / step)) + 1;
  const auto n_sensors = static_cast<Eigen::Index>(sensor_ids.size());

  ObservationGrid g;
  g.sensor_ids = sensor_ids;
  g.start_time = start;
  g.step = step;
  g.values = Matrix::Zero(frames, n_sensors);
  g.missing = MissingMask::Constant(frames, n_sensors, true);
  Matrix stamp = Matrix::Constant(frames, n_sensors, -std::numeric_limits<double>::infinity());
  for (const auto& r : readings) {
    const auto t = static_cast<Eigen::Index>(std::floor((r.timestamp - start) / step));
    const auto s = col.at(r.sensor_id);
    if (r.timestamp >= stamp(t, s)) {
      stamp(t, s) = r.timestamp;
      g.values(t, s) = r.value;
      g.missing(t, s) = false;
    }
  }
  return g;
}

}  // namespace sepkrig
