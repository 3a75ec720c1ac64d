#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "sepkrig/kriging.hpp"
#include "sepkrig/stats.hpp"

namespace sepkrig {

enum class SelectionMetric { mae, p95 };
enum class SelectionPredictor { kriging, mean };

inline SelectionMetric parse_metric(std::string_view s) {
  if (s == "mae") return SelectionMetric::mae;
  if (s == "p95") return SelectionMetric::p95;
  throw InvalidInputError("unknown metric '" + std::string(s) + "'");
}

inline std::string_view to_string(SelectionMetric m) { return m == SelectionMetric::mae ? "mae" : "p95"; }

struct PredictionMetrics {
  double mae = 0.0;
  double p95 = 0.0;

  double get(SelectionMetric m) const { return m == SelectionMetric::mae ? mae : p95; }
};

inline PredictionMetrics metrics_from_errors(std::vector<double> abs_errors) {
  if (abs_errors.empty()) throw InvalidInputError("no prediction errors to summarize");
  PredictionMetrics out;
  out.mae = stats::mean(abs_errors);
  out.p95 = stats::quantile(std::move(abs_errors), 0.95);
  return out;
}

inline PredictionMetrics prediction_metrics(const Matrix& predicted, const Matrix& actual) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
    throw InvalidInputError("predicted and actual differ in shape");
  if (predicted.size() == 0) throw InvalidInputError("empty prediction set");
  std::vector<double> err(static_cast<std::size_t>(predicted.size()));
  for (Eigen::Index i = 0; i < predicted.size(); ++i)
    err[static_cast<std::size_t>(i)] = std::abs(predicted.data()[i] - actual.data()[i]);
  return metrics_from_errors(std::move(err));
}

inline std::vector<Eigen::Index> complement(const std::vector<Eigen::Index>& active, Eigen::Index n) {
  std::vector<bool> on(static_cast<std::size_t>(n), false);
  for (auto a : active) on[static_cast<std::size_t>(a)] = true;
  std::vector<Eigen::Index> out;
  for (Eigen::Index s = 0; s < n; ++s)
    if (!on[static_cast<std::size_t>(s)]) out.push_back(s);
  return out;
}

/// Per-frame mean of the active sensors, broadcast to every inactive sensor
/// (columns in ascending sensor order).
inline Matrix mean_baseline(const Matrix& values, const std::vector<Eigen::Index>& active) {
  if (active.empty()) throw InvalidInputError("mean baseline needs at least one active sensor");
  const auto inactive = complement(active, values.cols());
  Vector m = Vector::Zero(values.rows());
  for (auto a : active) m += values.col(a);
  m /= static_cast<double>(active.size());
  return m.replicate(1, static_cast<Eigen::Index>(inactive.size()));
}

struct SelectionStep {
  Eigen::Index added = -1;
  std::string added_id;
  std::vector<Eigen::Index> active;  // in selection order
  double score = 0.0;
  std::vector<double> candidate_scores;  // per sensor; NaN when not a candidate
};

struct SelectionTrace {
  SelectionMetric metric = SelectionMetric::mae;
  SelectionPredictor predictor = SelectionPredictor::kriging;
  std::vector<SelectionStep> steps;
};

/// Scores sensor configurations on a test grid by predicting the inactive
/// sensors from the active ones within each frame. Only active readings feed
/// the predictions, including the moving-average trend.
class ConfigurationScorer {
 public:
  ConfigurationScorer(const ObservationGrid& grid, const SensorLayout& layout, const SpatialAcfModel& spatial,
                      Eigen::Index window, SelectionPredictor predictor)
      : grid_(grid), layout_(layout), spatial_(spatial), window_(window), predictor_(predictor) {
    if (!grid.fully_observed()) throw InvalidInputError("test grid must be imputed");
    if (grid.sensors() != layout.size()) throw InvalidInputError("grid and layout differ in sensor count");
    if (window < 1 || grid.frames() <= window)
      throw InsufficientDataError("test grid needs more than " + std::to_string(window) + " frames");
    const Eigen::Index T = grid.frames();
    prefix_ = Matrix::Zero(T + 1, grid.sensors());
    for (Eigen::Index s = 0; s < grid.sensors(); ++s)
      for (Eigen::Index t = 0; t < T; ++t) prefix_(t + 1, s) = prefix_(t, s) + grid.values(t, s);
  }

  /// Absolute errors pooled over evaluation frames and inactive sensors.
  std::vector<double> errors(const std::vector<Eigen::Index>& active) const {
    const auto inactive = complement(active, grid_.sensors());
    const Eigen::Index T = grid_.frames();
    std::vector<double> err;
    err.reserve(static_cast<std::size_t>((T - window_) * static_cast<Eigen::Index>(inactive.size())));
    if (predictor_ == SelectionPredictor::mean) {
      for (Eigen::Index t = window_; t < T; ++t) {
        double m = 0.0;
        for (auto a : active) m += grid_.values(t, a);
        m /= static_cast<double>(active.size());
        for (auto i : inactive) err.push_back(std::abs(grid_.values(t, i) - m));
      }
      return err;
    }
    const SensorLayout act = layout_.subset(active);
    std::vector<Point> targets;
    for (auto i : inactive) targets.push_back(layout_.coords()[static_cast<std::size_t>(i)]);
    Matrix cross(static_cast<Eigen::Index>(inactive.size()), static_cast<Eigen::Index>(active.size()));
    for (std::size_t r = 0; r < inactive.size(); ++r)
      for (std::size_t c = 0; c < active.size(); ++c)
        cross(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = layout_.distances()(inactive[r], active[c]);
    const Matrix w = spatial_weights(spatial_, act.distances(), cross);
    const double denom = static_cast<double>(active.size()) * static_cast<double>(window_);
    for (Eigen::Index t = window_; t < T; ++t) {
      double m = 0.0;
      for (auto a : active) m += prefix_(t, a) - prefix_(t - window_, a);
      m /= denom;
      for (std::size_t r = 0; r < inactive.size(); ++r) {
        double pred = m;
        for (std::size_t c = 0; c < active.size(); ++c)
          pred += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * (grid_.values(t, active[c]) - m);
        err.push_back(std::abs(grid_.values(t, inactive[r]) - pred));
      }
    }
    return err;
  }

  PredictionMetrics score(const std::vector<Eigen::Index>& active) const { return metrics_from_errors(errors(active)); }

 private:
  const ObservationGrid& grid_;
  const SensorLayout& layout_;
  SpatialAcfModel spatial_;
  Eigen::Index window_;
  SelectionPredictor predictor_;
  Matrix prefix_;
};

/// Greedy forward selection: start from the best single sensor, then add the
/// sensor whose inclusion gives the lowest score. Ties go to the lowest index.
inline SelectionTrace forward_select(const ObservationGrid& test, const SensorLayout& layout, const FittedField& field,
                                     SelectionMetric metric, Eigen::Index max_k,
                                     SelectionPredictor predictor = SelectionPredictor::kriging) {
  const Eigen::Index S = layout.size();
  if (S < 2) throw InvalidInputError("selection needs at least 2 sensors");
  const ConfigurationScorer scorer(test, layout, field.spatial, field.trend.window, predictor);
  SelectionTrace trace;
  trace.metric = metric;
  trace.predictor = predictor;
  std::vector<Eigen::Index> active;
  const Eigen::Index steps = std::clamp<Eigen::Index>(max_k, 0, S - 1);
  for (Eigen::Index k = 0; k < steps; ++k) {
    SelectionStep step;
    step.candidate_scores.assign(static_cast<std::size_t>(S), std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    for (auto c : complement(active, S)) {
      auto trial = active;
      trial.push_back(c);
      const double sc = scorer.score(trial).get(metric);
      step.candidate_scores[static_cast<std::size_t>(c)] = sc;
      if (sc < best) {
        best = sc;
        step.added = c;
      }
    }
    if (step.added < 0) throw NumericalError("no finite candidate score at selection step " + std::to_string(k + 1));
    active.push_back(step.added);
    step.active = active;
    step.added_id = layout.ids()[static_cast<std::size_t>(step.added)];
    step.score = best;
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

}  // namespace sepkrig
