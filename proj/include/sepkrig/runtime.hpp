#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sepkrig/io.hpp"
#include "sepkrig/kriging.hpp"

namespace sepkrig {

/// Content hash of a seasonal AR model, used to detect model drift between
/// nodes and the server.
inline std::uint64_t model_version(const SeasonalArModel& m) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto lag : m.lags) detail::hash_bytes(h, &lag, sizeof lag);
  for (double c : m.coeffs) detail::hash_bytes(h, &c, sizeof c);
  detail::hash_bytes(h, &m.innovation_sd, sizeof m.innovation_sd);
  return h;
}

/// What a sensor node sends: its centered forecasts for steps 1..horizon
/// made after observing base_frame.
struct ForecastMessage {
  std::string sensor_id;
  Eigen::Index base_frame = 0;
  Eigen::Index horizon = 0;
  std::vector<double> values;
  std::uint64_t model_version = 0;
  bool gap_filled = false;  // local LOCF was applied since the last message

  /// sensor_id,base_frame,horizon,values...,model_version
  std::string to_csv_row() const {
    std::string out = sensor_id + "," + std::to_string(base_frame) + "," + std::to_string(horizon);
    for (double v : values) out += "," + io::format_double(v);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(model_version));
    return out + "," + hex;
  }

  static ForecastMessage parse(std::string_view row) {
    const auto f = io::split(row);
    if (f.size() < 4) throw InvalidInputError("forecast message needs at least 4 fields");
    ForecastMessage m;
    m.sensor_id = f[0];
    m.base_frame = static_cast<Eigen::Index>(io::parse_int(f[1], "forecast message"));
    m.horizon = static_cast<Eigen::Index>(io::parse_int(f[2], "forecast message"));
    if (m.horizon < 0 || f.size() != static_cast<std::size_t>(m.horizon) + 4)
      throw InvalidInputError("forecast message field count does not match its horizon");
    for (Eigen::Index h = 0; h < m.horizon; ++h)
      m.values.push_back(io::parse_double(f[static_cast<std::size_t>(h) + 3], "forecast message"));
    m.model_version = std::stoull(f.back(), nullptr, 16);
    return m;
  }
};

/// Local state of one sensor node: recent centered residuals and its model.
struct SensorNodeState {
  std::string sensor_id;
  SeasonalArModel model;
  ExpandedPolynomial poly;
  std::size_t capacity = 0;
  std::vector<double> history;  // newest last; trimmed to capacity lazily
  Eigen::Index next_frame = 0;
  std::optional<double> last_value;
  bool gap_since_emit = false;

  SensorNodeState() = default;
  SensorNodeState(std::string id, SeasonalArModel m, Eigen::Index first_frame)
      : sensor_id(std::move(id)), model(std::move(m)), poly(expand_polynomial(model)),
        capacity(static_cast<std::size_t>(std::max<long long>(model.max_lag(), 1))), next_frame(first_frame) {
    history.reserve(2 * capacity);
  }

  std::span<const double> window() const {
    const auto n = std::min(capacity, history.size());
    return {history.data() + (history.size() - n), n};
  }

  void push(double residual) {
    history.push_back(residual);
    if (history.size() >= 2 * capacity) history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(capacity));
  }
};

struct NodeReading {
  Eigen::Index frame = 0;
  std::optional<double> value;  // nothing = missing reading
  double trend = 0.0;           // m_t for this frame
};

struct NodeStepResult {
  SensorNodeState state;
  std::optional<ForecastMessage> message;
};

/// Advances a node by one reading. Skipped frames and missing values are
/// carried forward from the last value and flag the next message. A message
/// is emitted when `emit_horizon` is set.
inline NodeStepResult sensor_step(SensorNodeState state, const NodeReading& r,
                                  std::optional<Eigen::Index> emit_horizon = std::nullopt) {
  if (r.frame < state.next_frame)
    throw InvalidInputError("sensor " + state.sensor_id + " received frame " + std::to_string(r.frame) +
                            " after frame " + std::to_string(state.next_frame - 1));
  const auto fill = [&]() -> double {
    if (!state.last_value) throw ImputationError("sensor " + state.sensor_id + " has no reading to carry forward");
    state.gap_since_emit = true;
    return *state.last_value;
  };
  for (; state.next_frame < r.frame; ++state.next_frame) state.push(fill() - r.trend);
  const double y = r.value ? *r.value : fill();
  state.last_value = y;
  state.push(y - r.trend);
  ++state.next_frame;

  NodeStepResult out;
  if (emit_horizon) {
    ForecastMessage m;
    m.sensor_id = state.sensor_id;
    m.base_frame = r.frame;
    m.horizon = *emit_horizon;
    m.values = forecast(state.poly, state.window(), *emit_horizon);
    m.model_version = model_version(state.model);
    m.gap_filled = state.gap_since_emit;
    state.gap_since_emit = false;
    out.message = std::move(m);
  }
  out.state = std::move(state);
  return out;
}

/// Server side: orders messages by layout index and combines them with the
/// spatial weights. Needs exactly one message per sensor, all for the same
/// base frame and horizon and, when `expected_version` is set, all built
/// from that model.
inline Matrix server_assemble(std::vector<ForecastMessage> messages, const SensorLayout& layout,
                              const Matrix& weights, const Vector& mu_future,
                              std::optional<std::uint64_t> expected_version = std::nullopt) {
  const Eigen::Index S = layout.size();
  if (weights.cols() != S) throw InvalidInputError("weights do not match the layout");
  std::vector<const ForecastMessage*> slot(static_cast<std::size_t>(S), nullptr);
  for (const auto& m : messages) {
    const auto idx = layout.index_of(m.sensor_id);
    if (!idx) throw AssemblyError("message from unknown sensor " + m.sensor_id);
    auto& p = slot[static_cast<std::size_t>(*idx)];
    if (p) throw AssemblyError("duplicate message from sensor " + m.sensor_id);
    p = &m;
  }
  for (Eigen::Index s = 0; s < S; ++s)
    if (!slot[static_cast<std::size_t>(s)])
      throw AssemblyError("missing message from sensor " + layout.ids()[static_cast<std::size_t>(s)]);
  const auto& first = *slot.front();
  for (const auto* m : slot) {
    if (m->base_frame != first.base_frame || m->horizon != first.horizon)
      throw AssemblyError("sensor " + m->sensor_id + " sent base frame " + std::to_string(m->base_frame) +
                          ", expected " + std::to_string(first.base_frame));
    if (static_cast<Eigen::Index>(m->values.size()) != m->horizon)
      throw AssemblyError("sensor " + m->sensor_id + " sent a malformed forecast");
    if (expected_version && m->model_version != *expected_version)
      throw AssemblyError("sensor " + m->sensor_id + " uses a different model version");
  }
  if (mu_future.size() < first.horizon) throw InvalidInputError("future trend shorter than horizon");
  Matrix zhat(first.horizon, S);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index h = 0; h < first.horizon; ++h)
      zhat(h, s) = slot[static_cast<std::size_t>(s)]->values[static_cast<std::size_t>(h)];
  return assemble_mean(zhat, weights, mu_future);
}

// ---------------------------------------------------------------------------
// Replay harness.

struct DistributedOptions {
  Eigen::Index horizon = 1;
  std::vector<Eigen::Index> request_frames;  // grid rows after which forecasts are assembled
  std::optional<std::uint64_t> schedule_seed;  // random interleaving of node steps and deliveries
  bool parallel = false;                     // one thread per node
};

struct DistributedPrediction {
  Eigen::Index base_frame = 0;
  Matrix mean;  // horizon x targets
};

/// Replays an imputed grid through one node per sensor and a server. With
/// a single model every node shares it and versions are checked; with one
/// model per sensor each node uses its own.
inline std::vector<DistributedPrediction> run_distributed(const ObservationGrid& grid, const SensorLayout& layout,
                                                          const std::vector<SeasonalArModel>& models,
                                                          Eigen::Index window, const Matrix& weights,
                                                          const DistributedOptions& opt) {
  const Eigen::Index S = layout.size();
  if (grid.sensors() != S) throw InvalidInputError("grid and layout differ in sensor count");
  if (models.size() != 1 && models.size() != static_cast<std::size_t>(S))
    throw InvalidInputError("need one shared model or one model per sensor");
  if (opt.horizon < 1) throw InvalidInputError("distributed forecasts need horizon >= 1");
  const TrendEstimate trend = moving_average_trend(grid, window);
  const Eigen::Index first = trend.valid_from;
  std::vector<Eigen::Index> requests = opt.request_frames;
  std::sort(requests.begin(), requests.end());
  for (auto f : requests)
    if (f < first || f >= grid.frames()) throw InvalidInputError("request frame " + std::to_string(f) + " out of range");

  std::vector<SensorNodeState> nodes;
  for (Eigen::Index s = 0; s < S; ++s)
    nodes.emplace_back(layout.ids()[static_cast<std::size_t>(s)], models.size() == 1 ? models[0] : models[static_cast<std::size_t>(s)], first);

  std::map<Eigen::Index, std::vector<ForecastMessage>> inbox;
  const auto is_request = [&](Eigen::Index t) { return std::binary_search(requests.begin(), requests.end(), t); };
  const auto step = [&](Eigen::Index s, Eigen::Index t) -> std::optional<ForecastMessage> {
    auto& node = nodes[static_cast<std::size_t>(s)];
    NodeReading r{t, grid.values(t, s), trend.m(t)};
    auto res = sensor_step(std::move(node), r, is_request(t) ? std::optional(opt.horizon) : std::nullopt);
    node = std::move(res.state);
    return std::move(res.message);
  };

  if (opt.parallel) {
    std::vector<std::vector<ForecastMessage>> out(static_cast<std::size_t>(S));
    {
      std::vector<std::jthread> pool;
      for (Eigen::Index s = 0; s < S; ++s)
        pool.emplace_back([&, s] {
          for (Eigen::Index t = first; t < grid.frames(); ++t)
            if (auto m = step(s, t)) out[static_cast<std::size_t>(s)].push_back(std::move(*m));
        });
    }
    for (auto& msgs : out)
      for (auto& m : msgs) inbox[m.base_frame].push_back(std::move(m));
  } else {
    std::vector<Eigen::Index> pos(static_cast<std::size_t>(S), first);
    std::optional<std::mt19937_64> rng;
    if (opt.schedule_seed) rng.emplace(*opt.schedule_seed);
    std::vector<Eigen::Index> pending;
    for (Eigen::Index s = 0; s < S; ++s) pending.push_back(s);
    std::size_t rr = 0;
    while (!pending.empty()) {
      std::size_t k = rng ? std::uniform_int_distribution<std::size_t>(0, pending.size() - 1)(*rng) : rr++ % pending.size();
      const Eigen::Index s = pending[k];
      auto& t = pos[static_cast<std::size_t>(s)];
      if (auto m = step(s, t)) inbox[m->base_frame].push_back(std::move(*m));
      if (++t == grid.frames()) pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
    }
    if (rng)
      for (auto& [f, msgs] : inbox) std::shuffle(msgs.begin(), msgs.end(), *rng);
  }

  std::optional<std::uint64_t> version;
  if (models.size() == 1) version.emplace(model_version(models[0]));
  std::vector<DistributedPrediction> preds;
  for (auto f : requests) {
    const Vector mu_future = Vector::Constant(opt.horizon, trend.m(f));
    preds.push_back({f, server_assemble(std::move(inbox[f]), layout, weights, mu_future, version)});
  }
  return preds;
}

}  // namespace sepkrig
