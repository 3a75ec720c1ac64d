#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sepkrig/kriging.hpp"
#include "sepkrig/spatial_fit.hpp"
#include "sepkrig/stats.hpp"

namespace sepkrig {

/// Generator for stream `index` of a base seed. Streams depend only on
/// (base_seed, index), so any execution order reproduces them.
inline std::mt19937_64 make_stream(std::uint64_t base_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// The seasonal AR behind a temporal model; an explicit AR(1) without nugget
/// is the one-lag case. Anything else has no AR recursion to simulate.
inline SeasonalArModel as_seasonal_ar(const TemporalModel& model) {
  if (const auto* ar = std::get_if<SeasonalArModel>(&model)) return *ar;
  const auto& acf = std::get<TemporalAcfModel>(model);
  if (acf.kind == TemporalKind::ar1 && acf.nugget_weight == 1.0)
    return SeasonalArModel{{1}, {acf.coefficient}, std::sqrt(1.0 - acf.coefficient * acf.coefficient)};
  throw CapabilityError("simulation needs a seasonal AR temporal model");
}

/// Simulation mean for T frames: the trend verbatim, rows without a trend take
/// the first valid value and frames past the end repeat the last one.
inline Vector simulation_mean(const TrendEstimate& trend, Eigen::Index frames) {
  if (trend.valid_frames() < 1) throw InsufficientDataError("trend has no valid rows");
  Vector mu(frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index src = std::clamp<Eigen::Index>(t, trend.valid_from, trend.frames() - 1);
    mu(t) = trend.m(src);
  }
  return mu;
}

/// Y = mu + sigma * Z L^T where the columns of Z are independent unit-variance
/// draws of the temporal model and R_S = L L^T.
inline ObservationGrid simulate_dataset(const Vector& mu, double sigma, const SpatialAcfModel& spatial,
                                        const SeasonalArModel& temporal, Eigen::Index frames,
                                        const SensorLayout& layout, std::uint64_t seed,
                                        std::optional<Eigen::Index> burn_in = std::nullopt) {
  if (frames < 1) throw InvalidInputError("need at least one frame");
  if (mu.size() != frames) throw InvalidInputError("simulation mean length differs from frame count");
  const Eigen::Index S = layout.size();
  ObservationGrid g;
  g.sensor_ids = layout.ids();
  g.values = mu.replicate(1, S);
  g.missing = MissingMask::Constant(frames, S, false);
  if (sigma == 0.0) return g;

  SeasonalArModel unit = temporal;
  unit.innovation_sd = std::sqrt(innovation_variance_ratio(temporal));
  auto rng = make_stream(seed, 0);
  Matrix z(frames, S);
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto col = simulate(unit, frames, burn_in, rng);
    for (Eigen::Index t = 0; t < frames; ++t) z(t, s) = col[static_cast<std::size_t>(t)];
  }
  const auto llt = robust_cholesky(build_correlation_matrix(spatial, layout.distances()), "spatial correlation matrix");
  const Matrix l = llt.matrixL();
  g.values.noalias() += sigma * z * l.transpose();
  return g;
}

struct BootstrapParameter {
  std::string name;
  double estimate = 0.0;
  double std_err = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

struct BootstrapReport {
  int replicates = 0;
  int failures = 0;
  std::uint64_t base_seed = 0;
  bool unreliable = false;
  std::vector<BootstrapParameter> parameters;
  std::vector<std::vector<double>> draws;  // per parameter, successful replicates in index order
};

struct BootstrapOptions {
  int workers = 1;
  SpatialFitOptions spatial;
  SeasonalArFitOptions temporal;
  std::optional<Eigen::Index> burn_in;
};

/// Named parameter vector in report order: phi_1..phi_K, nugget, range, [smoothness].
inline std::vector<std::pair<std::string, double>> parameter_vector(const SpatialAcfModel& spatial,
                                                                    const SeasonalArModel& temporal) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t k = 0; k < temporal.coeffs.size(); ++k)
    out.emplace_back("phi" + std::to_string(k + 1), temporal.coeffs[k]);
  out.emplace_back("nugget", spatial.nugget());
  out.emplace_back("range", spatial.range);
  if (has_smoothness(spatial.family)) out.emplace_back("smoothness", *spatial.smoothness);
  return out;
}

/// One replicate of the full estimation pipeline on a dataset simulated at
/// the fitted parameters. Returns nothing when either fit fails.
inline std::optional<std::vector<double>> bootstrap_replicate(const FittedField& field, const SensorLayout& layout,
                                                              Eigen::Index frames, std::uint64_t seed,
                                                              const BootstrapOptions& opt) {
  try {
    const SeasonalArModel ar = as_seasonal_ar(field.temporal);
    const ObservationGrid sim = simulate_dataset(simulation_mean(field.trend, frames), field.sigma(), field.spatial,
                                                 ar, frames, layout, seed, opt.burn_in);
    const TrendEstimate trend = fit_trend(sim, field.trend.window);
    const auto mhat = sample_spatial_correlation(sim, trend);
    const auto sfit = fit_spatial(field.spatial.family, mhat, layout.distances(), opt.spatial);
    if (!sfit.converged) return std::nullopt;
    const auto tfit = fit_seasonal_ar(trend_residuals(sim, trend), ar.lags, opt.temporal);
    if (!tfit.converged) return std::nullopt;
    std::vector<double> v;
    for (const auto& [name, value] : parameter_vector(sfit.model, tfit.model)) v.push_back(value);
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Parametric bootstrap: B datasets simulated at the fitted parameters, each
/// re-estimated. Replicate b uses stream (seed, b); failed replicates are
/// dropped and counted.
inline BootstrapReport bootstrap_standard_errors(const FittedField& field, const SensorLayout& layout,
                                                 Eigen::Index frames, int replicates, std::uint64_t seed,
                                                 const BootstrapOptions& opt = {}) {
  if (replicates < 2) throw InvalidInputError("bootstrap needs at least 2 replicates");
  const SeasonalArModel ar = as_seasonal_ar(field.temporal);
  const auto point = parameter_vector(field.spatial, ar);

  std::vector<std::optional<std::vector<double>>> results(static_cast<std::size_t>(replicates));
  auto work = [&](int first, int stride) {
    for (int b = first; b < replicates; b += stride) {
      const auto b_seed = make_stream(seed, static_cast<std::uint64_t>(b))();
      results[static_cast<std::size_t>(b)] = bootstrap_replicate(field, layout, frames, b_seed, opt);
    }
  };
  const int workers = std::max(1, std::min(opt.workers, replicates));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }

  BootstrapReport rep;
  rep.replicates = replicates;
  rep.base_seed = seed;
  rep.draws.assign(point.size(), {});
  for (const auto& r : results) {
    if (!r) {
      ++rep.failures;
      continue;
    }
    for (std::size_t p = 0; p < point.size(); ++p) rep.draws[p].push_back((*r)[p]);
  }
  rep.unreliable = rep.failures * 5 > replicates;
  for (std::size_t p = 0; p < point.size(); ++p) {
    BootstrapParameter bp;
    bp.name = point[p].first;
    bp.estimate = point[p].second;
    if (!rep.draws[p].empty()) {
      bp.std_err = stats::stddev(rep.draws[p]);
      bp.q025 = stats::quantile(rep.draws[p], 0.025);
      bp.q975 = stats::quantile(rep.draws[p], 0.975);
    } else {
      bp.std_err = bp.q025 = bp.q975 = std::numeric_limits<double>::quiet_NaN();
    }
    rep.parameters.push_back(bp);
  }
  return rep;
}

}  // namespace sepkrig
