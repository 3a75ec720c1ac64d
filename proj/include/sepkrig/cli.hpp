#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sepkrig/bootstrap.hpp"
#include "sepkrig/io.hpp"
#include "sepkrig/kriging.hpp"
#include "sepkrig/runtime.hpp"
#include "sepkrig/selection.hpp"
#include "sepkrig/spatial_fit.hpp"

namespace sepkrig::cli {

inline constexpr const char* kVersion = "sepkrig 0.1.0";

/// Everything a command may read; filled from flags, then from the config file.
struct RunConfig {
  std::string config;
  std::string readings, layout, distances, grid, targets, spatial, temporal, out, out_pgm, trend_out, scores_out;
  std::optional<double> step_seconds;
  std::optional<double> start;
  std::optional<Eigen::Index> window;
  std::optional<double> window_seconds;
  std::vector<long long> lags;
  std::vector<double> lag_seconds;
  std::string family = "exponential";
  std::string metric = "mae";
  std::string predictor = "kriging";
  std::string mode = "shared";
  std::string order = "auto";
  std::string resolution = "32x32";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  int starts = 5;
  int replicates = 200;
  Eigen::Index horizon = 1;
  Eigen::Index max_k = 0;
  Eigen::Index frames = 0;
  Eigen::Index every = 1;
  Eigen::Index train_frames = 0;
  std::optional<Eigen::Index> burn_in;
  double mean = 0.0;
  double sigma = 1.0;
  bool parallel = false;
};

namespace detail {

inline std::uint64_t require_seed(const RunConfig& c) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("SEPKRIG_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("SEPKRIG_SEED='" + std::string(env) + "' is not an unsigned integer");
    }
  }
  throw UsageError("this command needs --seed (or SEPKRIG_SEED)");
}

inline void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

inline ObservationGrid load_imputed_grid(const std::string& path) {
  require_path(path, "--grid");
  ObservationGrid g = io::read_grid_csv(path);
  if (!g.fully_observed())
    throw InvalidInputError("grid '" + path + "' has missing cells; run impute first");
  return g;
}

inline SensorLayout load_layout(const RunConfig& c) {
  require_path(c.layout, "--layout");
  return io::read_layout_csv(c.layout, c.distances);
}

/// Reorders the layout to the grid's column order.
inline SensorLayout align_layout(const SensorLayout& layout, const ObservationGrid& grid, const std::string& grid_path) {
  std::vector<Eigen::Index> idx;
  for (const auto& id : grid.sensor_ids) {
    const auto i = layout.index_of(id);
    if (!i) throw InvalidInputError("sensor " + id + " in grid '" + grid_path + "' is not in the layout");
    idx.push_back(*i);
  }
  return layout.subset(idx);
}

inline double frame_seconds(const RunConfig& c, const ObservationGrid* grid) {
  if (c.step_seconds) return *c.step_seconds;
  if (grid) return grid->step;
  throw UsageError("--step-seconds is required to convert seconds to frames");
}

inline Eigen::Index trend_window(const RunConfig& c, const ObservationGrid& grid) {
  if (c.window) return *c.window;
  const double step = frame_seconds(c, &grid);
  if (c.window_seconds) return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(*c.window_seconds / step)));
  return default_trend_window(step);
}

inline std::vector<long long> lags_in_frames(const RunConfig& c, const ObservationGrid& grid) {
  if (!c.lags.empty()) return c.lags;
  if (c.lag_seconds.empty()) throw UsageError("missing required option --lags (or --lag-seconds)");
  const double step = frame_seconds(c, &grid);
  std::vector<long long> out;
  for (double s : c.lag_seconds) out.push_back(std::llround(s / step));
  return out;
}

inline PredictionOrder parse_order(const std::string& s) {
  if (s == "auto") return PredictionOrder::automatic;
  if (s == "forecast-first") return PredictionOrder::forecast_first;
  if (s == "interpolate-first") return PredictionOrder::interpolate_first;
  throw UsageError("unknown --order '" + s + "'");
}

inline std::pair<Eigen::Index, Eigen::Index> parse_resolution(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw UsageError("--resolution must look like RxC, got '" + s + "'");
  const auto r = io::parse_int(std::string_view(s).substr(0, x), "--resolution");
  const auto c = io::parse_int(std::string_view(s).substr(x + 1), "--resolution");
  if (r < 1 || c < 1) throw UsageError("--resolution must be positive, got '" + s + "'");
  return {static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

inline FittedField load_field(const RunConfig& c, const ObservationGrid& grid) {
  require_path(c.spatial, "--spatial");
  require_path(c.temporal, "--temporal");
  FittedField f;
  f.trend = fit_trend(grid, trend_window(c, grid));
  f.spatial = io::read_spatial_model(c.spatial);
  f.temporal = io::read_temporal_model(c.temporal);
  return f;
}

inline std::string kv_line(const std::string& k, const std::string& v) { return k + "=" + v + "\n"; }

inline std::string prediction_rows(const PredictionResult& res) {
  std::string out;
  for (Eigen::Index h = 0; h < res.mean.rows(); ++h) {
    const Eigen::Index frame = res.base_frame + (res.horizon == 0 ? 0 : h + 1);
    for (Eigen::Index i = 0; i < res.mean.cols(); ++i) {
      out += std::to_string(frame) + "," + std::to_string(i) + "," + io::format_double(res.mean(h, i)) + ",";
      if (res.variance.size()) out += io::format_double(res.variance(h, i));
      out += "\n";
    }
  }
  return out;
}

// --- commands --------------------------------------------------------------

inline void cmd_ingest(const RunConfig& c, std::ostream& out) {
  require_path(c.readings, "--readings");
  require_path(c.out, "--out");
  if (!c.step_seconds) throw UsageError("missing required option --step-seconds");
  const auto layout = load_layout(c);
  const auto readings = io::read_readings_csv(c.readings);
  const auto grid = project_to_grid(readings, layout.ids(), *c.step_seconds, c.start);
  io::atomic_write(c.out, io::grid_to_csv(grid));
  out << "frames=" << grid.frames() << "\nsensors=" << grid.sensors() << "\nmissing=" << grid.missing.count() << "\n";
}

inline void cmd_impute(const RunConfig& c, std::ostream& out) {
  require_path(c.grid, "--grid");
  require_path(c.out, "--out");
  const auto raw = io::read_grid_csv(c.grid);
  const auto filled = locf_impute(raw);
  io::atomic_write(c.out, io::grid_to_csv(filled));
  if (!c.trend_out.empty()) io::atomic_write(c.trend_out, io::trend_to_csv(filled, fit_trend(filled, trend_window(c, filled))));
  out << "filled=" << raw.missing.count() << "\n";
}

inline void cmd_fit_spatial(const RunConfig& c, std::ostream& out) {
  require_path(c.out, "--out");
  const auto grid = load_imputed_grid(c.grid);
  const auto layout = align_layout(load_layout(c), grid, c.grid);
  const auto trend = fit_trend(grid, trend_window(c, grid));
  const auto mhat = sample_spatial_correlation(grid, trend);
  SpatialFitOptions opt;
  opt.starts = c.starts;
  const auto fit = fit_spatial(parse_spatial_family(c.family), mhat, layout.distances(), opt);
  io::atomic_write(c.out, io::spatial_model_to_text(fit.model));
  out << io::spatial_model_to_text(fit.model) << kv_line("loglik", io::format_double(fit.loglik))
      << kv_line("gradient_norm", io::format_double(fit.gradient_norm))
      << kv_line("simplex_diameter", io::format_double(fit.simplex_diameter))
      << kv_line("iterations", std::to_string(fit.iterations)) << kv_line("converged", fit.converged ? "true" : "false")
      << kv_line("near_bound", fit.near_bound ? "true" : "false") << kv_line("sigma", io::format_double(trend.sigma))
      << kv_line("frames_used", std::to_string(mhat.frames_used));
}

inline void cmd_fit_temporal(const RunConfig& c, std::ostream& out) {
  require_path(c.out, "--out");
  const auto grid = load_imputed_grid(c.grid);
  const auto trend = fit_trend(grid, trend_window(c, grid));
  const auto fit = fit_seasonal_ar(trend_residuals(grid, trend), lags_in_frames(c, grid));
  const std::string text = io::temporal_model_to_text(fit.model);
  io::atomic_write(c.out, text);
  out << text << kv_line("sweeps", std::to_string(fit.sweeps)) << kv_line("converged", fit.converged ? "true" : "false");
}

inline void cmd_predict(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_path(c.out, "--out");
  require_path(c.targets, "--targets");
  const auto grid = load_imputed_grid(c.grid);
  const auto layout = align_layout(load_layout(c), grid, c.grid);
  const auto field = load_field(c, grid);
  const PredictionTarget target{io::read_targets_csv(c.targets), c.horizon};
  std::string why;
  const auto res = predict(field, layout, grid, target, &why, parse_order(c.order));
  if (!why.empty()) err << "warning: variance left empty: " << why << "\n";
  io::atomic_write(c.out, "frame,target_index,mean,variance\n" + prediction_rows(res));
  out << "rows=" << res.mean.size() << "\n";
}

inline void cmd_heatmap(const RunConfig& c, std::ostream& out) {
  require_path(c.out, "--out");
  const auto grid = load_imputed_grid(c.grid);
  const auto layout = align_layout(load_layout(c), grid, c.grid);
  const auto field = load_field(c, grid);
  const auto [rows, cols] = parse_resolution(c.resolution);
  const auto pts = raster_targets(layout, rows, cols);
  const auto res = predict_mean(field, layout, grid, {pts, c.horizon}, parse_order(c.order));
  const Eigen::Index last = res.mean.rows() - 1;
  std::string csv = "row,col,x,y,mean\n";
  Matrix image(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index k = 0; k < cols; ++k) {
      const Eigen::Index i = r * cols + k;
      image(r, k) = res.mean(last, i);
      const auto& p = pts[static_cast<std::size_t>(i)];
      csv += std::to_string(r) + "," + std::to_string(k) + "," + io::format_double(p.x) + "," + io::format_double(p.y) +
             "," + io::format_double(image(r, k)) + "\n";
    }
  io::atomic_write(c.out, csv);
  if (!c.out_pgm.empty()) io::atomic_write(c.out_pgm, io::to_pgm(image));
  out << "min=" << io::format_double(image.minCoeff()) << "\nmax=" << io::format_double(image.maxCoeff()) << "\n";
}

inline void cmd_bootstrap(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_path(c.out, "--out");
  const auto seed = require_seed(c);
  const auto grid = load_imputed_grid(c.grid);
  const auto layout = align_layout(load_layout(c), grid, c.grid);
  const auto field = load_field(c, grid);
  BootstrapOptions opt;
  opt.workers = c.workers;
  opt.burn_in = c.burn_in;
  opt.spatial.starts = c.starts;
  const Eigen::Index frames = c.frames > 0 ? c.frames : grid.frames();
  const auto rep = bootstrap_standard_errors(field, layout, frames, c.replicates, seed, opt);
  std::string csv = "parameter,estimate,std_err,q025,q975\n";
  for (const auto& p : rep.parameters)
    csv += p.name + "," + io::format_double(p.estimate) + "," + io::format_double(p.std_err) + "," +
           io::format_double(p.q025) + "," + io::format_double(p.q975) + "\n";
  io::atomic_write(c.out, csv);
  out << "replicates=" << rep.replicates << "\nfailures=" << rep.failures << "\nseed=" << rep.base_seed << "\n";
  if (rep.unreliable) err << "warning: " << rep.failures << " of " << rep.replicates << " replicates failed; standard errors are unreliable\n";
}

inline void cmd_select(const RunConfig& c, std::ostream& out) {
  require_path(c.out, "--out");
  require_path(c.spatial, "--spatial");
  const auto grid = load_imputed_grid(c.grid);
  const auto layout = align_layout(load_layout(c), grid, c.grid);
  FittedField field;
  field.trend = fit_trend(grid, trend_window(c, grid));
  field.spatial = io::read_spatial_model(c.spatial);
  SelectionPredictor predictor;
  if (c.predictor == "kriging") predictor = SelectionPredictor::kriging;
  else if (c.predictor == "mean") predictor = SelectionPredictor::mean;
  else throw UsageError("unknown --predictor '" + c.predictor + "'");
  const Eigen::Index max_k = c.max_k > 0 ? c.max_k : layout.size() - 1;
  const auto trace = forward_select(grid, layout, field, parse_metric(c.metric), max_k, predictor);
  std::string csv = "step,added,active_set,score\n";
  std::string table = "step";
  for (const auto& id : layout.ids()) table += "," + id;
  table += "\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& st = trace.steps[k];
    std::string active;
    for (std::size_t j = 0; j < st.active.size(); ++j)
      active += (j ? ";" : "") + layout.ids()[static_cast<std::size_t>(st.active[j])];
    csv += std::to_string(k + 1) + "," + st.added_id + "," + active + "," + io::format_double(st.score) + "\n";
    table += std::to_string(k + 1);
    for (double s : st.candidate_scores) table += "," + (std::isnan(s) ? std::string() : io::format_double(s));
    table += "\n";
  }
  io::atomic_write(c.out, csv);
  if (!c.scores_out.empty()) io::atomic_write(c.scores_out, table);
  out << "steps=" << trace.steps.size() << "\n";
}

inline void cmd_run(const RunConfig& c, std::ostream& out) {
  require_path(c.out, "--out");
  require_path(c.targets, "--targets");
  const auto grid = load_imputed_grid(c.grid);
  const auto layout = align_layout(load_layout(c), grid, c.grid);
  const auto field = load_field(c, grid);
  const SeasonalArModel shared = as_seasonal_ar(field.temporal);
  const Eigen::Index w = field.trend.window;
  std::vector<SeasonalArModel> models;
  Eigen::Index train = c.train_frames > 0 ? c.train_frames : grid.frames();
  if (train > grid.frames()) throw InvalidInputError("--train-frames exceeds the grid length");
  if (c.mode == "shared") {
    models.push_back(shared);
  } else if (c.mode == "per-sensor") {
    const Matrix resid = trend_residuals(grid, field.trend).topRows(train - w);
    for (Eigen::Index s = 0; s < layout.size(); ++s) {
      const auto fit = fit_seasonal_ar(resid.col(s), shared.lags);
      models.push_back(fit.model);
    }
  } else {
    throw UsageError("unknown --mode '" + c.mode + "'");
  }
  const auto min_frame = w + static_cast<Eigen::Index>(shared.max_lag()) - 1;
  const Eigen::Index first = std::max(min_frame, train - 1);
  if (first >= grid.frames()) throw InsufficientDataError("no frames left to predict after the history window");
  DistributedOptions opt;
  opt.horizon = c.horizon;
  opt.parallel = c.parallel;
  opt.schedule_seed = c.seed;
  for (Eigen::Index f = first; f < grid.frames(); f += std::max<Eigen::Index>(c.every, 1)) opt.request_frames.push_back(f);
  const auto weights = spatial_weights(field.spatial, layout, io::read_targets_csv(c.targets));
  const auto preds = run_distributed(grid, layout, models, w, weights, opt);
  std::string csv = "base_frame,frame,target_index,mean\n";
  for (const auto& p : preds)
    for (Eigen::Index h = 0; h < p.mean.rows(); ++h)
      for (Eigen::Index i = 0; i < p.mean.cols(); ++i)
        csv += std::to_string(p.base_frame) + "," + std::to_string(p.base_frame + h + 1) + "," + std::to_string(i) +
               "," + io::format_double(p.mean(h, i)) + "\n";
  io::atomic_write(c.out, csv);
  out << "predictions=" << preds.size() << "\n";
}

inline void cmd_simulate(const RunConfig& c, std::ostream& out) {
  require_path(c.out, "--out");
  require_path(c.spatial, "--spatial");
  require_path(c.temporal, "--temporal");
  const auto seed = require_seed(c);
  if (c.frames < 1) throw UsageError("--frames must be positive");
  const auto layout = load_layout(c);
  const auto spatial = io::read_spatial_model(c.spatial);
  const auto ar = as_seasonal_ar(io::read_temporal_model(c.temporal));
  auto grid = simulate_dataset(Vector::Constant(c.frames, c.mean), c.sigma, spatial, ar, c.frames, layout, seed, c.burn_in);
  grid.start_time = c.start.value_or(0.0);
  grid.step = c.step_seconds.value_or(1.0);
  io::atomic_write(c.out, io::grid_to_csv(grid));
  out << "frames=" << grid.frames() << "\nsensors=" << grid.sensors() << "\n";
}

/// Appends config-file values as `--key=value` for options of `sub` that were
/// not given on the command line.
inline void apply_config(std::vector<std::string>& args, CLI::App& app) {
  std::string sub_name, path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_name.empty() && !args[i].empty() && args[i][0] != '-') sub_name = args[i];
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || sub_name.empty()) return;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(sub_name);
  } catch (const CLI::OptionNotFound&) {
    return;
  }
  static const std::map<std::string, std::string> aliases = {{"trend.window_frames", "window"}};
  for (const auto& [raw_key, value] : io::read_key_values(path)) {
    std::string key = raw_key;
    if (auto a = aliases.find(key); a != aliases.end()) key = a->second;
    const std::string flag = "--" + key;
    if (!sub->get_option_no_throw(flag)) continue;
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (!given) args.push_back(flag + "=" + value);
  }
}

}  // namespace detail

/// Runs one command line (without the program name). Returns the process
/// exit status: 0 success, 1 usage, 2 data, 3 numerical.
inline int run_command(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Separable spatio-temporal kriging for sensor networks", "sepkrig"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::function<void()> action;

  const auto common = [&](CLI::App* s) {
    s->add_option("--config", c.config, "Key-value config file; flags override it");
    s->add_option("--step-seconds", c.step_seconds, "Seconds per frame, for converting seconds to frames");
  };
  const auto with_window = [&](CLI::App* s) {
    s->add_option("--window", c.window, "Trend window in frames (default: one day)");
    s->add_option("--window-seconds", c.window_seconds, "Trend window in seconds");
  };
  const auto with_grid_layout = [&](CLI::App* s) {
    s->add_option("--grid", c.grid, "Grid CSV")->required();
    s->add_option("--layout", c.layout, "Layout CSV")->required();
    s->add_option("--distances", c.distances, "Distance override CSV");
  };
  const auto with_models = [&](CLI::App* s) {
    s->add_option("--spatial", c.spatial, "Spatial model file");
    s->add_option("--temporal", c.temporal, "Temporal model file");
  };
  const auto seed_opt = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Random seed (fallback: SEPKRIG_SEED)"); };

  auto* ingest = app.add_subcommand("ingest", "Project raw readings onto an equispaced grid");
  common(ingest);
  ingest->add_option("--readings", c.readings, "Readings CSV")->required();
  ingest->add_option("--layout", c.layout, "Layout CSV")->required();
  ingest->add_option("--start", c.start, "Grid start time (default: first reading)");
  ingest->add_option("--out", c.out, "Output grid CSV");
  ingest->callback([&] { action = [&] { detail::cmd_ingest(c, out); }; });

  auto* impute = app.add_subcommand("impute", "Fill missing cells by last observation carried forward");
  common(impute);
  with_window(impute);
  impute->add_option("--grid", c.grid, "Grid CSV")->required();
  impute->add_option("--out", c.out, "Output grid CSV");
  impute->add_option("--trend-out", c.trend_out, "Also write the trend CSV");
  impute->callback([&] { action = [&] { detail::cmd_impute(c, out); }; });

  auto* fs = app.add_subcommand("fit-spatial", "Fit a spatial correlation model");
  common(fs);
  with_window(fs);
  with_grid_layout(fs);
  fs->add_option("--family", c.family, "exp|gauss|powerexp|matern");
  fs->add_option("--starts", c.starts, "Optimizer multi-starts");
  fs->add_option("--out", c.out, "Output model file");
  fs->callback([&] { action = [&] { detail::cmd_fit_spatial(c, out); }; });

  auto* ft = app.add_subcommand("fit-temporal", "Fit a multiplicative seasonal AR model");
  common(ft);
  with_window(ft);
  ft->add_option("--grid", c.grid, "Grid CSV")->required();
  ft->add_option("--lags", c.lags, "Seasonal lags in frames")->delimiter(',');
  ft->add_option("--lag-seconds", c.lag_seconds, "Seasonal lags in seconds")->delimiter(',');
  ft->add_option("--out", c.out, "Output model file");
  ft->callback([&] { action = [&] { detail::cmd_fit_temporal(c, out); }; });

  auto* pr = app.add_subcommand("predict", "Predict at target locations");
  common(pr);
  with_window(pr);
  with_grid_layout(pr);
  with_models(pr);
  pr->add_option("--targets", c.targets, "Targets CSV (x,y)");
  pr->add_option("--horizon", c.horizon, "Steps ahead (0 = current frame)");
  pr->add_option("--order", c.order, "auto|forecast-first|interpolate-first");
  pr->add_option("--out", c.out, "Output predictions CSV");
  pr->callback([&] { action = [&] { detail::cmd_predict(c, out, err); }; });

  auto* hm = app.add_subcommand("heatmap", "Predicted means over the layout bounding box");
  common(hm);
  with_window(hm);
  with_grid_layout(hm);
  with_models(hm);
  hm->add_option("--resolution", c.resolution, "Raster size RxC");
  hm->add_option("--horizon", c.horizon, "Steps ahead (0 = current frame)");
  hm->add_option("--order", c.order, "auto|forecast-first|interpolate-first");
  hm->add_option("--out", c.out, "Output raster CSV");
  hm->add_option("--out-pgm", c.out_pgm, "Output graymap image");
  hm->callback([&] { action = [&] { detail::cmd_heatmap(c, out); }; });

  auto* bs = app.add_subcommand("bootstrap", "Parametric bootstrap standard errors");
  common(bs);
  with_window(bs);
  with_grid_layout(bs);
  with_models(bs);
  seed_opt(bs);
  bs->add_option("--replicates", c.replicates, "Bootstrap replicates");
  bs->add_option("--frames", c.frames, "Frames per simulated dataset (default: grid length)");
  bs->add_option("--burn-in", c.burn_in, "AR burn-in frames");
  bs->add_option("--workers", c.workers, "Worker threads");
  bs->add_option("--starts", c.starts, "Optimizer multi-starts");
  bs->add_option("--out", c.out, "Output report CSV");
  bs->callback([&] { action = [&] { detail::cmd_bootstrap(c, out, err); }; });

  auto* sel = app.add_subcommand("select", "Forward sensor selection");
  common(sel);
  with_window(sel);
  with_grid_layout(sel);
  sel->add_option("--spatial", c.spatial, "Spatial model file");
  sel->add_option("--metric", c.metric, "mae|p95");
  sel->add_option("--max-k", c.max_k, "Selection steps (default: S-1)");
  sel->add_option("--predictor", c.predictor, "kriging|mean");
  sel->add_option("--out", c.out, "Output trace CSV");
  sel->add_option("--scores-out", c.scores_out, "Per-step candidate score table");
  sel->callback([&] { action = [&] { detail::cmd_select(c, out); }; });

  auto* run = app.add_subcommand("run", "Replay a grid through per-sensor nodes and a server");
  common(run);
  with_window(run);
  with_grid_layout(run);
  with_models(run);
  seed_opt(run);
  run->add_option("--mode", c.mode, "shared|per-sensor");
  run->add_option("--horizon", c.horizon, "Steps ahead");
  run->add_option("--targets", c.targets, "Targets CSV (x,y)");
  run->add_option("--train-frames", c.train_frames, "Frames used to fit per-sensor models; predictions start after");
  run->add_option("--every", c.every, "Predict every N frames");
  run->add_flag("--parallel", c.parallel, "One thread per sensor node");
  run->add_option("--out", c.out, "Output predictions CSV");
  run->callback([&] { action = [&] { detail::cmd_run(c, out); }; });

  auto* sim = app.add_subcommand("simulate", "Simulate a grid from fitted models");
  common(sim);
  seed_opt(sim);
  sim->add_option("--layout", c.layout, "Layout CSV")->required();
  sim->add_option("--distances", c.distances, "Distance override CSV");
  with_models(sim);
  sim->add_option("--frames", c.frames, "Frames to simulate")->required();
  sim->add_option("--mean", c.mean, "Constant mean");
  sim->add_option("--sigma", c.sigma, "Marginal standard deviation");
  sim->add_option("--start", c.start, "First timestamp");
  sim->add_option("--burn-in", c.burn_in, "AR burn-in frames");
  sim->add_option("--out", c.out, "Output grid CSV");
  sim->callback([&] { action = [&] { detail::cmd_simulate(c, out); }; });

  try {
    detail::apply_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (action) action();
    return 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    if (rc == 0) return 0;
    err << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sepkrig::cli
