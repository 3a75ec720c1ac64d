#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sepkrig/acf.hpp"
#include "sepkrig/grid.hpp"
#include "sepkrig/kriging.hpp"
#include "sepkrig/seasonal_ar.hpp"
#include "sepkrig/trend.hpp"

namespace sepkrig::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view text, const std::string& where) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw InvalidInputError("cannot parse number '" + std::string(text) + "' in " + where);
  return v;
}

inline long long parse_int(std::string_view text, const std::string& where) {
  text = trim(text);
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw InvalidInputError("cannot parse integer '" + std::string(text) + "' in " + where);
  return v;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<long long> parse_int_list(std::string_view text, const std::string& where) {
  std::vector<long long> out;
  for (const auto& f : split(text)) out.push_back(parse_int(f, where));
  return out;
}

inline std::vector<double> parse_double_list(std::string_view text, const std::string& where) {
  std::vector<double> out;
  for (const auto& f : split(text)) out.push_back(parse_double(f, where));
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary sibling file and a rename, so readers never see a
/// partial file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InvalidInputError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InvalidInputError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

/// Non-empty, non-comment lines with 1-based line numbers.
inline std::vector<std::pair<int, std::string>> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<int, std::string>> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(n, std::string(t));
  }
  return out;
}

/// A CSV file with a header row; columns are looked up by name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  std::string path;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InvalidInputError("'" + path + "' has no column '" + name + "'");
  }

  std::string where(int line) const { return path + ":" + std::to_string(line); }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw InvalidInputError("'" + path.string() + "' is empty");
  CsvTable t;
  t.path = path.string();
  t.header = split(lines.front().second);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split(lines[i].second);
    if (fields.size() != t.header.size())
      throw InvalidInputError(t.where(lines[i].first) + ": expected " + std::to_string(t.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
    t.rows.emplace_back(lines[i].first, std::move(fields));
  }
  return t;
}

// --- readings / layout -----------------------------------------------------

inline std::vector<Reading> read_readings_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto ci = t.column("sensor_id"), ct = t.column("timestamp"), cv = t.column("value");
  std::vector<Reading> out;
  out.reserve(t.rows.size());
  for (const auto& [line, f] : t.rows)
    out.push_back({f[ci], parse_double(f[ct], t.where(line)), parse_double(f[cv], t.where(line))});
  return out;
}

inline Matrix read_distance_override(const std::filesystem::path& path, const std::vector<std::string>& ids,
                                     const Matrix& euclidean) {
  const auto t = read_csv(path);
  const auto ca = t.column("sensor_a"), cb = t.column("sensor_b"), cd = t.column("distance");
  std::map<std::string, Eigen::Index> idx;
  for (std::size_t i = 0; i < ids.size(); ++i) idx[ids[i]] = static_cast<Eigen::Index>(i);
  Matrix d = euclidean;
  for (const auto& [line, f] : t.rows) {
    const auto a = idx.find(f[ca]);
    const auto b = idx.find(f[cb]);
    if (a == idx.end() || b == idx.end())
      throw InvalidInputError(t.where(line) + ": unknown sensor in distance override");
    const double v = parse_double(f[cd], t.where(line));
    d(a->second, b->second) = v;
    d(b->second, a->second) = v;
  }
  return d;
}

inline SensorLayout read_layout_csv(const std::filesystem::path& path,
                                    const std::filesystem::path& distance_override = {}) {
  const auto t = read_csv(path);
  const auto ci = t.column("sensor_id"), cx = t.column("x"), cy = t.column("y");
  std::vector<std::string> ids;
  std::vector<Point> pts;
  for (const auto& [line, f] : t.rows) {
    ids.push_back(f[ci]);
    pts.push_back({parse_double(f[cx], t.where(line)), parse_double(f[cy], t.where(line))});
  }
  if (distance_override.empty()) return SensorLayout(std::move(ids), std::move(pts));
  Matrix d = read_distance_override(distance_override, ids, build_spatial_distances(pts));
  return SensorLayout(std::move(ids), std::move(pts), std::move(d));
}

inline std::vector<Point> read_targets_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  const auto cx = t.column("x"), cy = t.column("y");
  std::vector<Point> out;
  for (const auto& [line, f] : t.rows) out.push_back({parse_double(f[cx], t.where(line)), parse_double(f[cy], t.where(line))});
  if (out.empty()) throw InvalidInputError("'" + path.string() + "' has no targets");
  return out;
}

// --- grid ------------------------------------------------------------------

inline std::string grid_to_csv(const ObservationGrid& g) {
  std::string out = "timestamp";
  for (const auto& id : g.sensor_ids) out += "," + id;
  out += "\n";
  for (Eigen::Index t = 0; t < g.frames(); ++t) {
    out += format_double(g.time_of(t));
    for (Eigen::Index s = 0; s < g.sensors(); ++s) {
      out += ",";
      if (!g.missing(t, s)) out += format_double(g.values(t, s));
    }
    out += "\n";
  }
  return out;
}

/// Reads a grid export. The step is the difference of the first two
/// timestamps and every row must sit on that schedule.
inline ObservationGrid read_grid_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  if (t.header.size() < 2 || t.header.front() != "timestamp")
    throw InvalidInputError("'" + t.path + "' must start with a timestamp column followed by sensor ids");
  if (t.rows.empty()) throw InvalidInputError("'" + t.path + "' has no rows");
  ObservationGrid g;
  g.sensor_ids.assign(t.header.begin() + 1, t.header.end());
  const auto T = static_cast<Eigen::Index>(t.rows.size());
  const auto S = static_cast<Eigen::Index>(g.sensor_ids.size());
  g.values = Matrix::Zero(T, S);
  g.missing = MissingMask::Constant(T, S, false);
  g.start_time = parse_double(t.rows[0].second[0], t.where(t.rows[0].first));
  g.step = T > 1 ? parse_double(t.rows[1].second[0], t.where(t.rows[1].first)) - g.start_time : 1.0;
  for (Eigen::Index r = 0; r < T; ++r) {
    const auto& [line, f] = t.rows[static_cast<std::size_t>(r)];
    const double ts = parse_double(f[0], t.where(line));
    if (std::abs(ts - g.time_of(r)) > 1e-6 * std::max(1.0, std::abs(ts)))
      throw InvalidInputError(t.where(line) + ": timestamp off the equispaced grid");
    for (Eigen::Index s = 0; s < S; ++s) {
      const auto& cell = f[static_cast<std::size_t>(s) + 1];
      if (cell.empty())
        g.missing(r, s) = true;
      else
        g.values(r, s) = parse_double(cell, t.where(line));
    }
  }
  g.validate();
  return g;
}

inline std::string trend_to_csv(const ObservationGrid& g, const TrendEstimate& trend) {
  std::string out = "timestamp,m_t\n";
  for (Eigen::Index t = trend.valid_from; t < trend.frames(); ++t)
    out += format_double(g.time_of(t)) + "," + format_double(trend.m(t)) + "\n";
  return out;
}

// --- key-value model files -------------------------------------------------

using KeyValues = std::map<std::string, std::string>;

inline KeyValues read_key_values(const std::filesystem::path& path) {
  KeyValues kv;
  for (const auto& [line, text] : read_lines(path)) {
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError(path.string() + ":" + std::to_string(line) + ": expected key=value");
    kv[std::string(trim(std::string_view(text).substr(0, eq)))] = std::string(trim(std::string_view(text).substr(eq + 1)));
  }
  return kv;
}

inline const std::string& require(const KeyValues& kv, const std::string& key, const std::string& file) {
  auto it = kv.find(key);
  if (it == kv.end()) throw InvalidInputError("'" + file + "' is missing key '" + key + "'");
  return it->second;
}

inline std::string spatial_model_to_text(const SpatialAcfModel& m) {
  std::string out = "family=" + std::string(to_string(m.family)) + "\n";
  out += "range=" + format_double(m.range) + "\n";
  if (m.smoothness) out += "smoothness=" + format_double(*m.smoothness) + "\n";
  out += "nugget=" + format_double(m.nugget()) + "\n";
  return out;
}

inline SpatialAcfModel spatial_model_from_kv(const KeyValues& kv, const std::string& file) {
  SpatialAcfModel m;
  m.family = parse_spatial_family(require(kv, "family", file));
  m.range = parse_double(require(kv, "range", file), file);
  if (has_smoothness(m.family)) m.smoothness = parse_double(require(kv, "smoothness", file), file);
  m.nugget_weight = 1.0 - parse_double(require(kv, "nugget", file), file);
  m.validate();
  return m;
}

inline SpatialAcfModel read_spatial_model(const std::filesystem::path& path) {
  return spatial_model_from_kv(read_key_values(path), path.string());
}

inline std::string join(const auto& xs, auto&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
  return out;
}

inline std::string temporal_model_to_text(const TemporalModel& model) {
  if (const auto* ar = std::get_if<SeasonalArModel>(&model)) {
    return "kind=seasonal_ar\nlags=" + join(ar->lags, [](long long v) { return std::to_string(v); }) +
           "\ncoeffs=" + join(ar->coeffs, [](double v) { return format_double(v); }) +
           "\ninnovation_sd=" + format_double(ar->innovation_sd) + "\n";
  }
  const auto& acf = std::get<TemporalAcfModel>(model);
  return std::string("kind=") + (acf.kind == TemporalKind::ar1 ? "ar1" : "ma1") +
         "\ncoefficient=" + format_double(acf.coefficient) + "\nnugget=" + format_double(1.0 - acf.nugget_weight) + "\n";
}

inline TemporalModel read_temporal_model(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  const std::string file = path.string();
  const std::string kind = kv.contains("kind") ? kv.at("kind") : "seasonal_ar";
  if (kind == "seasonal_ar") {
    SeasonalArModel m;
    m.lags = parse_int_list(require(kv, "lags", file), file);
    m.coeffs = parse_double_list(require(kv, "coeffs", file), file);
    m.innovation_sd = kv.contains("innovation_sd") ? parse_double(kv.at("innovation_sd"), file) : 0.0;
    m.validate();
    return m;
  }
  TemporalAcfModel m;
  if (kind == "ar1") m.kind = TemporalKind::ar1;
  else if (kind == "ma1") m.kind = TemporalKind::ma1;
  else throw InvalidInputError("'" + file + "' has unknown temporal kind '" + kind + "'");
  m.coefficient = parse_double(require(kv, "coefficient", file), file);
  m.nugget_weight = kv.contains("nugget") ? 1.0 - parse_double(kv.at("nugget"), file) : 1.0;
  m.validate();
  return m;
}

// --- images ----------------------------------------------------------------

/// Binary 8-bit portable graymap of `values` (rows x cols), linearly scaled
/// from its minimum (black) to maximum (white).
inline std::string to_pgm(const Matrix& values) {
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  std::string out = "P5\n" + std::to_string(values.cols()) + " " + std::to_string(values.rows()) + "\n255\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double u = hi > lo ? (values(r, c) - lo) / (hi - lo) : 0.5;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * u))));
    }
  return out;
}

}  // namespace sepkrig::io
