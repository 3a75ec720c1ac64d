#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sepkrig/grid.hpp"

namespace sepkrig {

inline constexpr double kArCoefficientClamp = 0.9999;

/// Multiplicative seasonal AR: prod_k (1 - phi_k B^{lag_k}) x_t = eps_t.
struct SeasonalArModel {
  std::vector<long long> lags;   // strictly increasing, in frames
  std::vector<double> coeffs;    // one per lag, each in (-1, 1)
  double innovation_sd = 0.0;

  std::size_t order() const { return lags.size(); }

  /// Largest composite lag, i.e. the number of conditioning frames.
  long long max_lag() const {
    long long s = 0;
    for (auto l : lags) s += l;
    return s;
  }

  void validate() const {
    if (lags.empty()) throw ParameterError("seasonal AR needs at least one lag");
    if (lags.size() != coeffs.size()) throw ParameterError("lags and coefficients differ in length");
    for (std::size_t k = 0; k < lags.size(); ++k) {
      if (lags[k] < 1) throw ParameterError("lags must be positive");
      if (k > 0 && lags[k] <= lags[k - 1]) throw ParameterError("lags must be strictly increasing");
      if (!(std::abs(coeffs[k]) < 1.0)) throw ParameterError("coefficient " + std::to_string(k + 1) + " outside (-1, 1)");
    }
    if (!(innovation_sd >= 0.0) || !std::isfinite(innovation_sd))
      throw ParameterError("innovation sd must be finite and >= 0");
  }
};

/// Fully distributed lag polynomial; lag 0 carries +1.
struct ExpandedPolynomial {
  std::map<long long, double> terms;

  long long max_lag() const { return terms.empty() ? 0 : terms.rbegin()->first; }

  /// e_t = sum_lag c_lag x_{t-lag} for t >= max_lag.
  std::vector<double> apply(std::span<const double> x) const {
    const auto L = static_cast<std::size_t>(max_lag());
    if (x.size() <= L) return {};
    std::vector<double> out(x.size() - L);
    for (std::size_t t = L; t < x.size(); ++t) {
      double acc = 0.0;
      for (const auto& [lag, c] : terms) acc += c * x[t - static_cast<std::size_t>(lag)];
      out[t - L] = acc;
    }
    return out;
  }
};

inline ExpandedPolynomial expand_polynomial(const SeasonalArModel& model) {
  model.validate();
  ExpandedPolynomial p;
  p.terms[0] = 1.0;
  for (std::size_t k = 0; k < model.order(); ++k) {
    std::map<long long, double> next = p.terms;
    for (const auto& [lag, c] : p.terms) next[lag + model.lags[k]] += -model.coeffs[k] * c;
    p.terms = std::move(next);
  }
  return p;
}

/// y_t = x_t - phi x_{t-lag}; output is shorter by `lag`.
inline std::vector<double> apply_factor(std::span<const double> x, long long lag, double phi) {
  const auto L = static_cast<std::size_t>(lag);
  if (x.size() <= L) return {};
  std::vector<double> out(x.size() - L);
  for (std::size_t t = L; t < x.size(); ++t) out[t - L] = x[t] - phi * x[t - L];
  return out;
}

/// Applies every factor except the one at 0-based index `exclude` (pass
/// std::nullopt to apply all of them).
inline std::vector<double> transform_series(std::span<const double> x, const SeasonalArModel& model,
                                            std::optional<std::size_t> exclude) {
  if (exclude && *exclude >= model.order()) throw InvalidInputError("excluded factor index out of range");
  if (static_cast<long long>(x.size()) <= model.max_lag())
    throw InsufficientDataError("series of length " + std::to_string(x.size()) + " needs more than " +
                                std::to_string(model.max_lag()) + " frames");
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t k = 0; k < model.order(); ++k) {
    if (exclude && k == *exclude) continue;
    cur = apply_factor(cur, model.lags[k], model.coeffs[k]);
  }
  return cur;
}

struct SeasonalArFit {
  SeasonalArModel model;
  bool converged = false;
  int sweeps = 0;
};

struct SeasonalArFitOptions {
  double tolerance = 1e-8;
  int max_sweeps = 200;
};

namespace detail {

inline std::span<const double> column(const Matrix& m, Eigen::Index s) {
  return {m.col(s).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace detail

/// Conditional-sum-of-squares fit by coordinate descent. For each factor h,
/// every sensor's series is filtered by the other factors and phi_h becomes
/// the pooled lag-Delta_h autocorrelation of the result. Residual columns are
/// centered series (trend already removed).
inline SeasonalArFit fit_seasonal_ar(const Matrix& residuals, std::vector<long long> lags,
                                     const SeasonalArFitOptions& opt = {}) {
  if (residuals.cols() < 1) throw InvalidInputError("no sensors to fit");
  SeasonalArFit fit;
  fit.model.lags = std::move(lags);
  fit.model.coeffs.assign(fit.model.lags.size(), 0.0);
  fit.model.validate();
  const long long n = residuals.rows();
  if (n <= 2 * fit.model.lags.back())
    throw InsufficientDataError("seasonal AR fit needs more than " + std::to_string(2 * fit.model.lags.back()) +
                                " frames, got " + std::to_string(n));
  if (n <= fit.model.max_lag())
    throw InsufficientDataError("seasonal AR fit needs more than " + std::to_string(fit.model.max_lag()) +
                                " frames (sum of lags), got " + std::to_string(n));

  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t h = 0; h < fit.model.order(); ++h) {
      const auto lag = static_cast<std::size_t>(fit.model.lags[h]);
      double num = 0.0;
      double den = 0.0;
      for (Eigen::Index s = 0; s < residuals.cols(); ++s) {
        const auto v = transform_series(detail::column(residuals, s), fit.model, h);
        for (std::size_t t = 0; t < v.size(); ++t) {
          den += v[t] * v[t];
          if (t >= lag) num += v[t] * v[t - lag];
        }
      }
      const double phi = den > 0.0 ? std::clamp(num / den, -kArCoefficientClamp, kArCoefficientClamp) : 0.0;
      max_change = std::max(max_change, std::abs(phi - fit.model.coeffs[h]));
      fit.model.coeffs[h] = phi;
    }
    fit.sweeps = sweep;
    if (max_change <= opt.tolerance) {
      fit.converged = true;
      break;
    }
  }

  const auto poly = expand_polynomial(fit.model);
  double ss = 0.0;
  std::size_t count = 0;
  for (Eigen::Index s = 0; s < residuals.cols(); ++s) {
    const auto e = poly.apply(detail::column(residuals, s));
    for (double v : e) ss += v * v;
    count += e.size();
  }
  fit.model.innovation_sd = count > 0 ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
  return fit;
}

/// Recursive plug-in forecasts of a centered series, steps 1..horizon.
inline std::vector<double> forecast(const ExpandedPolynomial& poly, std::span<const double> history,
                                    Eigen::Index horizon) {
  const auto L = static_cast<std::size_t>(poly.max_lag());
  if (history.size() < L)
    throw InsufficientDataError("forecast needs " + std::to_string(L) + " frames of history, short by " +
                                std::to_string(L - history.size()));
  if (horizon <= 0) return {};
  const auto H = static_cast<std::size_t>(horizon);
  std::vector<double> buf(L + H);
  std::copy(history.end() - static_cast<std::ptrdiff_t>(L), history.end(), buf.begin());
  for (std::size_t t = L; t < L + H; ++t) {
    double acc = 0.0;
    for (const auto& [lag, c] : poly.terms) {
      if (lag == 0) continue;
      acc -= c * buf[t - static_cast<std::size_t>(lag)];
    }
    buf[t] = acc;
  }
  return {buf.begin() + static_cast<std::ptrdiff_t>(L), buf.end()};
}

inline std::vector<double> forecast(const SeasonalArModel& model, std::span<const double> history,
                                    Eigen::Index horizon) {
  return forecast(expand_polynomial(model), history, horizon);
}

/// Column-wise forecasts: returns horizon x S.
inline Matrix forecast_columns(const SeasonalArModel& model, const Matrix& history, Eigen::Index horizon) {
  const auto poly = expand_polynomial(model);
  Matrix out(std::max<Eigen::Index>(horizon, 0), history.cols());
  for (Eigen::Index s = 0; s < history.cols(); ++s) {
    const auto f = forecast(poly, detail::column(history, s), horizon);
    for (Eigen::Index h = 0; h < horizon; ++h) out(h, s) = f[static_cast<std::size_t>(h)];
  }
  return out;
}

inline Eigen::Index default_burn_in(const SeasonalArModel& model, Eigen::Index length) {
  return std::max<Eigen::Index>(10 * static_cast<Eigen::Index>(model.lags.back()), 4 * length);
}

/// Simulates the AR recursion from a zero start with Gaussian innovations of
/// sd innovation_sd, discarding the first burn_in values.
template <class Rng>
std::vector<double> simulate(const SeasonalArModel& model, Eigen::Index length, std::optional<Eigen::Index> burn_in,
                             Rng& rng) {
  model.validate();
  if (length < 1) throw InvalidInputError("simulation length must be >= 1");
  const Eigen::Index burn = burn_in.value_or(default_burn_in(model, length));
  if (model.innovation_sd == 0.0) return std::vector<double>(static_cast<std::size_t>(length), 0.0);
  const auto poly = expand_polynomial(model);
  std::vector<std::pair<std::size_t, double>> ar;  // x_t = sum a x_{t-lag} + e_t
  for (const auto& [lag, c] : poly.terms)
    if (lag > 0) ar.emplace_back(static_cast<std::size_t>(lag), -c);
  const auto total = static_cast<std::size_t>(length + burn);
  std::vector<double> x(total, 0.0);
  std::normal_distribution<double> noise(0.0, model.innovation_sd);
  for (std::size_t t = 0; t < total; ++t) {
    double acc = noise(rng);
    for (const auto& [lag, a] : ar)
      if (t >= lag) acc += a * x[t - lag];
    x[t] = acc;
  }
  return {x.begin() + static_cast<std::ptrdiff_t>(burn), x.end()};
}

/// Innovation variance over stationary marginal variance, by periodic
/// trapezoid integration of the inverse squared transfer function. The node
/// count doubles until successive estimates agree to relative 1e-8.
inline double innovation_variance_ratio(const SeasonalArModel& model, double rel_tol = 1e-8) {
  model.validate();
  constexpr std::uint64_t kMaxNodes = std::uint64_t{1} << 24;
  const auto spectrum = [&](std::uint64_t j, std::uint64_t n) {
    double denom = 1.0;
    for (std::size_t k = 0; k < model.order(); ++k) {
      const double phi = model.coeffs[k];
      const std::uint64_t r = (static_cast<std::uint64_t>(model.lags[k]) % n) * (j % n) % n;
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
      denom *= 1.0 - 2.0 * phi * std::cos(theta) + phi * phi;
    }
    return 1.0 / denom;
  };
  std::uint64_t n = 64;
  while (n < 8 * static_cast<std::uint64_t>(model.max_lag()) && n < kMaxNodes) n *= 2;
  long double sum = 0.0L;
  for (std::uint64_t j = 0; j < n; ++j) sum += spectrum(j, n);
  double mean = static_cast<double>(sum / static_cast<long double>(n));
  while (n < kMaxNodes) {
    const std::uint64_t n2 = 2 * n;
    for (std::uint64_t j = 1; j < n2; j += 2) sum += spectrum(j, n2);
    const double next = static_cast<double>(sum / static_cast<long double>(n2));
    n = n2;
    if (std::abs(next - mean) <= rel_tol * std::abs(next)) return 1.0 / next;
    mean = next;
  }
  throw NumericalError("innovation variance integral did not converge at 2^24 nodes");
}

}  // namespace sepkrig
