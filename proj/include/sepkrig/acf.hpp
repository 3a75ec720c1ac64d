#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "sepkrig/bessel.hpp"
#include "sepkrig/grid.hpp"
#include "sepkrig/linalg.hpp"

namespace sepkrig {

enum class SpatialFamily { exponential, gaussian, powerexp, matern };

inline constexpr double kMaxMaternSmoothness = 30.0;

inline std::string_view to_string(SpatialFamily f) {
  switch (f) {
    case SpatialFamily::exponential: return "exponential";
    case SpatialFamily::gaussian: return "gaussian";
    case SpatialFamily::powerexp: return "powerexp";
    case SpatialFamily::matern: return "matern";
  }
  return "?";
}

inline SpatialFamily parse_spatial_family(std::string_view s) {
  if (s == "exp" || s == "exponential") return SpatialFamily::exponential;
  if (s == "gauss" || s == "gaussian") return SpatialFamily::gaussian;
  if (s == "powerexp" || s == "power_exponential") return SpatialFamily::powerexp;
  if (s == "matern") return SpatialFamily::matern;
  throw ParameterError("unknown spatial family '" + std::string(s) + "'");
}

inline bool has_smoothness(SpatialFamily f) {
  return f == SpatialFamily::powerexp || f == SpatialFamily::matern;
}

/// Correlation without nugget at scaled distance u = d / range.
inline double family_correlation(SpatialFamily family, double u, double smoothness) {
  if (u <= 0.0) return 1.0;
  switch (family) {
    case SpatialFamily::exponential: return std::exp(-u);
    case SpatialFamily::gaussian: return std::exp(-u * u);
    case SpatialFamily::powerexp: return std::exp(-std::pow(u, smoothness));
    case SpatialFamily::matern: {
      const double a = smoothness;
      const double log_c = (1.0 - a) * std::numbers::ln2 - std::lgamma(a) + a * std::log(u) +
                           special::log_bessel_k(a, u);
      return std::min(1.0, std::exp(log_c));
    }
  }
  return 0.0;
}

/// Isotropic spatial ACF. cor(0) = 1 and cor(d > 0) = nugget_weight * family(d / range).
struct SpatialAcfModel {
  SpatialFamily family = SpatialFamily::exponential;
  double range = 1.0;
  std::optional<double> smoothness;  // matern alpha or powerexp beta
  double nugget_weight = 1.0;        // beta_S; the nugget parameter is 1 - beta_S

  double nugget() const { return 1.0 - nugget_weight; }

  void validate() const {
    if (!(range > 0.0) || !std::isfinite(range)) throw ParameterError("range must be > 0");
    if (!(nugget_weight > 0.0 && nugget_weight <= 1.0))
      throw ParameterError("nugget weight must lie in (0, 1]");
    if (has_smoothness(family)) {
      if (!smoothness || !(*smoothness > 0.0) || !std::isfinite(*smoothness))
        throw ParameterError(std::string(to_string(family)) + " smoothness must be > 0");
    }
  }

  double operator()(double d) const {
    if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidInputError("distance must be finite and >= 0");
    if (d == 0.0) return 1.0;
    return nugget_weight * family_correlation(family, d / range, smoothness.value_or(1.0));
  }
};

inline double spatial_acf_eval(const SpatialAcfModel& model, double d) {
  model.validate();
  return model(d);
}

/// Entry-wise ACF over a (possibly rectangular) distance matrix, unchecked.
inline Matrix spatial_correlation(const SpatialAcfModel& model, const Matrix& dist) {
  model.validate();
  Matrix r(dist.rows(), dist.cols());
  for (Eigen::Index j = 0; j < dist.cols(); ++j)
    for (Eigen::Index i = 0; i < dist.rows(); ++i) r(i, j) = model(dist(i, j));
  return r;
}

/// Square correlation matrix, verified positive definite under the jitter policy.
inline Matrix build_correlation_matrix(const SpatialAcfModel& model, const Matrix& dist) {
  Matrix r = spatial_correlation(model, dist);
  robust_cholesky(r, "spatial correlation matrix");
  return r;
}

enum class TemporalKind { ar1, ma1 };

/// Explicit temporal ACF (AR(1) or MA(1)) with temporal nugget weight beta_T.
struct TemporalAcfModel {
  TemporalKind kind = TemporalKind::ar1;
  double coefficient = 0.0;
  double nugget_weight = 1.0;

  void validate() const {
    if (kind == TemporalKind::ar1 && !(std::abs(coefficient) < 1.0))
      throw ParameterError("ar1 coefficient must lie in (-1, 1)");
    if (kind == TemporalKind::ma1 && !(std::abs(coefficient) < 0.5))
      throw ParameterError("ma1 coefficient must lie in (-1/2, 1/2)");
    if (!(nugget_weight > 0.0 && nugget_weight <= 1.0))
      throw ParameterError("temporal nugget weight must lie in (0, 1]");
  }

  double operator()(long long lag) const {
    const long long d = lag < 0 ? -lag : lag;
    if (d == 0) return 1.0;
    if (kind == TemporalKind::ar1) return nugget_weight * std::pow(coefficient, static_cast<double>(d));
    return d == 1 ? nugget_weight * coefficient : 0.0;
  }

  /// Largest lag with |ACF| above `tol` (at least 1).
  long long effective_memory(double tol = 1e-8) const {
    if (kind == TemporalKind::ma1 || coefficient == 0.0) return 1;
    const double c = std::abs(coefficient);
    const double n = std::floor(std::log(tol / nugget_weight) / std::log(c));
    return std::max(1LL, static_cast<long long>(n));
  }
};

inline double temporal_acf_eval(const TemporalAcfModel& model, long long lag) {
  model.validate();
  return model(lag);
}

/// Toeplitz correlation of n consecutive frames.
inline Matrix temporal_correlation(const TemporalAcfModel& model, Eigen::Index n) {
  model.validate();
  Matrix r(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) r(i, j) = model(static_cast<long long>(i - j));
  return r;
}

/// Lazy spatio-temporal correlation R_S ⊗ R_T.
inline KroneckerView kronecker_correlation(Matrix spatial, Matrix temporal) {
  return KroneckerView(std::move(spatial), std::move(temporal));
}

}  // namespace sepkrig
