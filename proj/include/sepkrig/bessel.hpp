#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "sepkrig/error.hpp"

namespace sepkrig::special {

namespace detail {

// Temme's gamma helpers for |mu| <= 1/2:
//   gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),  gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
struct TemmeGammas {
  double gam1, gam2, gampl, gammi;
};

inline TemmeGammas temme_gammas(double mu) {
  TemmeGammas g{};
  g.gampl = 1.0 / std::tgamma(1.0 + mu);
  g.gammi = 1.0 / std::tgamma(1.0 - mu);
  g.gam2 = 0.5 * (g.gammi + g.gampl);
  if (std::abs(mu) < 1e-4) {
    // Odd Taylor coefficients of 1/G(1+x): euler_gamma and -0.0420026350340952.
    constexpr double a1 = std::numbers::egamma;
    constexpr double a3 = -0.0420026350340952;
    g.gam1 = -(a1 + a3 * mu * mu);
  } else {
    g.gam1 = (g.gammi - g.gampl) / (2.0 * mu);
  }
  return g;
}

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2, 0 < x <= 2 (Temme series).
inline void temme_series(double mu, double x, double& kmu, double& kmu1) {
  constexpr double eps = 1e-17;
  const double x2 = 0.5 * x;
  const double pimu = std::numbers::pi * mu;
  const double fact = std::abs(pimu) < eps ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = std::abs(e) < eps ? 1.0 : std::sinh(e) / e;
  const auto g = temme_gammas(mu);
  double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / g.gampl;
  double q = 0.5 / (e * g.gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  for (int i = 1; i < 500; ++i) {
    const double fi = i;
    ff = (fi * ff + p + q) / (fi * fi - mu * mu);
    c *= d / fi;
    p /= fi - mu;
    q /= fi + mu;
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - fi * ff);
    if (std::abs(del) < std::abs(sum) * eps) break;
  }
  kmu = sum;
  kmu1 = sum1 * 2.0 / x;
}

// exp(x) K_mu(x) and exp(x) K_{mu+1}(x) for |mu| <= 1/2, x > 2 (Steed's CF2).
inline void steed_cf2_scaled(double mu, double x, double& kmu, double& kmu1) {
  constexpr double eps = 1e-17;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 10000; ++i) {
    const double fi = i;
    a -= 2.0 * fi;
    c = -a * c / (fi + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < eps) break;
  }
  h = a1 * h;
  kmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
  kmu1 = kmu * (mu + x + 0.5 - h) / x;
}

}  // namespace detail

/// Natural log of the modified Bessel function of the second kind K_nu(x),
/// for x > 0. Stays finite where K_nu itself would overflow or underflow.
inline double log_bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ParameterError("bessel_k needs finite x > 0");
  if (!std::isfinite(nu)) throw ParameterError("bessel_k needs finite order");
  nu = std::abs(nu);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  double kmu = 0.0;
  double kmu1 = 0.0;
  double log_scale = 0.0;
  if (x <= 2.0) {
    detail::temme_series(mu, x, kmu, kmu1);
  } else {
    detail::steed_cf2_scaled(mu, x, kmu, kmu1);
    log_scale = -x;
  }
  constexpr double big = 1e250;
  const double log_big = std::log(big);
  const double xi2 = 2.0 / x;
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * xi2 * kmu1 + kmu;
    kmu = kmu1;
    kmu1 = next;
    if (std::abs(kmu1) > big) {
      kmu /= big;
      kmu1 /= big;
      log_scale += log_big;
    }
  }
  return std::log(kmu) + log_scale;
}

inline double bessel_k(double nu, double x) { return std::exp(log_bessel_k(nu, x)); }

}  // namespace sepkrig::special
