#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sepkrig/acf.hpp"
#include "sepkrig/nelder_mead.hpp"
#include "sepkrig/trend.hpp"

namespace sepkrig {

struct SampleSpatialCorrelation {
  Matrix matrix;
  Eigen::Index frames_used = 0;
  bool standardized = false;
};

/// Gram matrix of centered residual columns divided by T_eff * sigma^2, then
/// standardized to a unit diagonal.
inline SampleSpatialCorrelation sample_spatial_correlation(const Matrix& residuals, double sigma,
                                                           const std::vector<std::string>& ids = {}) {
  const Eigen::Index n = residuals.rows();
  if (n < 2) throw InsufficientDataError("sample spatial correlation needs at least 2 valid frames");
  SampleSpatialCorrelation out;
  out.frames_used = n;
  const double scale = sigma > 0.0 ? 1.0 / (static_cast<double>(n) * sigma * sigma) : 1.0;
  Matrix g = residuals.transpose() * residuals;
  g *= scale;
  for (Eigen::Index s = 0; s < g.rows(); ++s) {
    if (!(g(s, s) > 0.0) || !std::isfinite(g(s, s))) {
      const std::string name = static_cast<std::size_t>(s) < ids.size() ? ids[static_cast<std::size_t>(s)]
                                                                        : "#" + std::to_string(s);
      throw DegenerateSensorError("sensor '" + name + "' has zero residual variance");
    }
  }
  const Vector inv_sd = g.diagonal().array().rsqrt();
  out.matrix = inv_sd.asDiagonal() * g * inv_sd.asDiagonal();
  out.matrix.diagonal().setOnes();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  out.standardized = true;
  return out;
}

inline SampleSpatialCorrelation sample_spatial_correlation(const ObservationGrid& grid, const TrendEstimate& trend) {
  const double sigma = trend.sigma > 0.0 ? trend.sigma : estimate_sigma(grid, trend);
  return sample_spatial_correlation(trend_residuals(grid, trend), sigma, grid.sensor_ids);
}

/// Per-frame spatial pseudo log-likelihood: -(log det R + tr(R^{-1} M)) / 2.
inline double spatial_pseudo_loglik_per_frame(const SpatialAcfModel& model, const Matrix& mhat, const Matrix& dist) {
  const Matrix r = spatial_correlation(model, dist);
  const auto llt = robust_cholesky(r, "spatial correlation matrix");
  const double tr = llt.solve(mhat).trace();
  return -0.5 * (log_det(llt) + tr);
}

inline double spatial_pseudo_loglik(const SpatialAcfModel& model, const SampleSpatialCorrelation& mhat,
                                    const Matrix& dist) {
  if (!mhat.standardized) throw InvalidInputError("sample spatial correlation must be standardized");
  return static_cast<double>(mhat.frames_used) * spatial_pseudo_loglik_per_frame(model, mhat.matrix, dist);
}

/// Unconstrained coordinates: (log range, [smoothness], logit nugget_weight).
/// Matern smoothness is on the log scale; power-exponential smoothness is a
/// logit on (0, 2), the range where it stays positive definite.
class SpatialParameterization {
 public:
  explicit SpatialParameterization(SpatialFamily family) : family_(family) {}

  Eigen::Index dim() const { return has_smoothness(family_) ? 3 : 2; }
  SpatialFamily family() const { return family_; }

  Vector to_unconstrained(const SpatialAcfModel& m) const {
    Vector th(dim());
    th(0) = std::log(m.range);
    if (family_ == SpatialFamily::matern) th(1) = std::log(*m.smoothness);
    if (family_ == SpatialFamily::powerexp) th(1) = logit(*m.smoothness / 2.0);
    th(dim() - 1) = logit(m.nugget_weight);
    return th;
  }

  SpatialAcfModel from_unconstrained(const Vector& th) const {
    SpatialAcfModel m;
    m.family = family_;
    m.range = std::exp(th(0));
    if (family_ == SpatialFamily::matern) m.smoothness = std::exp(th(1));
    if (family_ == SpatialFamily::powerexp) m.smoothness = 2.0 * expit(th(1));
    m.nugget_weight = expit(th(dim() - 1));
    return m;
  }

  bool feasible(const SpatialAcfModel& m) const {
    if (!(m.range > 0.0) || !std::isfinite(m.range)) return false;
    if (!(m.nugget_weight > 0.0)) return false;
    if (family_ == SpatialFamily::matern && !(*m.smoothness <= kMaxMaternSmoothness && *m.smoothness > 0.0))
      return false;
    if (family_ == SpatialFamily::powerexp && !(*m.smoothness > 0.0)) return false;
    return true;
  }

  static double logit(double p) { return std::log(p / (1.0 - p)); }
  static double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

 private:
  SpatialFamily family_;
};

struct SpatialFitOptions {
  int starts = 5;
  double diameter_tol = 1e-9;
  int max_iterations = 2000;
  double gradient_tol = 1e-5;
  double bound_tol = 1e-3;
};

struct SpatialFitResult {
  SpatialAcfModel model;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  double gradient_norm = std::numeric_limits<double>::infinity();  // per-frame loglik, transformed coords
  double simplex_diameter = std::numeric_limits<double>::infinity();
  bool near_bound = false;
  int best_start = -1;
};

namespace detail {

inline bool near_parameter_bound(const SpatialAcfModel& m, double tol) {
  if (m.nugget_weight > 1.0 - tol || m.nugget_weight < tol) return true;
  if (m.family == SpatialFamily::matern && *m.smoothness > kMaxMaternSmoothness - tol) return true;
  if (m.family == SpatialFamily::powerexp && (*m.smoothness > 2.0 - tol || *m.smoothness < tol)) return true;
  return false;
}

}  // namespace detail

/// Maximum spatial pseudo likelihood by multi-start Nelder-Mead on the
/// unconstrained parameterization. Starts come from a Halton sequence over a
/// box scaled to the layout's distances; ties go to the lowest start index.
inline SpatialFitResult fit_spatial(SpatialFamily family, const SampleSpatialCorrelation& mhat, const Matrix& dist,
                                    const SpatialFitOptions& opt = {}) {
  const Eigen::Index S = mhat.matrix.rows();
  if (S < 2) throw InvalidInputError("spatial fitting needs at least 2 sensors");
  if (dist.rows() != S || dist.cols() != S) throw InvalidInputError("distance matrix does not match sample correlation");
  if (!mhat.standardized) throw InvalidInputError("sample spatial correlation must be standardized");
  if (opt.starts < 1) throw InvalidInputError("need at least one start");

  const SpatialParameterization par(family);
  auto objective = [&](const Vector& th) {
    const SpatialAcfModel m = par.from_unconstrained(th);
    if (!par.feasible(m)) return std::numeric_limits<double>::infinity();
    try {
      return -spatial_pseudo_loglik_per_frame(m, mhat.matrix, dist);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (Eigen::Index i = 0; i < S; ++i)
    for (Eigen::Index j = 0; j < S; ++j)
      if (i != j && dist(i, j) > 0.0) {
        dmin = std::min(dmin, dist(i, j));
        dmax = std::max(dmax, dist(i, j));
      }
  if (!(dmax > 0.0)) throw InvalidInputError("all sensors share one location");

  Vector lo(par.dim());
  Vector hi(par.dim());
  lo(0) = std::log(dmin / 2.0);
  hi(0) = std::log(2.0 * dmax);
  if (family == SpatialFamily::matern) {
    lo(1) = std::log(0.25);
    hi(1) = std::log(4.0);
  } else if (family == SpatialFamily::powerexp) {
    lo(1) = -2.0;
    hi(1) = 2.0;
  }
  lo(par.dim() - 1) = -1.0;
  hi(par.dim() - 1) = 3.0;

  SpatialFitResult best;
  double best_value = std::numeric_limits<double>::infinity();
  Vector best_theta;
  int total_iterations = 0;
  bool best_nm_converged = false;
  for (int k = 0; k < opt.starts; ++k) {
    const Vector start = lo + optim::halton_point(k + 1, par.dim()).cwiseProduct(hi - lo);
    optim::NelderMeadOptions nmo;
    nmo.diameter_tol = opt.diameter_tol;
    nmo.max_iterations = opt.max_iterations;
    auto run = optim::nelder_mead(objective, start, nmo);
    // One restart from the optimum guards against a collapsed simplex.
    if (run.iterations < opt.max_iterations) {
      nmo.initial_step = 0.05;
      nmo.max_iterations = opt.max_iterations - run.iterations;
      auto again = optim::nelder_mead(objective, run.x, nmo);
      again.iterations += run.iterations;
      if (again.value <= run.value) run = again;
      else run.iterations = again.iterations;
    }
    total_iterations += run.iterations;
    if (run.value < best_value) {
      best_value = run.value;
      best_theta = run.x;
      best.best_start = k;
      best.simplex_diameter = run.diameter;
      best_nm_converged = run.converged;
    }
  }
  best.iterations = total_iterations;
  if (!std::isfinite(best_value)) {
    best.converged = false;
    return best;
  }
  best.model = par.from_unconstrained(best_theta);
  best.loglik = -best_value * static_cast<double>(mhat.frames_used);
  best.gradient_norm = optim::numeric_gradient(objective, best_theta, 1e-6).norm();
  best.near_bound = detail::near_parameter_bound(best.model, opt.bound_tol);
  best.converged = best_nm_converged && best.gradient_norm <= opt.gradient_tol;
  return best;
}

/// trace{(R - M) dR^{-1}/d theta_k} for each unconstrained coordinate, by
/// central differences with step 1e-6.
inline Vector estimating_equation_residual(const SpatialAcfModel& model, const Matrix& mhat, const Matrix& dist,
                                           double h = 1e-6) {
  const SpatialParameterization par(model.family);
  const Vector th = par.to_unconstrained(model);
  const Matrix r = spatial_correlation(model, dist);
  const Matrix diff = r - mhat;
  auto inverse = [&](const Vector& t) {
    const Matrix rt = spatial_correlation(par.from_unconstrained(t), dist);
    const auto llt = robust_cholesky(rt, "spatial correlation matrix");
    return Matrix(llt.solve(Matrix::Identity(rt.rows(), rt.cols())));
  };
  Vector out(th.size());
  for (Eigen::Index k = 0; k < th.size(); ++k) {
    Vector tp = th;
    Vector tm = th;
    tp(k) += h;
    tm(k) -= h;
    const Matrix d_inv = (inverse(tp) - inverse(tm)) / (2.0 * h);
    out(k) = (diff * d_inv).trace();
  }
  return out;
}

}  // namespace sepkrig
