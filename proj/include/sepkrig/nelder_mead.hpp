#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace sepkrig::optim {

struct NelderMeadOptions {
  double diameter_tol = 1e-9;  // max vertex distance from the best vertex (inf-norm)
  int max_iterations = 2000;
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double diameter = std::numeric_limits<double>::infinity();
  bool converged = false;
};

/// Downhill simplex minimization with standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2). Non-finite
/// objective values are treated as +infinity.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& start, const NelderMeadOptions& opt = {}) {
  const Eigen::Index n = start.size();
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), start);
  std::vector<double> fv(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += opt.initial_step;
  for (std::size_t i = 0; i < simplex.size(); ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  NelderMeadResult res;
  auto diameter = [&](std::size_t best) {
    double d = 0.0;
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != best) d = std::max(d, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    return d;
  };

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    // Stable sort keeps lower vertex indices first among ties.
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (diameter(best) <= opt.diameter_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - simplex[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    bool shrink = false;
    if (fr < fv[worst]) {
      const Eigen::VectorXd xc = centroid + 0.5 * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        simplex[worst] = xc;
        fv[worst] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd xc = centroid + 0.5 * (simplex[worst] - centroid);
      const double fc = eval(xc);
      if (fc < fv[worst]) {
        simplex[worst] = xc;
        fv[worst] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t i = 0; i < simplex.size(); ++i) {
        if (i == best) continue;
        simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
        fv[i] = eval(simplex[i]);
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < simplex.size(); ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = simplex[best];
  res.value = fv[best];
  res.iterations = it;
  res.diameter = diameter(best);
  res.converged = res.converged || res.diameter <= opt.diameter_tol;
  return res;
}

/// Central finite-difference gradient.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Radical-inverse (Halton) point `index` (1-based) in [0,1)^dim.
inline Eigen::VectorXd halton_point(int index, Eigen::Index dim) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  Eigen::VectorXd p(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const int base = primes[d % 10];
    double f = 1.0;
    double r = 0.0;
    for (int i = index; i > 0; i /= base) {
      f /= base;
      r += f * (i % base);
    }
    p(d) = r;
  }
  return p;
}

}  // namespace sepkrig::optim
