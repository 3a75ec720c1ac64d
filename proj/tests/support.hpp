#pragma once

#include <random>
#include <string>
#include <vector>

#include "sepkrig/grid.hpp"

namespace testing_support {

using sepkrig::Matrix;

inline std::vector<std::string> make_ids(Eigen::Index n) {
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

inline sepkrig::ObservationGrid grid_of(const Matrix& values, double step = 600.0) {
  return sepkrig::ObservationGrid::from_values(make_ids(values.cols()), values, 0.0, step);
}

inline std::vector<sepkrig::Point> random_points(Eigen::Index n, std::mt19937_64& rng, double extent = 20.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<sepkrig::Point> pts;
  for (Eigen::Index i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
  return pts;
}

inline sepkrig::SensorLayout random_layout(Eigen::Index n, std::mt19937_64& rng, double extent = 20.0) {
  return sepkrig::SensorLayout(make_ids(n), random_points(n, rng, extent));
}

/// Random correlation matrix: normalized Gram matrix of a well-conditioned factor.
inline Matrix random_correlation(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix a(n, n + 2);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  Matrix g = a * a.transpose() + 0.5 * Matrix::Identity(n, n);
  const Eigen::VectorXd d = g.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * g * d.asDiagonal();
}

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

inline double max_rel_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace testing_support
