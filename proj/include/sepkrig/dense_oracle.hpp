#pragma once

#include "sepkrig/linalg.hpp"

namespace sepkrig {

/// Direct kriging on materialized Kronecker products, for verification at
/// test scale only. All matrices are correlations; scale by sigma^2 outside.
struct DenseKriging {
  Eigen::MatrixXd mean;        // centered conditional mean, T' x S'
  Eigen::MatrixXd covariance;  // R' - rho R^{-1} rho^T over vec(Y')
};

inline DenseKriging dense_kriging_oracle(const Eigen::MatrixXd& r_s, const Eigen::MatrixXd& r_t,
                                         const Eigen::MatrixXd& rho_s, const Eigen::MatrixXd& rho_t,
                                         const Eigen::MatrixXd& rp_s, const Eigen::MatrixXd& rp_t,
                                         const Eigen::MatrixXd& centered) {
  const KroneckerView r(r_s, r_t);
  const KroneckerView rho(rho_s, rho_t);
  const KroneckerView rp(rp_s, rp_t);
  const Eigen::MatrixXd R = r.materialize();
  const Eigen::MatrixXd P = rho.materialize();
  const Eigen::MatrixXd Rp = rp.materialize();
  const auto llt = robust_cholesky(R, "dense spatio-temporal correlation");
  DenseKriging out;
  out.mean = unvec(P * llt.solve(vec(centered)), rho_t.rows(), rho_s.rows());
  out.covariance = Rp - P * llt.solve(P.transpose());
  return out;
}

}  // namespace sepkrig
