#pragma once

#include <Eigen/Dense>

#include <limits>
#include <sstream>
#include <string>

#include "sepkrig/error.hpp"

namespace sepkrig {

inline constexpr double kCholeskyJitter = 1e-10;
inline constexpr int kCholeskyRetries = 3;

/// Cholesky factorization with the fixed jitter policy: on failure add 1e-10
/// to the diagonal and retry, at most three times.
inline Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a, const std::string& what = "matrix") {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return llt;
  Eigen::MatrixXd work = a;
  for (int attempt = 1; attempt <= kCholeskyRetries; ++attempt) {
    work.diagonal().array() += kCholeskyJitter;
    llt.compute(work);
    if (llt.info() == Eigen::Success && llt.matrixLLT().allFinite()) return llt;
  }
  double min_eig = std::numeric_limits<double>::quiet_NaN();
  if (a.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.info() == Eigen::Success) min_eig = es.eigenvalues().minCoeff();
  }
  std::ostringstream msg;
  msg << what << " is not positive definite (smallest eigenvalue estimate " << min_eig << ")";
  throw NumericalError(msg.str());
}

inline double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// Dense Kronecker product, used only by small-scale oracles.
inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-stacking vec operator.
inline Eigen::VectorXd vec(const Eigen::MatrixXd& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

inline Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

/// Lazy view of outer ⊗ inner (spatial ⊗ temporal). Products and solves route
/// through the factors; vec(X) is indexed with the inner dimension fastest.
class KroneckerView {
 public:
  static constexpr Eigen::Index kMaterializeCap = 4096;

  KroneckerView(Eigen::MatrixXd outer, Eigen::MatrixXd inner)
      : outer_(std::move(outer)), inner_(std::move(inner)) {}

  Eigen::Index rows() const { return outer_.rows() * inner_.rows(); }
  Eigen::Index cols() const { return outer_.cols() * inner_.cols(); }
  const Eigen::MatrixXd& outer() const { return outer_; }
  const Eigen::MatrixXd& inner() const { return inner_; }

  /// (outer ⊗ inner) vec(X) = vec(inner X outerᵀ), X is inner.cols() x outer.cols().
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const { return inner_ * x * outer_.transpose(); }

  Eigen::VectorXd operator*(const Eigen::VectorXd& v) const {
    return vec(apply(unvec(v, inner_.cols(), outer_.cols())));
  }

  /// (outer ⊗ inner)^{-1} vec(X) for square SPD factors.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& x) const {
    const auto lo = robust_cholesky(outer_, "outer Kronecker factor");
    const auto li = robust_cholesky(inner_, "inner Kronecker factor");
    Eigen::MatrixXd y = li.solve(x);                       // inner^{-1} X
    return lo.solve(y.transpose()).transpose();            // ... outer^{-T}
  }

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(std::min(rows(), cols()));
    const Eigen::Index n = std::min(inner_.rows(), inner_.cols());
    for (Eigen::Index a = 0; a < std::min(outer_.rows(), outer_.cols()); ++a)
      for (Eigen::Index b = 0; b < n; ++b) d(a * n + b) = outer_(a, a) * inner_(b, b);
    return d;
  }

  Eigen::MatrixXd materialize() const {
    if (rows() > kMaterializeCap || cols() > kMaterializeCap)
      throw SizeGuardError("refusing to materialize a " + std::to_string(rows()) + "x" +
                           std::to_string(cols()) + " Kronecker product (cap " +
                           std::to_string(kMaterializeCap) + ")");
    return kronecker(outer_, inner_);
  }

 private:
  Eigen::MatrixXd outer_;
  Eigen::MatrixXd inner_;
};

}  // namespace sepkrig
