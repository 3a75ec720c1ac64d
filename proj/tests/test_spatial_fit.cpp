#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "sepkrig/bootstrap.hpp"
#include "sepkrig/spatial_fit.hpp"
#include "support.hpp"

using namespace sepkrig;

namespace {

SampleSpatialCorrelation exact_mhat(const SpatialAcfModel& m, const Matrix& dist, Eigen::Index frames = 1000) {
  return {spatial_correlation(m, dist), frames, true};
}

}  // namespace

TEST(SampleCorrelation, IdenticalColumnsAllOnes) {
  Matrix r(4, 3);
  r.col(0) << 1, -2, 0.5, 3;
  r.col(1) = r.col(0);
  r.col(2) = r.col(0);
  const auto m = sample_spatial_correlation(r, 1.0);
  EXPECT_LE((m.matrix - Matrix::Ones(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SampleCorrelation, OrthogonalColumnsIdentity) {
  Matrix r(4, 2);
  r << 1, 1, -1, 1, 1, -1, -1, -1;
  const auto m = sample_spatial_correlation(r, 1.0);
  EXPECT_LE((m.matrix - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(m.standardized);
  EXPECT_EQ(m.frames_used, 4);
}

TEST(SampleCorrelation, HandGram) {
  Matrix r(3, 2);
  r << 1, 1, -1, 1, 1, -1;
  EXPECT_NEAR(sample_spatial_correlation(r, 1.0).matrix(0, 1), -1.0 / 3.0, 1e-15);
}

TEST(SampleCorrelation, ZeroVarianceColumnNamed) {
  Matrix r(3, 2);
  r << 1, 0, 2, 0, 3, 0;
  try {
    sample_spatial_correlation(r, 1.0, {"a", "b"});
    FAIL();
  } catch (const DegenerateSensorError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
}

TEST(SampleCorrelation, PositiveSemidefinite) {
  std::mt19937_64 rng(1);
  const auto m = sample_spatial_correlation(testing_support::random_matrix(50, 6, rng), 1.3);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_LE(m.matrix.cwiseAbs().maxCoeff(), 1.0 + 1e-15);
}

TEST(PseudoLoglik, IdentityCase) {
  Matrix dist(3, 3);
  dist << 0, 10, 20, 10, 0, 10, 20, 10, 0;
  const SpatialAcfModel m{SpatialFamily::exponential, 1e-3, std::nullopt, 1.0};
  const SampleSpatialCorrelation mh{Matrix::Identity(3, 3), 8, true};
  EXPECT_DOUBLE_EQ(spatial_pseudo_loglik(m, mh, dist), -0.5 * 8 * 3);
}

TEST(PseudoLoglik, GridScanPeaksAtTrueRange) {
  std::mt19937_64 rng(8);
  const auto layout = testing_support::random_layout(6, rng);
  const double lambda0 = 7.0;
  const auto mh = exact_mhat({SpatialFamily::exponential, lambda0, std::nullopt, 1.0}, layout.distances());
  double best = -1e300, arg = 0;
  for (int i = 1; i <= 200; ++i) {
    const double lam = 0.1 * i;
    const double ll = spatial_pseudo_loglik({SpatialFamily::exponential, lam, std::nullopt, 1.0}, mh, layout.distances());
    if (ll > best) best = ll, arg = lam;
  }
  EXPECT_DOUBLE_EQ(arg, lambda0);
}

TEST(PseudoLoglik, TrueModelBeatsMismatchedModels) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const auto layout = testing_support::random_layout(5, rng);
    const SpatialAcfModel truth{SpatialFamily::exponential, 2 + 10 * u(rng), std::nullopt, 0.3 + 0.7 * u(rng)};
    const auto mh = exact_mhat(truth, layout.distances());
    const double at_truth = spatial_pseudo_loglik(truth, mh, layout.distances());
    const SpatialAcfModel other{SpatialFamily::exponential, 2 + 10 * u(rng), std::nullopt, 0.3 + 0.7 * u(rng)};
    EXPECT_GT(at_truth, spatial_pseudo_loglik(other, mh, layout.distances()));
  }
}

TEST(PseudoLoglik, MatchesDenseFullLikelihoodAtDeskScale) {
  // With R_T = I the full pseudo likelihood on the rank-1 sample matrix and
  // the spatial one on the unstandardized Gram matrix agree up to a constant.
  std::mt19937_64 rng(21);
  for (Eigen::Index S = 2; S <= 3; ++S) {
    for (Eigen::Index T = 2; T <= 4; ++T) {
      const auto layout = testing_support::random_layout(S, rng);
      const Matrix z = testing_support::random_matrix(T, S, rng);
      const double sigma = 1.7;
      const Matrix m_full = vec(z) * vec(z).transpose() / (sigma * sigma);
      const Matrix m_spatial = z.transpose() * z / (static_cast<double>(T) * sigma * sigma);
      std::vector<double> diffs;
      for (double lam : {0.5, 2.0, 9.0}) {
        for (double beta : {0.4, 1.0}) {
          const SpatialAcfModel m{SpatialFamily::exponential, lam, std::nullopt, beta};
          const Matrix rs = spatial_correlation(m, layout.distances());
          const Matrix r = kronecker(rs, Matrix::Identity(T, T));
          const auto llt = robust_cholesky(r);
          const double full = -0.5 * (log_det(llt) + llt.solve(m_full).trace());
          const double comp = static_cast<double>(T) * spatial_pseudo_loglik_per_frame(m, m_spatial, layout.distances());
          diffs.push_back(full - comp);
        }
      }
      const auto [lo, hi] = std::minmax_element(diffs.begin(), diffs.end());
      EXPECT_LE(*hi - *lo, 1e-10) << "S=" << S << " T=" << T;
    }
  }
}

TEST(FitSpatial, NoiseFreeRecovery) {
  std::mt19937_64 rng(31);
  const auto layout = testing_support::random_layout(8, rng, 40.0);
  const SpatialAcfModel truth{SpatialFamily::exponential, 20.0, std::nullopt, 0.8};
  const auto fit = fit_spatial(SpatialFamily::exponential, exact_mhat(truth, layout.distances()), layout.distances());
  EXPECT_NEAR(fit.model.range, 20.0, 1e-4);
  EXPECT_NEAR(fit.model.nugget_weight, 0.8, 1e-4);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.gradient_norm, 1e-5);
}

TEST(FitSpatial, NoiseFreeRecoveryWithSmoothness) {
  std::mt19937_64 rng(32);
  const auto layout = testing_support::random_layout(10, rng, 30.0);
  for (auto fam : {SpatialFamily::matern, SpatialFamily::powerexp}) {
    const SpatialAcfModel truth{fam, 8.0, 1.3, 0.9};
    const auto fit = fit_spatial(fam, exact_mhat(truth, layout.distances()), layout.distances());
    EXPECT_NEAR(fit.model.range, 8.0, 1e-3) << to_string(fam);
    EXPECT_NEAR(*fit.model.smoothness, 1.3, 1e-3) << to_string(fam);
    EXPECT_NEAR(fit.model.nugget_weight, 0.9, 1e-4) << to_string(fam);
  }
}

TEST(FitSpatial, PermutationInvariant) {
  std::mt19937_64 rng(33);
  const auto layout = testing_support::random_layout(6, rng);
  const auto sample = sample_spatial_correlation(testing_support::random_matrix(40, 6, rng) +
                                                     3.0 * testing_support::random_matrix(40, 1, rng).replicate(1, 6),
                                                 1.0);
  const auto base = fit_spatial(SpatialFamily::exponential, sample, layout.distances());
  std::vector<Eigen::Index> perm{3, 0, 5, 1, 4, 2};
  const auto permuted_layout = layout.subset(perm);
  SampleSpatialCorrelation p = sample;
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) p.matrix(i, j) = sample.matrix(perm[i], perm[j]);
  const auto other = fit_spatial(SpatialFamily::exponential, p, permuted_layout.distances());
  EXPECT_NEAR(other.model.range, base.model.range, 1e-5 * base.model.range);
  EXPECT_NEAR(other.model.nugget_weight, base.model.nugget_weight, 1e-6);
  EXPECT_NEAR(other.loglik, base.loglik, 1e-8 * std::abs(base.loglik));
}

TEST(FitSpatial, SingleSensorRejected) {
  EXPECT_THROW(fit_spatial(SpatialFamily::exponential, {Matrix::Ones(1, 1), 5, true}, Matrix::Zero(1, 1)),
               InvalidInputError);
}

TEST(EstimatingEquation, ZeroAtExactModel) {
  std::mt19937_64 rng(41);
  const auto layout = testing_support::random_layout(5, rng);
  const SpatialAcfModel m{SpatialFamily::matern, 6.0, 0.9, 0.85};
  const Vector r = estimating_equation_residual(m, spatial_correlation(m, layout.distances()), layout.distances());
  EXPECT_EQ(r.size(), 3);
  EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EstimatingEquation, SmallAtFittedOptimum) {
  std::mt19937_64 rng(42);
  const auto layout = testing_support::random_layout(7, rng, 30.0);
  const SpatialAcfModel truth{SpatialFamily::exponential, 10.0, std::nullopt, 0.85};
  const auto grid = simulate_dataset(Vector::Zero(400), 1.0, truth, SeasonalArModel{{1}, {0.5}, 1.0}, 400, layout, 7);
  const auto trend = fit_trend(grid, 20);
  const auto mh = sample_spatial_correlation(grid, trend);
  const auto fit = fit_spatial(SpatialFamily::exponential, mh, layout.distances());
  ASSERT_FALSE(fit.near_bound);
  const Vector r = estimating_equation_residual(fit.model, mh.matrix, layout.distances());
  EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-4) << r.transpose();
}

TEST(EstimatingEquation, DepartsFromZeroWhenRangePerturbed) {
  std::mt19937_64 rng(43);
  const auto layout = testing_support::random_layout(6, rng);
  const SpatialAcfModel m{SpatialFamily::exponential, 8.0, std::nullopt, 0.9};
  const Matrix mh = spatial_correlation(m, layout.distances());
  double prev = 0.0;
  for (double f : {1.02, 1.05, 1.1}) {
    SpatialAcfModel p = m;
    p.range *= f;
    const double r = std::abs(estimating_equation_residual(p, mh, layout.distances())(0));
    EXPECT_GT(r, prev);
    prev = r;
  }
}
