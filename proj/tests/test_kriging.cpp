#include <gtest/gtest.h>

#include <random>

#include "sepkrig/dense_oracle.hpp"
#include "sepkrig/kriging.hpp"
#include "support.hpp"

using namespace sepkrig;
using testing_support::max_rel_error;

namespace {

/// Temporal factors for AR(1) history of length T and forecasts 1..H.
struct TemporalFactors {
  Matrix r, rho, rp;
};

TemporalFactors ar1_factors(const TemporalAcfModel& acf, Eigen::Index T, Eigen::Index H) {
  TemporalFactors f;
  f.r = temporal_correlation(acf, T);
  f.rho.resize(H, T);
  for (Eigen::Index h = 0; h < H; ++h)
    for (Eigen::Index i = 0; i < T; ++i) f.rho(h, i) = acf(T - 1 - i + h + 1);
  f.rp = temporal_correlation(acf, H);
  return f;
}

FittedField field_with(const ObservationGrid& grid, Eigen::Index window, SpatialAcfModel spatial, TemporalModel temporal) {
  FittedField f;
  f.trend = fit_trend(grid, window);
  f.spatial = spatial;
  f.temporal = std::move(temporal);
  return f;
}

}  // namespace

TEST(Weights, TargetAtSensorIsIndicator) {
  std::mt19937_64 rng(1);
  const auto layout = testing_support::random_layout(5, rng);
  const SpatialAcfModel m{SpatialFamily::exponential, 6.0, std::nullopt, 1.0};
  const Matrix w = spatial_weights(m, layout, layout.coords());
  EXPECT_LE((w - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Weights, FarTargetRevertsToTrend) {
  std::mt19937_64 rng(2);
  const auto layout = testing_support::random_layout(4, rng);
  const std::vector<Point> far{{1e6, 1e6}};
  EXPECT_LE(spatial_weights({SpatialFamily::gaussian, 5.0, std::nullopt, 1.0}, layout, far).cwiseAbs().maxCoeff(), 1e-300);
}

TEST(Weights, CacheReturnsStoredMatrix) {
  std::mt19937_64 rng(3);
  const auto layout = testing_support::random_layout(4, rng);
  const auto targets = testing_support::random_points(3, rng);
  const SpatialAcfModel m{SpatialFamily::exponential, 6.0, std::nullopt, 0.9};
  WeightsCache cache;
  const Matrix a = cache.get(m, layout, targets);
  const Matrix b = cache.get(m, layout, targets);
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, spatial_weights(m, layout, targets));
  SpatialAcfModel other = m;
  other.range = 7.0;
  cache.get(other, layout, targets);
  EXPECT_EQ(cache.size(), 2u);
}

TEST(Oracle, ScalarUncorrelated) {
  const Matrix one = Matrix::Ones(1, 1), zero = Matrix::Zero(1, 1);
  const auto d = dense_kriging_oracle(one, one, zero, zero, one, one, Matrix::Constant(1, 1, 3.0));
  EXPECT_EQ(d.mean(0, 0), 0.0);
  EXPECT_EQ(d.covariance(0, 0), 1.0);
}

TEST(Oracle, SizeGuard) {
  const Matrix big = Matrix::Identity(70, 70);
  const Matrix r = Matrix::Identity(70, 70);
  EXPECT_THROW(dense_kriging_oracle(big, r, big, r, big, r, Matrix::Zero(70, 70)), SizeGuardError);
}

TEST(SeparableAlgebra, MeanAndVarianceMatchDenseOnRandomInstances) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<Eigen::Index> s_dist(2, 5), t_dist(3, 6), p_dist(1, 3);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index S = s_dist(rng), T = t_dist(rng), Sp = p_dist(rng), Tp = p_dist(rng);
    const Matrix rs = testing_support::random_correlation(S + Sp, rng);
    const Matrix rt = testing_support::random_correlation(T + Tp, rng);
    const Matrix r_s = rs.topLeftCorner(S, S), rho_s = rs.bottomLeftCorner(Sp, S), rp_s = rs.bottomRightCorner(Sp, Sp);
    const Matrix r_t = rt.topLeftCorner(T, T), rho_t = rt.bottomLeftCorner(Tp, T), rp_t = rt.bottomRightCorner(Tp, Tp);
    const Matrix y = testing_support::random_matrix(T, S, rng);
    const auto dense = dense_kriging_oracle(r_s, r_t, rho_s, rho_t, rp_s, rp_t, y);
    EXPECT_LE(max_rel_error(separable_mean(rho_s, r_s, rho_t, r_t, y), dense.mean), 1e-10) << rep;
    const Matrix v = separable_variance(rho_s, r_s, rp_s, rho_t, r_t, rp_t);
    const Matrix dense_v = unvec(dense.covariance.diagonal(), Tp, Sp);
    EXPECT_LE(max_rel_error(v, dense_v), 1e-10) << rep;
  }
}

TEST(PredictMean, HorizonZeroReproducesObservedRow) {
  std::mt19937_64 rng(5);
  const auto layout = testing_support::random_layout(4, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(12, 4, rng));
  const auto field = field_with(grid, 3, {SpatialFamily::exponential, 5.0, std::nullopt, 1.0}, TemporalAcfModel{});
  const auto res = predict_mean(field, layout, grid, {layout.coords(), 0});
  ASSERT_EQ(res.mean.rows(), 1);
  EXPECT_LE((res.mean.row(0) - grid.values.row(11)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictMean, ZeroResidualsGiveTrend) {
  std::mt19937_64 rng(6);
  const auto layout = testing_support::random_layout(3, rng);
  const auto grid = testing_support::grid_of(Matrix::Constant(40, 3, 21.5));
  const auto field = field_with(grid, 5, {SpatialFamily::exponential, 5.0, std::nullopt, 0.9},
                                SeasonalArModel{{1, 4}, {0.6, 0.2}, 1.0});
  const auto res = predict_mean(field, layout, grid, {testing_support::random_points(4, rng), 3});
  EXPECT_EQ(res.mean, Matrix::Constant(3, 4, 21.5));
}

TEST(PredictMean, Ar1MatchesDenseFormula) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    const auto layout = testing_support::random_layout(4, rng);
    const Eigen::Index window = 3, T = window + 5, H = 3;
    const auto grid = testing_support::grid_of(testing_support::random_matrix(T, 4, rng));
    const TemporalAcfModel acf{TemporalKind::ar1, 0.6, 0.9};
    const SpatialAcfModel sm{SpatialFamily::exponential, 8.0, std::nullopt, 0.85};
    const auto field = field_with(grid, window, sm, acf);
    const auto targets = testing_support::random_points(2, rng);
    const auto res = predict(field, layout, grid, {targets, H}, nullptr, PredictionOrder::forecast_first);

    const Matrix centered = trend_residuals(grid, field.trend);
    const auto tf = ar1_factors(acf, centered.rows(), H);
    const Matrix r_s = spatial_correlation(sm, layout.distances());
    const Matrix rho_s = spatial_correlation(sm, cross_distances(targets, layout.coords()));
    const Matrix rp_s = spatial_correlation(sm, build_spatial_distances(targets));
    const auto dense = dense_kriging_oracle(r_s, tf.r, rho_s, tf.rho, rp_s, tf.rp, centered);
    const Matrix expected = dense.mean.array() + field.trend.last();
    EXPECT_LE(max_rel_error(res.mean, expected), 1e-10) << rep;
    const Matrix dense_v = field.sigma() * field.sigma() * unvec(dense.covariance.diagonal(), H, 2);
    EXPECT_LE(max_rel_error(res.variance, dense_v), 1e-10) << rep;
  }
}

TEST(PredictMean, OrdersAgree) {
  std::mt19937_64 rng(8);
  const auto layout = testing_support::random_layout(5, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(80, 5, rng));
  const SpatialAcfModel sm{SpatialFamily::matern, 6.0, 1.5, 0.9};
  const auto targets = testing_support::random_points(3, rng);
  for (const TemporalModel& tm : {TemporalModel(SeasonalArModel{{1, 6}, {0.7, 0.3}, 1.0}),
                                  TemporalModel(TemporalAcfModel{TemporalKind::ar1, 0.8, 1.0}),
                                  TemporalModel(TemporalAcfModel{TemporalKind::ma1, 0.3, 0.8})}) {
    const auto field = field_with(grid, 10, sm, tm);
    const auto a = predict_mean(field, layout, grid, {targets, 4}, PredictionOrder::forecast_first);
    const auto b = predict_mean(field, layout, grid, {targets, 4}, PredictionOrder::interpolate_first);
    EXPECT_LE(max_rel_error(a.mean, b.mean), 1e-10);
  }
}

TEST(PredictMean, PermutationEquivariant) {
  std::mt19937_64 rng(9);
  const auto layout = testing_support::random_layout(4, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(30, 4, rng));
  const std::vector<Eigen::Index> perm{2, 0, 3, 1};
  auto pgrid = grid;
  for (Eigen::Index s = 0; s < 4; ++s) pgrid.values.col(s) = grid.values.col(perm[s]);
  const SpatialAcfModel sm{SpatialFamily::exponential, 9.0, std::nullopt, 0.8};
  const SeasonalArModel ar{{1, 3}, {0.5, 0.25}, 1.0};
  const auto targets = testing_support::random_points(3, rng);
  const auto a = predict_mean(field_with(grid, 4, sm, ar), layout, grid, {targets, 2});
  const auto b = predict_mean(field_with(pgrid, 4, sm, ar), layout.subset(perm), pgrid, {targets, 2});
  EXPECT_LE(max_rel_error(a.mean, b.mean), 1e-12);
  for (Eigen::Index s = 0; s < 4; ++s) EXPECT_LE((b.weights.col(s) - a.weights.col(perm[s])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictMean, InsufficientHistory) {
  std::mt19937_64 rng(10);
  const auto layout = testing_support::random_layout(2, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(12, 2, rng));
  const auto field = field_with(grid, 4, {}, SeasonalArModel{{2, 8}, {0.5, 0.3}, 1.0});
  EXPECT_THROW(predict_mean(field, layout, grid, {layout.coords(), 1}), InsufficientDataError);
}

TEST(PredictVariance, ZeroAtSensorHorizonZero) {
  std::mt19937_64 rng(11);
  const auto layout = testing_support::random_layout(4, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(20, 4, rng));
  const auto field = field_with(grid, 3, {SpatialFamily::exponential, 5.0, std::nullopt, 1.0}, SeasonalArModel{{1}, {0.5}, 1.0});
  const Matrix v = predict_variance(field, layout, {layout.coords(), 0}, 17);
  EXPECT_LE(v.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictVariance, FarTargetPriorVariance) {
  std::mt19937_64 rng(12);
  const auto layout = testing_support::random_layout(4, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(20, 4, rng));
  const auto field = field_with(grid, 3, {SpatialFamily::exponential, 5.0, std::nullopt, 0.9}, SeasonalArModel{{1}, {0.5}, 1.0});
  const std::vector<Point> far{{1e5, 0}};
  EXPECT_NEAR(predict_variance(field, layout, {far, 0}, 17)(0, 0), field.sigma() * field.sigma(), 1e-12);
}

TEST(PredictVariance, SeasonalOneStepUsesInnovationRatio) {
  std::mt19937_64 rng(13);
  const auto layout = testing_support::random_layout(3, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(40, 3, rng));
  const SeasonalArModel ar{{1, 5}, {0.6, 0.3}, 1.0};
  const SpatialAcfModel sm{SpatialFamily::exponential, 5.0, std::nullopt, 0.9};
  const auto field = field_with(grid, 5, sm, ar);
  const std::vector<Point> at{layout.coords()[1]};
  const double expected = field.sigma() * field.sigma() * innovation_variance_ratio(ar);
  EXPECT_NEAR(predict_variance(field, layout, {at, 1}, 35)(0, 0), expected, 1e-12);
}

TEST(PredictVariance, MultiStepSeasonalIsCapabilityError) {
  std::mt19937_64 rng(14);
  const auto layout = testing_support::random_layout(3, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(40, 3, rng));
  const auto field = field_with(grid, 5, {}, SeasonalArModel{{1, 5}, {0.6, 0.3}, 1.0});
  EXPECT_THROW(predict_variance(field, layout, {layout.coords(), 2}, 35), CapabilityError);
  std::string why;
  const auto res = predict(field, layout, grid, {layout.coords(), 2}, &why);
  EXPECT_EQ(res.mean.rows(), 2);
  EXPECT_EQ(res.variance.size(), 0);
  EXPECT_NE(why.find("horizon 2"), std::string::npos);
}

TEST(PredictVariance, BoundedByPrior) {
  std::mt19937_64 rng(15);
  const auto layout = testing_support::random_layout(6, rng);
  const auto grid = testing_support::grid_of(testing_support::random_matrix(50, 6, rng));
  const auto field = field_with(grid, 5, {SpatialFamily::powerexp, 4.0, 1.2, 0.7}, TemporalAcfModel{TemporalKind::ar1, 0.7, 0.95});
  const Matrix v = predict_variance(field, layout, {testing_support::random_points(20, rng), 5}, 45);
  EXPECT_GE(v.minCoeff(), 0.0);
  EXPECT_LE(v.maxCoeff(), field.sigma() * field.sigma() + 1e-9);
}

TEST(PredictVariance, AddingSensorNeverIncreasesVariance) {
  std::mt19937_64 rng(16);
  for (int rep = 0; rep < 20; ++rep) {
    const auto layout = testing_support::random_layout(6, rng);
    const auto targets = testing_support::random_points(10, rng);
    const auto grid = testing_support::grid_of(testing_support::random_matrix(30, 6, rng));
    const SpatialAcfModel sm{SpatialFamily::exponential, 7.0, std::nullopt, 0.9};
    const auto field = field_with(grid, 5, sm, TemporalAcfModel{TemporalKind::ar1, 0.5, 1.0});
    std::vector<Eigen::Index> idx{0};
    Matrix prev = predict_variance(field, layout.subset(idx), {targets, 1}, 25);
    for (Eigen::Index s = 1; s < 6; ++s) {
      idx.push_back(s);
      const Matrix v = predict_variance(field, layout.subset(idx), {targets, 1}, 25);
      EXPECT_LE((v - prev).maxCoeff(), 1e-12) << "rep " << rep << " sensors " << idx.size();
      prev = v;
    }
  }
}

TEST(Raster, CellCentersCoverBoundingBox) {
  const SensorLayout layout({"a", "b"}, {{0, 0}, {4, 2}});
  const auto pts = raster_targets(layout, 2, 4);
  ASSERT_EQ(pts.size(), 8u);
  EXPECT_DOUBLE_EQ(pts[0].x, 0.5);
  EXPECT_DOUBLE_EQ(pts[0].y, 1.5);
  EXPECT_DOUBLE_EQ(pts[7].x, 3.5);
  EXPECT_DOUBLE_EQ(pts[7].y, 0.5);
}
