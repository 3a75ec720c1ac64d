#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sepkrig/grid.hpp"
#include "support.hpp"

using namespace sepkrig;
using testing_support::grid_of;

TEST(Distances, ThreeFourFive) {
  const std::vector<Point> pts{{0, 0}, {3, 4}};
  const Matrix d = build_spatial_distances(pts);
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_EQ(d(0, 1), 5.0);
  EXPECT_EQ(d(1, 0), 5.0);
}

TEST(Distances, SinglePoint) {
  const std::vector<Point> pts{{1, 1}};
  const Matrix d = build_spatial_distances(pts);
  ASSERT_EQ(d.rows(), 1);
  EXPECT_EQ(d(0, 0), 0.0);
}

TEST(Distances, RightTriangle) {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {0, 1}};
  const Matrix d = build_spatial_distances(pts);
  EXPECT_EQ(d(0, 1), 1.0);
  EXPECT_EQ(d(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(d(1, 2), std::sqrt(2.0));
}

TEST(Distances, NonFiniteCoordinateRejected) {
  const std::vector<Point> pts{{0, 0}, {NAN, 1}};
  EXPECT_THROW(build_spatial_distances(pts), InvalidInputError);
}

TEST(Distances, MetricPropertiesOnRandomLayouts) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<Eigen::Index>(1 + rep % 12);
    const auto layout = testing_support::random_layout(n, rng);
    EXPECT_EQ(check_distance_matrix(layout.distances()), "") << "layout " << rep;
  }
}

TEST(Distances, OverrideViolatingTriangleRejected) {
  Matrix d(3, 3);
  d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  EXPECT_THROW(SensorLayout({"a", "b", "c"}, {{0, 0}, {1, 0}, {2, 0}}, d), InvalidInputError);
}

TEST(Layout, DuplicateIdsRejected) {
  EXPECT_THROW(SensorLayout({"a", "a"}, {{0, 0}, {1, 0}}), InvalidInputError);
}

TEST(Layout, SubsetKeepsOrderAndDistances) {
  const SensorLayout l({"a", "b", "c"}, {{0, 0}, {3, 4}, {6, 8}});
  const std::vector<Eigen::Index> idx{2, 0};
  const auto s = l.subset(idx);
  EXPECT_EQ(s.ids(), (std::vector<std::string>{"c", "a"}));
  EXPECT_EQ(s.distances()(0, 1), 10.0);
  EXPECT_EQ(*s.index_of("a"), 1);
}

namespace {

ObservationGrid column_with_missing(std::vector<double> v, std::vector<bool> miss) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  auto g = grid_of(m);
  for (std::size_t i = 0; i < miss.size(); ++i) g.missing(static_cast<Eigen::Index>(i), 0) = miss[i];
  return g;
}

}  // namespace

TEST(Locf, CarriesForward) {
  const auto g = locf_impute(column_with_missing({1, 0, 0, 4}, {false, true, true, false}));
  EXPECT_EQ(g.values.col(0), (Eigen::Vector4d(1, 1, 1, 4)));
  EXPECT_TRUE(g.fully_observed());
}

TEST(Locf, BackFillsLeadingGap) {
  const auto g = locf_impute(column_with_missing({0, 2, 3}, {true, false, false}));
  EXPECT_EQ(g.values.col(0), (Eigen::Vector3d(2, 2, 3)));
}

TEST(Locf, FullyObservedUnchanged) {
  const auto g0 = column_with_missing({5, 6, 7}, {false, false, false});
  EXPECT_EQ(locf_impute(g0).values, g0.values);
}

TEST(Locf, FullyMissingColumnNamesSensor) {
  try {
    locf_impute(column_with_missing({0, 0}, {true, true}));
    FAIL() << "expected ImputationError";
  } catch (const ImputationError& e) {
    EXPECT_NE(std::string(e.what()).find("s0"), std::string::npos);
  }
}

TEST(Locf, Idempotent) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution miss(0.3);
  for (int rep = 0; rep < 50; ++rep) {
    auto g = grid_of(testing_support::random_matrix(20, 4, rng));
    for (Eigen::Index i = 0; i < g.values.size(); ++i) g.missing.data()[i] = miss(rng);
    for (Eigen::Index s = 0; s < 4; ++s) g.missing(rep % 20, s) = false;
    const auto once = locf_impute(g);
    const auto twice = locf_impute(once);
    EXPECT_EQ(once.values, twice.values);
  }
}

TEST(ProjectToGrid, OnGridReadingsVerbatim) {
  std::vector<Reading> r{{"a", 0, 1.0}, {"b", 0, 2.0}, {"a", 10, 3.0}, {"b", 10, 4.0}};
  const auto g = project_to_grid(r, {"a", "b"}, 10.0);
  ASSERT_EQ(g.frames(), 2);
  EXPECT_TRUE(g.fully_observed());
  EXPECT_EQ(g.values(1, 0), 3.0);
  EXPECT_EQ(g.values(1, 1), 4.0);
}

TEST(ProjectToGrid, LatestInBinWins) {
  std::vector<Reading> r{{"a", 0, 1.0}, {"a", 7, 9.0}, {"a", 3, 5.0}};
  const auto g = project_to_grid(r, {"a"}, 10.0);
  ASSERT_EQ(g.frames(), 1);
  EXPECT_EQ(g.values(0, 0), 9.0);
}

TEST(ProjectToGrid, AbsentSensorIsMissing) {
  std::vector<Reading> r{{"a", 0, 1.0}, {"b", 0, 2.0}, {"a", 10, 3.0}};
  const auto g = project_to_grid(r, {"a", "b"}, 10.0);
  EXPECT_TRUE(g.missing(1, 1));
  EXPECT_FALSE(g.missing(1, 0));
}

TEST(ProjectToGrid, UnknownSensorRejected) {
  std::vector<Reading> r{{"zz", 0, 1.0}};
  EXPECT_THROW(project_to_grid(r, {"a"}, 10.0), InvalidInputError);
}

TEST(ProjectToGrid, TimestampsFollowBinSchedule) {
  std::vector<Reading> r{{"a", 100, 1.0}, {"a", 163, 2.0}, {"a", 1000, 3.0}};
  const auto g = project_to_grid(r, {"a"}, 30.0);
  for (Eigen::Index t = 0; t < g.frames(); ++t) EXPECT_EQ(g.time_of(t), 100.0 + 30.0 * static_cast<double>(t));
  EXPECT_EQ(g.time_of(g.frames() - 1), 100.0 + 30.0 * 30.0);
}
