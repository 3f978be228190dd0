#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "supercut/core.hpp"
#include "supercut/rng.hpp"

using namespace supercut;

namespace {

ClassTable demo_table() { return ClassTable({"floor", "wall", "chair", "table"}, {false, false, true, true}); }

PointCloud consistent_cloud() {
  PointCloud cloud;
  cloud.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {4, 0, 0}};
  cloud.semantic = {0, 0, 2, 2, 1};
  cloud.object = {0, 0, 7, 7, 1};
  return cloud;
}

}  // namespace

TEST(ValidateGroundTruth, ConsistentCloudHasNoViolations) {
  EXPECT_TRUE(validate_ground_truth(consistent_cloud(), demo_table()).empty());
}

TEST(ValidateGroundTruth, StuffClassWithTwoIndices) {
  auto cloud = consistent_cloud();
  cloud.positions.push_back({5, 0, 0});
  cloud.semantic.push_back(1);
  cloud.object.push_back(9);  // second "wall" segment under a different index
  const auto report = validate_ground_truth(cloud, demo_table());
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, Violation::Kind::SplitStuffClass);
}

TEST(ValidateGroundTruth, MixedClassObject) {
  PointCloud cloud;
  cloud.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  cloud.semantic = {2, 2, 3, 3};
  cloud.object = {5, 5, 5, 5};
  const auto report = validate_ground_truth(cloud, demo_table());
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].kind, Violation::Kind::MixedClassObject);
}

TEST(ValidateGroundTruth, OutOfRangeClass) {
  auto cloud = consistent_cloud();
  cloud.semantic[2] = 11;
  const auto report = validate_ground_truth(cloud, demo_table());
  ASSERT_FALSE(report.empty());
  EXPECT_EQ(report[0].kind, Violation::Kind::OutOfRange);
}

TEST(ValidateGroundTruth, IgnoredPointsAreExcluded) {
  auto cloud = consistent_cloud();
  cloud.semantic[4] = IGNORE;
  cloud.object[2] = IGNORE;
  EXPECT_TRUE(validate_ground_truth(cloud, demo_table()).empty());
}

TEST(ValidateGroundTruth, LengthMismatchIsStructural) {
  auto cloud = consistent_cloud();
  cloud.object.pop_back();
  EXPECT_THROW(validate_ground_truth(cloud, demo_table()), StructuralError);
}

// Random valid clouds stay valid; one injected violation is always reported.
TEST(ValidateGroundTruth, RandomizedViolationInjection) {
  const auto table = demo_table();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng rng(seed);
    PointCloud cloud;
    const std::size_t objects = 1 + rng.below(6);
    std::vector<Label> object_class(objects);
    for (auto& c : object_class) c = 2 + static_cast<Label>(rng.below(2));
    const std::size_t n = 20 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      cloud.positions.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
      if (rng.uniform() < 0.3) {
        const Label c = static_cast<Label>(rng.below(2));
        cloud.semantic.push_back(c);
        cloud.object.push_back(stuff_object_index(c));
      } else {
        const Label o = static_cast<Label>(rng.below(objects));
        cloud.semantic.push_back(object_class[o]);
        cloud.object.push_back(10 + o);
      }
    }
    ASSERT_TRUE(validate_ground_truth(cloud, table).empty()) << "seed " << seed;

    const std::size_t victim = rng.below(n);
    if (table.thing(cloud.semantic[victim])) {
      cloud.semantic[victim] = cloud.semantic[victim] == 2 ? 3 : 2;  // object now mixed...
      // ...unless the victim was the only point of its object.
      const auto count = std::count(cloud.object.begin(), cloud.object.end(), cloud.object[victim]);
      if (count == 1) continue;
    } else {
      cloud.object[victim] = 1000;  // stuff point leaves its class index
      const Label c = cloud.semantic[victim];
      const auto count = std::count(cloud.semantic.begin(), cloud.semantic.end(), c);
      if (count == 1) continue;
    }
    EXPECT_FALSE(validate_ground_truth(cloud, table).empty()) << "seed " << seed;
  }
}

TEST(NormalizeScores, UniformRows) {
  const auto out = normalize_scores({0, 0, 0, 0}, 4);
  for (double v : out) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto pair = normalize_scores({1, 1}, 2);
  EXPECT_DOUBLE_EQ(pair[0], 0.5);
  EXPECT_DOUBLE_EQ(pair[1], 0.5);
}

TEST(NormalizeScores, MatchesHighPrecisionReference) {
  // e^2 / (e^2 + 1) evaluated at 40 digits.
  const auto out = normalize_scores({2, 0}, 2);
  EXPECT_NEAR(out[0], 0.8807970779778824440597, 1e-15);
  EXPECT_NEAR(out[1], 0.1192029220221175559403, 1e-15);
}

TEST(NormalizeScores, NonFiniteIsNumericError) {
  EXPECT_THROW(normalize_scores({1.0, std::nan("")}, 2), NumericError);
  EXPECT_THROW(normalize_scores({1.0, INFINITY}, 2), NumericError);
}

TEST(NormalizeScores, RowsArePositiveAndSumToOne) {
  CounterRng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = 1 + rng.below(12);
    std::vector<double> raw(c * 3);
    for (auto& v : raw) v = rng.uniform(-30.0, 30.0);
    const auto out = normalize_scores(raw, c);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        EXPECT_GT(out[r * c + k], 0.0);
        sum += out[r * c + k];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(LabelsConsistent, DetectsStuffIndexAndMixedObjects) {
  const auto table = demo_table();
  PanopticLabels ok{{0, 2, 2, 3}, {0, 4, 4, 5}};
  EXPECT_TRUE(labels_consistent(ok, table));
  PanopticLabels bad_stuff{{0, 1}, {0, 0}};
  EXPECT_FALSE(labels_consistent(bad_stuff, table));
  PanopticLabels mixed{{2, 3}, {4, 4}};
  EXPECT_FALSE(labels_consistent(mixed, table));
}

TEST(CounterRng, StreamsAreReproducible) {
  CounterRng a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  CounterRng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.below(5), 5u);
  }
}
