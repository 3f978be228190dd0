#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "supercut/scenegen.hpp"
#include "supercut/superpoints.hpp"

using namespace supercut;

namespace {

PointCloud labeled_cloud(std::vector<Label> semantic, std::vector<Label> object) {
  PointCloud c;
  for (std::size_t i = 0; i < semantic.size(); ++i) c.positions.push_back({static_cast<double>(i), 0.0, 0.0});
  c.semantic = std::move(semantic);
  c.object = std::move(object);
  return c;
}

struct Blobs {
  std::vector<double> features;
  AdjacencyGraph graph;
};

// Two blobs of constant features joined by no edge.
Blobs two_disconnected_blobs(std::size_t per_blob) {
  Blobs b;
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    const double base = i < per_blob ? 0.0 : 100.0;
    pts.push_back({base + 0.01 * static_cast<double>(i % per_blob), 0.0, 0.0});
    b.features.push_back(i < per_blob ? 0.0 : 1.0);
  }
  b.graph.node_count = pts.size();
  for (std::size_t i = 1; i < 2 * per_blob; ++i)
    if (i != per_blob) b.graph.add_edge(static_cast<Index>(i - 1), static_cast<Index>(i), 1.0);
  return b;
}

}  // namespace

TEST(Superpoints, TinyRegularizationGivesSingletons) {
  CounterRng rng(3);
  std::vector<Vec3> pts(50);
  std::vector<double> f(50 * 3);
  for (std::size_t i = 0; i < 50; ++i)
    for (int a = 0; a < 3; ++a) f[3 * i + a] = pts[i][a] = rng.uniform(0.0, 1.0);
  const auto g = build_knn_graph(pts, 5, 1);
  const auto sp = compute_superpoints(f, 3, g, 1e-9);
  EXPECT_EQ(sp.count(), 50u);
}

TEST(Superpoints, DisconnectedConstantBlobsGiveTwo) {
  const auto b = two_disconnected_blobs(20);
  for (double reg : {1e-6, 1.0, 1e6}) {
    const auto sp = compute_superpoints(b.features, 1, b.graph, reg);
    EXPECT_EQ(sp.count(), 2u) << reg;
    EXPECT_NE(sp.point_to_superpoint[0], sp.point_to_superpoint[39]);
  }
}

TEST(Superpoints, RejectsBadInput) {
  AdjacencyGraph empty;
  EXPECT_THROW(compute_superpoints(std::vector<double>{}, 1, empty, 1.0), ParameterError);
  const auto b = two_disconnected_blobs(3);
  EXPECT_THROW(compute_superpoints(b.features, 1, b.graph, 0.0), ParameterError);
  EXPECT_THROW(compute_superpoints(b.features, 2, b.graph, 1.0), StructuralError);
}

TEST(Superpoints, PartitionInvariantsAndMonotoneGranularity) {
  SceneSpec spec;
  spec.num_objects = 4;
  spec.seed = 11;
  const auto cloud = generate_scene(spec);
  std::size_t dim = 0;
  const auto f = default_superpoint_features(cloud, &dim);
  const auto g = build_knn_graph(cloud.positions, 10, 1);
  const auto csr = Csr(g);
  std::size_t previous = cloud.size() + 1;
  for (double reg : {0.01, 0.1, 1.0, 10.0}) {
    const auto sp = compute_superpoints(f, dim, g, reg);
    ASSERT_EQ(sp.point_count(), cloud.size());
    std::size_t total = 0;
    for (std::size_t s = 0; s < sp.count(); ++s) {
      ASSERT_GT(sp.size(s), 0u);
      total += sp.size(s);
      for (Index p : sp.members(s)) EXPECT_EQ(sp.point_to_superpoint[p], s);
    }
    EXPECT_EQ(total, cloud.size());
    // Each superpoint is connected in the point graph.
    std::size_t components = 0;
    connected_components(
        g, csr,
        [&](std::size_t e) { return sp.point_to_superpoint[g.source[e]] == sp.point_to_superpoint[g.target[e]]; },
        &components);
    EXPECT_EQ(components, sp.count());
    EXPECT_LE(sp.count(), previous);
    previous = sp.count();
  }
}

TEST(Superpoints, TuningApproachesTargetRatio) {
  SceneSpec spec;
  spec.num_objects = 9;
  spec.seed = 5;
  const auto cloud = generate_scene(spec);
  std::size_t dim = 0;
  const auto f = default_superpoint_features(cloud, &dim);
  const auto g = build_knn_graph(cloud.positions, 10, 1);
  const auto tuned = tune_superpoint_regularization(f, dim, g);
  EXPECT_GT(tuned.regularization, 0.0);
  EXPECT_LT(std::abs(std::log(tuned.ratio * 30.0)), std::log(1.25));
  EXPECT_EQ(tuned.partition.point_count(), cloud.size());
}

TEST(Superpoints, IdentityAndFromAssignment) {
  const auto id = SuperpointPartition::identity(4);
  EXPECT_EQ(id.count(), 4u);
  for (Index p = 0; p < 4; ++p) EXPECT_EQ(id.members(p)[0], p);
  const auto sp = SuperpointPartition::from_assignment({1, 0, 1, 1}, 2);
  EXPECT_EQ(sp.size(0), 1u);
  EXPECT_EQ(sp.size(1), 3u);
}

TEST(MajorityLabels, UniformSplitAndTie) {
  // Superpoint 0: all object 7. Superpoint 1: 6 of object 3, 4 of object 4. Superpoint 2: 5/5 tie.
  std::vector<Label> sem, obj;
  std::vector<Index> assign;
  auto add = [&](Index s, Label c, Label o, int n) {
    for (int i = 0; i < n; ++i) {
      assign.push_back(s);
      sem.push_back(c);
      obj.push_back(o);
    }
  };
  add(0, 2, 7, 5);
  add(1, 1, 3, 6);
  add(1, 2, 4, 4);
  add(2, 2, 9, 5);
  add(2, 1, 8, 5);
  auto sp = SuperpointPartition::from_assignment(assign, 3);
  const auto cloud = labeled_cloud(sem, obj);
  majority_labels(sp, cloud);
  EXPECT_EQ(sp.majority_object[0], 7u);
  EXPECT_EQ(sp.majority_object[1], 3u);
  EXPECT_EQ(sp.object_class[1], 1u);
  EXPECT_EQ(sp.majority_object[2], 8u);
  EXPECT_EQ(sp.object_class[2], 1u);
}

TEST(MajorityLabels, AllIgnoredGivesIgnore) {
  auto sp = SuperpointPartition::from_assignment({0, 0}, 1);
  majority_labels(sp, labeled_cloud({IGNORE, IGNORE}, {IGNORE, IGNORE}));
  EXPECT_EQ(sp.majority_object[0], IGNORE);
  EXPECT_EQ(sp.object_class[0], IGNORE);
}

TEST(TrueAgreement, SameDifferentAndPartialOverlap) {
  // s: 10 points of object 1. t: 8 of object 1, 2 of object 2.
  std::vector<Label> obj(20, 1);
  obj[18] = obj[19] = 2;
  std::vector<Index> assign(20, 0);
  for (std::size_t i = 10; i < 20; ++i) assign[i] = 1;
  auto sp = SuperpointPartition::from_assignment(assign, 2);
  const auto cloud = labeled_cloud(std::vector<Label>(20, 1), obj);
  majority_labels(sp, cloud);
  EXPECT_DOUBLE_EQ(true_agreement(0, 1, sp, cloud), 0.9);
  EXPECT_DOUBLE_EQ(true_agreement(1, 0, sp, cloud), 0.9);
  EXPECT_DOUBLE_EQ(true_agreement(0, 0, sp, cloud), 1.0);

  const auto split = labeled_cloud(std::vector<Label>(4, 1), {1, 1, 2, 2});
  auto sp2 = SuperpointPartition::from_assignment({0, 0, 1, 1}, 2);
  majority_labels(sp2, split);
  EXPECT_DOUBLE_EQ(true_agreement(0, 1, sp2, split), 0.0);
}

TEST(TrueAgreement, IgnoredSideGivesNaN) {
  const auto cloud = labeled_cloud({1, 1, IGNORE}, {1, 1, IGNORE});
  auto sp = SuperpointPartition::from_assignment({0, 0, 1}, 2);
  majority_labels(sp, cloud);
  EXPECT_TRUE(agreement_ignored(true_agreement(0, 1, sp, cloud)));
  EXPECT_TRUE(agreement_ignored(pointwise_agreement(0, 2, cloud)));
}

TEST(TrueAgreement, BoundedSymmetricAndPointwiseOnSingletons) {
  SceneSpec spec;
  spec.num_objects = 4;
  spec.seed = 21;
  const auto cloud = generate_scene(spec);
  const auto g = build_knn_graph(cloud.positions, 8, 1);
  std::size_t dim = 0;
  const auto f = default_superpoint_features(cloud, &dim);
  auto sp = compute_superpoints(f, dim, g, 0.2);
  majority_labels(sp, cloud);
  const auto sg = superpoint_adjacency(sp.point_to_superpoint, sp.count(), g);
  const auto a = superpoint_agreements(sp, sg, cloud, 2);
  for (std::size_t e = 0; e < sg.edge_count(); ++e) {
    EXPECT_GE(a[e], 0.0);
    EXPECT_LE(a[e], 1.0);
    EXPECT_DOUBLE_EQ(a[e], true_agreement(sg.target[e], sg.source[e], sp, cloud));
  }
  auto id = SuperpointPartition::identity(cloud.size());
  majority_labels(id, cloud);
  for (std::size_t e = 0; e < g.edge_count(); e += 7)
    EXPECT_DOUBLE_EQ(true_agreement(g.source[e], g.target[e], id, cloud),
                     pointwise_agreement(g.source[e], g.target[e], cloud));
}

TEST(Propagation, CopiesLabelsAndIdentityIsNoOp) {
  const auto sp = SuperpointPartition::from_assignment({0, 1, 1, 0, 2}, 3);
  const PanopticLabels labels{{0, 1, 2}, {0, 5, 6}};
  const auto out = propagate_to_points(sp, labels);
  EXPECT_EQ(out.semantic, (std::vector<Label>{0, 1, 1, 0, 2}));
  EXPECT_EQ(out.object, (std::vector<Label>{0, 5, 5, 0, 6}));

  CounterRng rng(1);
  PanopticLabels random;
  for (int i = 0; i < 100; ++i) {
    random.semantic.push_back(static_cast<Label>(rng.below(4)));
    random.object.push_back(static_cast<Label>(rng.below(40)));
  }
  const auto same = propagate_to_points(SuperpointPartition::identity(100), random);
  EXPECT_EQ(same.semantic, random.semantic);
  EXPECT_EQ(same.object, random.object);
  EXPECT_THROW(propagate_to_points(sp, PanopticLabels{{0}, {0}}), StructuralError);
}
