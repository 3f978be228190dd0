#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "supercut/metrics.hpp"
#include "supercut/rng.hpp"

using namespace supercut;

namespace {

const ClassTable kTable({"ground", "chair", "table"}, {false, true, true});

PanopticLabels make(std::vector<Label> cls, std::vector<Label> obj) { return {std::move(cls), std::move(obj)}; }

// Random panoptic labels: stuff class 0 on index 0, things numbered from 3.
PanopticLabels random_labels(CounterRng& rng, std::size_t n, std::size_t objects) {
  PanopticLabels l;
  std::vector<Label> obj_class(objects);
  for (auto& c : obj_class) c = static_cast<Label>(1 + rng.below(2));
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < 0.3) {
      l.semantic.push_back(0);
      l.object.push_back(0);
    } else {
      const auto o = rng.below(objects);
      l.semantic.push_back(obj_class[o]);
      l.object.push_back(static_cast<Label>(3 + o));
    }
  }
  return l;
}

// Predictions derived from the truth by moving a random fraction of points.
PanopticLabels perturb(const PanopticLabels& gt, CounterRng& rng, double rate) {
  PanopticLabels p = gt;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (rng.uniform() < rate) {
      const std::size_t j = rng.below(p.size());
      p.semantic[i] = gt.semantic[j];
      p.object[i] = gt.object[j];
    }
  return p;
}

}  // namespace

TEST(PanopticQuality, IdenticalPredictionIsPerfect) {
  const auto gt = make({0, 0, 1, 1, 2, 2, 1}, {0, 0, 3, 3, 4, 4, 5});
  const auto m = panoptic_quality(gt, gt, kTable);
  EXPECT_DOUBLE_EQ(m.pq, 100.0);
  EXPECT_DOUBLE_EQ(m.rq, 100.0);
  EXPECT_DOUBLE_EQ(m.sq, 100.0);
  for (const auto& q : m.per_class) EXPECT_DOUBLE_EQ(q.pq, 100.0);
  EXPECT_DOUBLE_EQ(m.miou, 100.0);
}

TEST(PanopticQuality, EqualHalvesAreNotMatches) {
  const auto gt = make({1, 1, 1, 1}, {3, 3, 3, 3});
  const auto pred = make({1, 1, 1, 1}, {3, 3, 4, 4});
  const auto m = panoptic_quality(pred, gt, kTable);
  const auto& q = m.per_class[1];
  EXPECT_EQ(q.tp, 0u);
  EXPECT_EQ(q.fp, 2u);
  EXPECT_EQ(q.fn, 1u);
  EXPECT_DOUBLE_EQ(q.pq, 0.0);
  EXPECT_DOUBLE_EQ(m.pq, 0.0);
  EXPECT_EQ(m.present_classes, 1u);
}

TEST(PanopticQuality, OneMatchOneFalsePositiveOneMiss) {
  // Chair A = points 0..4, chair B = 5..7, ground = 8..11.
  const auto gt = make({1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0}, {3, 3, 3, 3, 3, 4, 4, 4, 0, 0, 0, 0});
  const auto pred = make({1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0}, {9, 9, 9, 9, 0, 0, 0, 0, 8, 8, 0, 0});
  const auto m = panoptic_quality(pred, gt, kTable);
  const auto& chair = m.per_class[1];
  EXPECT_EQ(chair.tp, 1u);
  EXPECT_EQ(chair.fp, 1u);
  EXPECT_EQ(chair.fn, 1u);
  EXPECT_DOUBLE_EQ(chair.pq, 40.0);
  EXPECT_DOUBLE_EQ(chair.rq, 50.0);
  EXPECT_DOUBLE_EQ(chair.sq, 80.0);
  EXPECT_DOUBLE_EQ(chair.precision, 50.0);
  EXPECT_DOUBLE_EQ(chair.recall, 50.0);
  // Ground IoU is 2/8: unmatched.
  EXPECT_EQ(m.per_class[0].tp, 0u);
  EXPECT_DOUBLE_EQ(m.pq, 20.0);
}

TEST(PanopticQuality, IgnoredGroundTruthPointsAreRemoved) {
  const auto gt = make({1, 1, IGNORE, IGNORE}, {3, 3, IGNORE, IGNORE});
  // Prediction covers the void points with a separate segment: dropped, not a false positive.
  const auto pred = make({1, 1, 2, 2}, {3, 3, 5, 5});
  const auto m = panoptic_quality(pred, gt, kTable);
  EXPECT_DOUBLE_EQ(m.pq, 100.0);
  EXPECT_EQ(m.per_class[2].fp, 0u);
}

TEST(PanopticQuality, LengthMismatchIsStructural) {
  EXPECT_THROW(panoptic_quality(make({1}, {3}), make({1, 1}, {3, 3}), kTable), StructuralError);
}

TEST(PanopticQuality, ProductIdentityOnRandomPairs) {
  CounterRng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const auto gt = random_labels(rng, 40 + rng.below(80), 1 + rng.below(6));
    const auto pred = perturb(gt, rng, rng.uniform(0.0, 0.6));
    const auto m = panoptic_quality(pred, gt, kTable);
    for (const auto& q : m.per_class) {
      EXPECT_GE(q.pq, 0.0);
      EXPECT_LE(q.pq, 100.0 + 1e-9);
      if (q.tp > 0) {
        EXPECT_NEAR(q.pq, q.rq * q.sq / 100.0, 1e-9);
      }
    }
  }
}

TEST(PanopticQuality, InvariantUnderThingIndexPermutation) {
  CounterRng rng(7);
  for (int t = 0; t < 200; ++t) {
    const std::size_t objects = 2 + rng.below(6);
    const auto gt = random_labels(rng, 100, objects);
    const auto pred = perturb(gt, rng, 0.3);
    std::vector<Label> perm(objects + 3);
    std::iota(perm.begin(), perm.end(), Label{0});
    for (std::size_t i = perm.size() - 1; i > 3; --i) std::swap(perm[i], perm[3 + rng.below(i - 2)]);
    auto relabel = [&](PanopticLabels l, Label offset) {
      for (auto& o : l.object)
        if (o >= 3) o = perm[o] + offset;
      return l;
    };
    const auto a = panoptic_quality(pred, gt, kTable);
    const auto b = panoptic_quality(relabel(pred, 100), relabel(gt, 0), kTable);
    EXPECT_NEAR(a.pq, b.pq, 1e-12);
    EXPECT_NEAR(a.sq, b.sq, 1e-12);
    EXPECT_DOUBLE_EQ(a.rq, b.rq);
  }
}

TEST(Miou, IdenticalAndDisjoint) {
  const std::vector<Label> a{0, 1, 2, 1};
  EXPECT_DOUBLE_EQ(miou(a, a, kTable), 100.0);
  const std::vector<Label> gt{1, 1, 1}, pred{2, 2, 2};
  std::vector<double> per;
  EXPECT_DOUBLE_EQ(miou(pred, gt, kTable, &per), 0.0);
  EXPECT_DOUBLE_EQ(per[1], 0.0);
}

TEST(Miou, MatchesConfusionMatrix) {
  CounterRng rng(5);
  std::vector<Label> gt(500), pred(500);
  for (std::size_t i = 0; i < 500; ++i) {
    gt[i] = rng.uniform() < 0.05 ? IGNORE : static_cast<Label>(rng.below(3));
    pred[i] = rng.uniform() < 0.7 && gt[i] != IGNORE ? gt[i] : static_cast<Label>(rng.below(3));
  }
  long confusion[3][3] = {};
  for (std::size_t i = 0; i < 500; ++i)
    if (gt[i] != IGNORE) ++confusion[gt[i]][pred[i]];
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    long row = 0, col = 0;
    for (int k = 0; k < 3; ++k) {
      row += confusion[c][k];
      col += confusion[k][c];
    }
    sum += 100.0 * confusion[c][c] / static_cast<double>(row + col - confusion[c][c]);
  }
  EXPECT_NEAR(miou(pred, gt, kTable), sum / 3.0, 1e-12);
}

TEST(PrecisionRecall, PerfectAndMixedAndAbsentClasses) {
  const auto gt = make({1, 1, 0, 0}, {3, 3, 0, 0});
  const auto perfect = precision_recall(gt, gt, kTable);
  ASSERT_EQ(perfect.size(), 2u);  // class 2 has no predictions and no ground truth
  for (const auto& pr : perfect) {
    EXPECT_DOUBLE_EQ(pr.precision, 100.0);
    EXPECT_DOUBLE_EQ(pr.recall, 100.0);
  }
}

TEST(ClassLoss, Examples) {
  const std::vector<double> onehot{0, 1, 0}, uniform4{0.25, 0.25, 0.25, 0.25}, half{0.5, 0.3, 0.2};
  EXPECT_DOUBLE_EQ(class_loss(onehot, 1), 0.0);
  EXPECT_NEAR(class_loss(uniform4, 2), 1.386294361119890618834464, 1e-15);
  EXPECT_NEAR(class_loss(half, 0), 0.6931471805599453094172321, 1e-15);
  EXPECT_NEAR(class_loss(onehot, 0), -std::log(1e-12), 1e-9);
}

TEST(ClassLoss, MatchesExtendedPrecisionOnRandomInputs) {
  CounterRng rng(31);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> z(5), p(5);
    for (double& v : z) v = rng.uniform(-6.0, 6.0);
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += (p[c] = std::exp(z[c]));
    for (double& v : p) v /= s;
    const Label c = static_cast<Label>(rng.below(5));
    const long double oracle = -std::log(static_cast<long double>(p[c]));
    EXPECT_NEAR(class_loss(p, c), static_cast<double>(oracle), 1e-12);
    EXPECT_GT(class_loss(p, c), 0.0);
  }
}

TEST(AgreementLoss, Examples) {
  EXPECT_NEAR(agreement_loss(1.0, 1.0), 0.0, 1e-11);
  EXPECT_NEAR(agreement_loss(0.5, 1.0), 0.6931471805599453094172321, 1e-15);
  EXPECT_NEAR(agreement_loss(0.5, 0.5), 0.6931471805599453094172321, 1e-15);
}

TEST(AgreementLoss, MatchesExtendedPrecisionAndIsMinimizedAtTarget) {
  CounterRng rng(41);
  for (int t = 0; t < 1000; ++t) {
    const double a = rng.uniform(1e-6, 1.0 - 1e-6), target = rng.uniform();
    const long double la = a, lt = target;
    const long double oracle = -(lt * std::log(la) + (1.0L - lt) * std::log1p(-la));
    EXPECT_NEAR(agreement_loss(a, target), static_cast<double>(oracle), 1e-12);
  }
  for (double target : {0.1, 0.37, 0.5, 0.9}) {
    double best_a = 0.0, best = 1e300;
    for (int i = 1; i < 1000; ++i) {
      const double a = i / 1000.0;
      if (agreement_loss(a, target) < best) {
        best = agreement_loss(a, target);
        best_a = a;
      }
    }
    EXPECT_NEAR(best_a, target, 1e-3);
  }
}

TEST(CombinedLoss, ExamplesAndErrors) {
  const std::vector<double> zero{0.0, 0.0}, one_node{0.4}, one_edge{0.3};
  EXPECT_DOUBLE_EQ(combined_loss(zero, zero), 0.0);
  EXPECT_DOUBLE_EQ(combined_loss(one_node, one_edge), 0.4 + 0.3);
  const std::vector<double> nan_only{std::nan("")};
  EXPECT_THROW(combined_loss(nan_only, one_edge), ParameterError);
  EXPECT_THROW(combined_loss(one_node, std::vector<double>{}), ParameterError);
}

TEST(CombinedLoss, MatchesIndependentSummation) {
  CounterRng rng(8);
  std::vector<double> nodes(37), edges(91);
  for (double& v : nodes) v = rng.uniform(0.0, 3.0);
  for (double& v : edges) v = rng.uniform() < 0.1 ? std::nan("") : rng.uniform(0.0, 2.0);
  long double ns = 0.0L, es = 0.0L;
  int en = 0;
  for (double v : nodes) ns += v;
  for (double v : edges)
    if (!std::isnan(v)) {
      es += v;
      ++en;
    }
  EXPECT_NEAR(combined_loss(nodes, edges), static_cast<double>(ns / 37 + es / en), 1e-12);
}
