#pragma once

// Random problem instances shared by unit and acceptance tests.

#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "supercut/core.hpp"
#include "supercut/graphs.hpp"
#include "supercut/rng.hpp"

namespace fixtures {

using namespace supercut;

struct Instance {
  NodeSignal x;
  AdjacencyGraph g;
  std::vector<Index> truth;  // generating groups, when meaningful

  oracle::Signal oracle_signal() const {
    oracle::Signal s;
    s.n = static_cast<int>(x.num_nodes);
    s.classes = static_cast<int>(x.num_classes);
    s.dim = static_cast<int>(x.dim);
    for (std::size_t p = 0; p < x.num_nodes; ++p) {
      s.cls.emplace_back(x.cls(p), x.cls(p) + x.num_classes);
      s.pos.emplace_back(x.pos(p), x.pos(p) + x.dim);
    }
    return s;
  }
  std::vector<oracle::Edge> oracle_edges() const {
    std::vector<oracle::Edge> out;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      out.push_back({static_cast<int>(g.source[e]), static_cast<int>(g.target[e]), g.weight[e]});
    return out;
  }
};

inline void fill_class_row(double* row, std::size_t classes, bool one_hot, CounterRng& rng,
                           std::size_t hot) {
  if (one_hot) {
    for (std::size_t c = 0; c < classes; ++c) row[c] = c == hot ? 1.0 : 0.0;
    return;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) sum += (row[c] = -std::log(rng.uniform_open_closed()) + (c == hot ? 1.0 : 0.0));
  for (std::size_t c = 0; c < classes; ++c) row[c] /= sum;
}

/// Small connected random graph: a random spanning tree plus extra edges.
inline Instance small_random_instance(std::uint64_t seed, std::size_t n, std::size_t classes,
                                      bool one_hot, double extra_edge_prob = 0.25) {
  CounterRng rng(seed, 101);
  Instance inst;
  inst.x = NodeSignal(n, classes, 3);
  inst.g.node_count = n;
  for (std::size_t p = 0; p < n; ++p) {
    fill_class_row(inst.x.cls(p), classes, one_hot, rng, rng.below(classes));
    for (std::size_t d = 0; d < 3; ++d) inst.x.pos(p)[d] = rng.uniform(0.0, 2.0);
  }
  for (std::size_t v = 1; v < n; ++v) inst.g.add_edge(static_cast<Index>(rng.below(v)), static_cast<Index>(v), rng.uniform(0.05, 2.0));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform() < extra_edge_prob) inst.g.add_edge(static_cast<Index>(u), static_cast<Index>(v), rng.uniform(0.05, 2.0));
  inst.g.canonicalize();
  return inst;
}

/// Groups of nodes with one-hot classes and jittered positions; intra-group edges carry
/// `inner_weight`, edges across groups carry weight 0.
inline Instance separable_instance(std::uint64_t seed, std::size_t n, std::size_t classes,
                                   double inner_weight = 50.0) {
  CounterRng rng(seed, 202);
  Instance inst;
  const std::size_t groups = 2 + rng.below(std::min<std::size_t>(3, n / 2));
  inst.truth.resize(n);
  // Contiguous index blocks, each at least one node.
  std::vector<std::size_t> cuts{0};
  for (std::size_t gi = 1; gi < groups; ++gi) cuts.push_back(gi * n / groups);
  cuts.push_back(n);
  std::vector<std::size_t> group_class(groups);
  std::vector<Vec3> center(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    group_class[gi] = rng.below(classes);
    center[gi] = {rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)};
  }
  inst.x = NodeSignal(n, classes, 3);
  inst.g.node_count = n;
  for (std::size_t gi = 0; gi < groups; ++gi)
    for (std::size_t p = cuts[gi]; p < cuts[gi + 1]; ++p) {
      inst.truth[p] = static_cast<Index>(gi);
      fill_class_row(inst.x.cls(p), classes, true, rng, group_class[gi]);
      for (std::size_t d = 0; d < 3; ++d) inst.x.pos(p)[d] = center[gi][d] + 0.1 * rng.normal();
      if (p > cuts[gi]) inst.g.add_edge(static_cast<Index>(rng.uniform() < 0.5 ? p - 1 : cuts[gi] + rng.below(p - cuts[gi])), static_cast<Index>(p), inner_weight);
    }
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform() < 0.2) inst.g.add_edge(static_cast<Index>(u), static_cast<Index>(v), inst.truth[u] == inst.truth[v] ? inner_weight : 0.0);
  // Keep the graph connected across groups with zero-weight edges.
  for (std::size_t gi = 1; gi < groups; ++gi) inst.g.add_edge(static_cast<Index>(cuts[gi] - 1), static_cast<Index>(cuts[gi]), 0.0);
  inst.g.canonicalize();
  // canonicalize sums duplicate weights; restore exact values.
  for (std::size_t e = 0; e < inst.g.edge_count(); ++e)
    inst.g.weight[e] = inst.truth[inst.g.source[e]] == inst.truth[inst.g.target[e]] ? inner_weight : 0.0;
  return inst;
}

/// Random points with a symmetrized kNN graph and random positive weights.
inline Instance knn_instance(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t k,
                             bool one_hot = false) {
  CounterRng rng(seed, 303);
  Instance inst;
  std::vector<Vec3> pts(n);
  inst.x = NodeSignal(n, classes, 3);
  // A few blobs so the signal has structure worth partitioning.
  const std::size_t blobs = 1 + rng.below(8);
  std::vector<Vec3> centers(blobs);
  std::vector<std::size_t> blob_class(blobs);
  for (std::size_t b = 0; b < blobs; ++b) {
    centers[b] = {rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
    blob_class[b] = rng.below(classes);
  }
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t b = rng.below(blobs);
    for (int d = 0; d < 3; ++d) pts[p][d] = centers[b][d] + 0.6 * rng.normal();
    fill_class_row(inst.x.cls(p), classes, one_hot, rng, rng.uniform() < 0.85 ? blob_class[b] : rng.below(classes));
    for (int d = 0; d < 3; ++d) inst.x.pos(p)[d] = pts[p][d];
  }
  inst.g = build_knn_graph(pts, std::min(k, n - 1), 1);
  for (auto& w : inst.g.weight) w = rng.uniform(0.0, 2.0);
  return inst;
}

}  // namespace fixtures
