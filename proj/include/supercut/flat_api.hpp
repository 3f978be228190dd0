#pragma once

// Array-in, array-out entry points for foreign-language bindings. Buffers are contiguous and
// row-major; labels use -1 for IGNORE.

#include <cstdint>
#include <span>
#include <vector>

#include "supercut/cutpursuit.hpp"
#include "supercut/metrics.hpp"
#include "supercut/panoptic.hpp"
#include "supercut/superpoints.hpp"

namespace supercut::flat {

struct GmpResult {
  std::vector<std::int64_t> component;  // per node
  std::vector<double> values;           // components x (C + 3): class distribution, position
  double energy = 0.0;
};

inline AdjacencyGraph graph_from_edges(std::size_t n, std::span<const std::int64_t> edges) {
  if (edges.size() % 2 != 0) throw StructuralError("edge buffer must have shape E x 2");
  AdjacencyGraph g;
  g.node_count = n;
  for (std::size_t e = 0; e < edges.size() / 2; ++e) {
    const auto u = edges[2 * e], v = edges[2 * e + 1];
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n || u == v)
      throw StructuralError("edge " + std::to_string(e) + " has an invalid endpoint");
    g.add_edge(static_cast<Index>(u), static_cast<Index>(v));
  }
  return g;
}

inline GmpResult solve_gmp(std::span<const double> positions, std::span<const double> class_scores,
                           std::size_t num_classes, std::span<const std::int64_t> edges,
                           std::span<const double> agreements, double lambda, double eta, double epsilon,
                           std::uint64_t seed, unsigned threads = 0) {
  if (positions.size() % 3 != 0) throw StructuralError("positions must have shape N x 3");
  const std::size_t n = positions.size() / 3;
  if (num_classes == 0 || class_scores.size() != n * num_classes)
    throw StructuralError("class scores must have shape N x C");
  if (agreements.size() * 2 != edges.size()) throw StructuralError("agreements must have one entry per edge");
  AdjacencyGraph g = graph_from_edges(n, edges);
  g.agreement.assign(agreements.begin(), agreements.end());
  const std::size_t before = g.edge_count();
  g.canonicalize();
  if (g.edge_count() != before) throw StructuralError("edge list contains duplicate pairs");
  NodeSignal x(n, num_classes, 3);
  std::copy(class_scores.begin(), class_scores.end(), x.class_scores.begin());
  std::copy(positions.begin(), positions.end(), x.position.begin());
  ClusteringParams params;
  params.lambda = lambda;
  params.eta = eta;
  params.epsilon = epsilon;
  params.seed = seed;
  params.threads = threads;
  const Partition part = supercut::solve_gmp(x, apply_weights(g, epsilon), params);
  GmpResult out;
  out.component.assign(part.assignment.begin(), part.assignment.end());
  for (std::size_t k = 0; k < part.component_count(); ++k) {
    out.values.insert(out.values.end(), part.cls(k), part.cls(k) + num_classes);
    out.values.insert(out.values.end(), part.pos(k), part.pos(k) + 3);
  }
  out.energy = part.energy;
  return out;
}

inline PanopticMetrics panoptic_quality(std::span<const std::int32_t> pred_class, std::span<const std::int32_t> pred_obj,
                                        std::span<const std::int32_t> gt_class, std::span<const std::int32_t> gt_obj,
                                        std::span<const std::uint8_t> is_thing) {
  const std::size_t n = gt_class.size();
  if (pred_class.size() != n || pred_obj.size() != n || gt_obj.size() != n)
    throw StructuralError("label arrays must have identical length");
  std::vector<std::string> names;
  for (std::size_t c = 0; c < is_thing.size(); ++c) names.push_back("class_" + std::to_string(c));
  const ClassTable table(names, std::vector<bool>(is_thing.begin(), is_thing.end()));
  auto convert = [](std::span<const std::int32_t> v) {
    std::vector<Label> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < -1) throw StructuralError("label values must be >= -1");
      out[i] = v[i] < 0 ? IGNORE : static_cast<Label>(v[i]);
    }
    return out;
  };
  return supercut::panoptic_quality(PanopticLabels{convert(pred_class), convert(pred_obj)},
                                    PanopticLabels{convert(gt_class), convert(gt_obj)}, table);
}

inline std::vector<std::int64_t> compute_superpoints(std::span<const double> features, std::size_t dim,
                                                     std::span<const std::int64_t> edges, double regularization,
                                                     std::uint64_t seed = 0, unsigned threads = 0) {
  if (dim == 0 || features.size() % dim != 0) throw StructuralError("features must have shape N x D");
  AdjacencyGraph g = graph_from_edges(features.size() / dim, edges);
  g.canonicalize();
  const auto sp = supercut::compute_superpoints(features, dim, g, regularization, threads, seed);
  return {sp.point_to_superpoint.begin(), sp.point_to_superpoint.end()};
}

}  // namespace supercut::flat
