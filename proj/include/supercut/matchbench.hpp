#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <string>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/cutpursuit.hpp"
#include "supercut/graphs.hpp"
#include "supercut/rng.hpp"

namespace supercut {

/// Cost of a disallowed (true, predicted) pair.
inline constexpr double kSentinelCost = 1e6;

struct CostMatrix {
  std::size_t rows = 0;  // true objects
  std::size_t cols = 0;  // predictions
  std::vector<double> cost;  // row-major

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = kSentinelCost) : rows(r), cols(c), cost(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return cost[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return cost[r * cols + c]; }
};

struct Assignment {
  std::vector<std::pair<Index, Index>> pairs;  // (row, column), ascending row; sentinel pairs left out
  double total = 0.0;                          // cost of the reported pairs
};

/// Minimum-cost matching of size min(rows, cols) by shortest augmenting paths with dual
/// potentials (O(n^2 m)). Pairs at the sentinel cost are not reported.
inline Assignment hungarian_assign(const CostMatrix& m) {
  if (m.rows == 0 || m.cols == 0) throw ParameterError("hungarian_assign: empty cost matrix");
  if (m.cost.size() != m.rows * m.cols) throw StructuralError("hungarian_assign: cost buffer has wrong size");
  for (double c : m.cost)
    if (!std::isfinite(c)) throw NumericError("hungarian_assign: non-finite cost");
  const bool transposed = m.rows > m.cols;
  const std::size_t n = transposed ? m.cols : m.rows;  // n <= k
  const std::size_t k = transposed ? m.rows : m.cols;
  auto cost = [&](std::size_t i, std::size_t j) { return transposed ? m.at(j, i) : m.at(i, j); };

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual root.
  std::vector<double> u(n + 1, 0.0), v(k + 1, 0.0), minv(k + 1);
  std::vector<std::size_t> match(k + 1, 0), way(k + 1, 0);
  std::vector<char> used(k + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  for (std::size_t j = 1; j <= k; ++j) {
    if (match[j] == 0) continue;
    const std::size_t r = transposed ? j - 1 : match[j] - 1;
    const std::size_t c = transposed ? match[j] - 1 : j - 1;
    if (m.at(r, c) >= kSentinelCost) continue;
    out.pairs.emplace_back(static_cast<Index>(r), static_cast<Index>(c));
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (const auto& [r, c] : out.pairs) out.total += m.at(r, c);
  return out;
}

/// Each prediction column gets 1 to 3 distinct random rows with cost uniform in (0, 1]; all
/// other entries hold the sentinel.
inline CostMatrix synthetic_cost_matrix(std::size_t n_true, std::size_t n_pred, std::uint64_t seed) {
  if (n_true == 0 || n_pred == 0) throw ParameterError("synthetic_cost_matrix: dimensions must be positive");
  CostMatrix m(n_true, n_pred);
  for (std::size_t j = 0; j < n_pred; ++j) {
    CounterRng rng(seed, j);
    const std::size_t want = std::min<std::size_t>(n_true, 1 + rng.below(3));
    std::size_t placed = 0;
    while (placed < want) {
      const std::size_t r = rng.below(n_true);
      if (m.at(r, j) < kSentinelCost) continue;
      m.at(r, j) = rng.uniform_open_closed();
      ++placed;
    }
  }
  return m;
}

struct BenchRow {
  std::string method;
  std::size_t n_true, n_pred;
  double median_seconds;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

template <typename F>
double median_seconds(int repeats, F&& run) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    run(r);
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return median(std::move(t));
}

}  // namespace detail

struct ObjectGraph {
  NodeSignal x;
  AdjacencyGraph graph;  // weights already derived from oracle agreements
  std::vector<Index> object;
};

/// Oracle clustering input with `n_objects` objects of `nodes_per_object` superpoints each,
/// on a k-NN graph over their centroids. A fraction `agreement_noise` of edge agreements is
/// replaced by uniform draws before weighting.
inline ObjectGraph synthetic_object_graph(std::size_t n_objects, std::size_t nodes_per_object,
                                          std::size_t classes, std::uint64_t seed,
                                          double epsilon = 1e-4, std::size_t k = 6,
                                          double agreement_noise = 0.0, unsigned threads = 1) {
  if (n_objects == 0 || nodes_per_object == 0 || classes == 0)
    throw ParameterError("synthetic_object_graph: sizes must be positive");
  const std::size_t n = n_objects * nodes_per_object;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_objects))));
  CounterRng rng(seed, 0x0b1);
  ObjectGraph out;
  out.x = NodeSignal(n, classes, 3);
  out.object.resize(n);
  std::vector<Vec3> pts(n);
  for (std::size_t o = 0; o < n_objects; ++o) {
    const std::size_t cls = rng.below(classes);
    for (std::size_t i = 0; i < nodes_per_object; ++i) {
      const std::size_t p = o * nodes_per_object + i;
      out.object[p] = static_cast<Index>(o);
      out.x.cls(p)[cls] = 1.0;
      pts[p] = {2.0 * static_cast<double>(o % side) + 0.3 * rng.normal(),
                2.0 * static_cast<double>(o / side) + 0.3 * rng.normal(), 0.3 * rng.normal()};
      for (int a = 0; a < 3; ++a) out.x.pos(p)[a] = pts[p][a];
    }
  }
  out.graph = build_knn_graph(pts, std::min(k, n - 1), threads);
  for (std::size_t e = 0; e < out.graph.edge_count(); ++e) {
    double a = out.object[out.graph.source[e]] == out.object[out.graph.target[e]] ? 1.0 : 0.0;
    if (agreement_noise > 0.0) {
      CounterRng edge_rng(seed, hash_combine(0x0e, e));
      if (edge_rng.uniform() < agreement_noise) a = edge_rng.uniform();
    }
    out.graph.weight[e] = a / (1.0 - a + epsilon);
  }
  return out;
}

/// Median wall time of the assignment solver per size, each paired with the clustering
/// solver on an object graph with n_true objects.
inline std::vector<BenchRow> bench_matching(const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                                            int repeats, std::uint64_t seed, bool with_clustering = true) {
  if (repeats < 1) throw ParameterError("bench_matching: repeats must be positive");
  std::vector<BenchRow> rows;
  for (const auto& [n_true, n_pred] : sizes) {
    const CostMatrix m = synthetic_cost_matrix(n_true, n_pred, seed);
    const double t = detail::median_seconds(repeats, [&](int) { (void)hungarian_assign(m); });
    rows.push_back({"hungarian", n_true, n_pred, t});
    if (!with_clustering) continue;
    const ObjectGraph og = synthetic_object_graph(n_true, 8, 4, seed);
    ClusteringParams params;
    params.seed = seed;
    params.threads = 1;
    const double tc = detail::median_seconds(repeats, [&](int) { (void)solve_gmp(og.x, og.graph, params); });
    rows.push_back({"gmp", n_true, n_pred, tc});
  }
  return rows;
}

}  // namespace supercut
