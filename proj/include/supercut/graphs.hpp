#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/parallel.hpp"

namespace supercut {

/// Undirected weighted graph stored as a canonical edge list: u < v, sorted by (u, v).
struct AdjacencyGraph {
  std::size_t node_count = 0;
  std::vector<Index> source;
  std::vector<Index> target;
  std::vector<double> weight;
  std::vector<double> agreement;      // empty when absent
  std::vector<std::uint32_t> crossing;  // point edges behind each superpoint edge; may be empty

  std::size_t edge_count() const { return source.size(); }
  bool has_agreement() const { return !agreement.empty(); }

  void add_edge(Index u, Index v, double w = 1.0) {
    source.push_back(std::min(u, v));
    target.push_back(std::max(u, v));
    weight.push_back(w);
  }

  void validate() const {
    const auto m = source.size();
    if (target.size() != m || weight.size() != m)
      throw StructuralError("graph: edge arrays differ in length");
    if (!agreement.empty() && agreement.size() != m)
      throw StructuralError("graph: agreement array length differs from edge count");
    if (!crossing.empty() && crossing.size() != m)
      throw StructuralError("graph: crossing-count array length differs from edge count");
    for (std::size_t e = 0; e < m; ++e) {
      if (source[e] >= node_count || target[e] >= node_count)
        throw StructuralError("graph: edge " + std::to_string(e) + " endpoint out of range");
      if (source[e] >= target[e])
        throw StructuralError("graph: edge " + std::to_string(e) + " is a self-loop or not u < v");
      if (e > 0 && std::pair(source[e - 1], target[e - 1]) >= std::pair(source[e], target[e]))
        throw StructuralError("graph: edges are not sorted or contain duplicates");
      if (!std::isfinite(weight[e]) || weight[e] < 0.0)
        throw StructuralError("graph: edge " + std::to_string(e) + " has invalid weight");
      if (!agreement.empty() && !(agreement[e] >= 0.0 && agreement[e] <= 1.0))
        throw StructuralError("graph: edge " + std::to_string(e) + " agreement outside [0,1]");
    }
  }

  /// Sorts edges into canonical order and merges duplicates (weights summed, agreement and
  /// crossing of the first occurrence kept).
  void canonicalize() {
    const auto m = source.size();
    for (std::size_t e = 0; e < m; ++e)
      if (source[e] > target[e]) std::swap(source[e], target[e]);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::pair(source[a], target[a]) < std::pair(source[b], target[b]);
    });
    AdjacencyGraph out;
    out.node_count = node_count;
    for (std::size_t i : order) {
      if (source[i] == target[i]) continue;
      if (!out.source.empty() && out.source.back() == source[i] && out.target.back() == target[i]) {
        out.weight.back() += weight[i];
        if (!crossing.empty()) out.crossing.back() += crossing[i];
        continue;
      }
      out.source.push_back(source[i]);
      out.target.push_back(target[i]);
      out.weight.push_back(weight[i]);
      if (!agreement.empty()) out.agreement.push_back(agreement[i]);
      if (!crossing.empty()) out.crossing.push_back(crossing[i]);
    }
    *this = std::move(out);
  }
};

/// Compressed adjacency over an AdjacencyGraph: neighbors of node i are
/// neighbor[offset[i] .. offset[i+1]) and edge_id names the undirected edge.
struct Csr {
  std::vector<std::size_t> offset;
  std::vector<Index> neighbor;
  std::vector<std::uint32_t> edge_id;

  explicit Csr(const AdjacencyGraph& g) : offset(g.node_count + 1, 0) {
    const auto m = g.edge_count();
    for (std::size_t e = 0; e < m; ++e) {
      ++offset[g.source[e] + 1];
      ++offset[g.target[e] + 1];
    }
    std::partial_sum(offset.begin(), offset.end(), offset.begin());
    neighbor.resize(2 * m);
    edge_id.resize(2 * m);
    std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
    for (std::size_t e = 0; e < m; ++e) {
      const Index u = g.source[e], v = g.target[e];
      neighbor[cursor[u]] = v;
      edge_id[cursor[u]++] = static_cast<std::uint32_t>(e);
      neighbor[cursor[v]] = u;
      edge_id[cursor[v]++] = static_cast<std::uint32_t>(e);
    }
  }

  std::size_t degree(Index i) const { return offset[i + 1] - offset[i]; }
};

/// Exact k-d tree over 3D points. Neighbors are ordered by (squared distance, index).
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 12)
      : points_(points), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), Index{0});
    if (!points.empty()) {
      nodes_.reserve(2 * points.size() / leaf_size_ + 2);
      build(0, points.size());
    }
  }

  /// The k nearest points to `query`, excluding index `skip` (pass IGNORE to keep all).
  std::vector<Index> nearest(const Vec3& query, std::size_t k, Index skip = IGNORE) const {
    std::vector<Candidate> heap;
    heap.reserve(k + 1);
    if (k > 0 && !nodes_.empty()) search(0, query, k, skip, heap);
    std::sort_heap(heap.begin(), heap.end());
    std::vector<Index> out(heap.size());
    for (std::size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].index;
    return out;
  }

 private:
  struct Node {
    std::size_t begin, end;
    int axis;  // -1 for leaves
    double split;
    std::size_t left, right;
  };
  struct Candidate {
    double dist2;
    Index index;
    bool operator<(const Candidate& o) const {
      return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
    }
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end, -1, 0.0, 0, 0});
    if (end - begin <= leaf_size_) return id;
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i)
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], points_[order_[i]][d]);
        hi[d] = std::max(hi[d], points_[order_[i]][d]);
      }
    int axis = 0;
    for (int d = 1; d < 3; ++d)
      if (hi[d] - lo[d] > hi[axis] - lo[axis]) axis = d;
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) {
                       return points_[a][axis] < points_[b][axis] ||
                              (points_[a][axis] == points_[b][axis] && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const Vec3& q, std::size_t k, Index skip,
              std::vector<Candidate>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const Index j = order_[i];
        if (j == skip) continue;
        const auto& p = points_[j];
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        const Candidate c{dx * dx + dy * dy + dz * dz, j};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, k, skip, heap);
    // Strict comparison: an equally distant point with a lower index may sit across the plane.
    if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, skip, heap);
  }

  std::span<const Vec3> points_;
  std::size_t leaf_size_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// Symmetrized k-nearest-neighbor graph with unit weights. An edge exists when either
/// endpoint selected the other. The result does not depend on `threads`.
inline AdjacencyGraph build_knn_graph(std::span<const Vec3> positions, std::size_t k,
                                      unsigned threads = 0) {
  const std::size_t n = positions.size();
  if (n < 2) throw ParameterError("build_knn_graph: need at least 2 points");
  if (k < 1 || k >= n)
    throw ParameterError("build_knn_graph: k must satisfy 1 <= k < number of points");
  if (n > std::numeric_limits<Index>::max() - 1)
    throw ParameterError("build_knn_graph: too many points");

  const KdTree tree(positions);
  std::vector<std::uint64_t> keys(n * k);
  parallel_for(
      n, threads,
      [&](std::size_t i) {
        const auto nn = tree.nearest(positions[i], k, static_cast<Index>(i));
        for (std::size_t j = 0; j < k; ++j) {
          const std::uint64_t a = std::min<std::uint64_t>(i, nn[j]);
          const std::uint64_t b = std::max<std::uint64_t>(i, nn[j]);
          keys[i * k + j] = (a << 32) | b;
        }
      },
      256);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  AdjacencyGraph g;
  g.node_count = n;
  g.source.resize(keys.size());
  g.target.resize(keys.size());
  g.weight.assign(keys.size(), 1.0);
  for (std::size_t e = 0; e < keys.size(); ++e) {
    g.source[e] = static_cast<Index>(keys[e] >> 32);
    g.target[e] = static_cast<Index>(keys[e] & 0xffffffffULL);
  }
  return g;
}

/// Graph over groups: groups s != t are adjacent iff some point edge joins them. Each edge
/// records in `crossing` how many point edges cross it; weights are set to that count.
inline AdjacencyGraph superpoint_adjacency(std::span<const Index> point_to_group,
                                           std::size_t group_count,
                                           const AdjacencyGraph& point_graph) {
  if (point_to_group.size() != point_graph.node_count)
    throw StructuralError("superpoint_adjacency: assignment covers " +
                          std::to_string(point_to_group.size()) + " points but graph has " +
                          std::to_string(point_graph.node_count));
  std::vector<std::uint64_t> keys;
  keys.reserve(point_graph.edge_count() / 4);
  for (std::size_t e = 0; e < point_graph.edge_count(); ++e) {
    const std::uint64_t a = point_to_group[point_graph.source[e]];
    const std::uint64_t b = point_to_group[point_graph.target[e]];
    if (a >= group_count || b >= group_count)
      throw StructuralError("superpoint_adjacency: point assigned to unknown superpoint");
    if (a == b) continue;
    keys.push_back((std::min(a, b) << 32) | std::max(a, b));
  }
  std::sort(keys.begin(), keys.end());
  AdjacencyGraph g;
  g.node_count = group_count;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    g.source.push_back(static_cast<Index>(keys[i] >> 32));
    g.target.push_back(static_cast<Index>(keys[i] & 0xffffffffULL));
    g.crossing.push_back(static_cast<std::uint32_t>(j - i));
    g.weight.push_back(static_cast<double>(j - i));
    i = j;
  }
  return g;
}

/// Connected components restricted to edges accepted by `keep(edge)`. Component ids are
/// numbered in order of their smallest node.
template <typename KeepEdge>
std::vector<Index> connected_components(const AdjacencyGraph& g, const Csr& csr, KeepEdge&& keep,
                                        std::size_t* count = nullptr) {
  std::vector<Index> comp(g.node_count, IGNORE);
  std::vector<Index> stack;
  Index next = 0;
  for (std::size_t s = 0; s < g.node_count; ++s) {
    if (comp[s] != IGNORE) continue;
    comp[s] = next;
    stack.push_back(static_cast<Index>(s));
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      for (std::size_t a = csr.offset[u]; a < csr.offset[u + 1]; ++a) {
        const Index v = csr.neighbor[a];
        if (comp[v] == IGNORE && keep(csr.edge_id[a])) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

}  // namespace supercut
