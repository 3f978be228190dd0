#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/cutpursuit.hpp"
#include "supercut/graphs.hpp"
#include "supercut/parallel.hpp"

namespace supercut {

/// Agreement value used for pairs that involve unlabeled points or superpoints.
inline constexpr double kIgnoredAgreement = std::numeric_limits<double>::quiet_NaN();

inline bool agreement_ignored(double a) { return std::isnan(a); }

/// Point to superpoint map with member lists, centroids and majority labels.
struct SuperpointPartition {
  std::vector<Index> point_to_superpoint;
  std::vector<std::size_t> member_offset;
  std::vector<Index> member_points;
  std::vector<Vec3> centroid;          // filled by set_centroids
  std::vector<Label> majority_object;  // filled by majority_labels
  std::vector<Label> majority_class;   // mode of member classes
  std::vector<Label> object_class;     // class carried by the majority object

  std::size_t count() const { return member_offset.empty() ? 0 : member_offset.size() - 1; }
  std::size_t point_count() const { return point_to_superpoint.size(); }
  std::size_t size(std::size_t s) const { return member_offset[s + 1] - member_offset[s]; }
  std::span<const Index> members(std::size_t s) const {
    return {member_points.data() + member_offset[s], size(s)};
  }

  static SuperpointPartition from_assignment(std::vector<Index> assignment, std::size_t count) {
    SuperpointPartition sp;
    sp.member_offset.assign(count + 1, 0);
    for (Index s : assignment) {
      if (s >= count) throw StructuralError("superpoints: superpoint id out of range");
      ++sp.member_offset[s + 1];
    }
    for (std::size_t s = 0; s < count; ++s) {
      if (sp.member_offset[s + 1] == 0) throw StructuralError("superpoints: empty superpoint");
      sp.member_offset[s + 1] += sp.member_offset[s];
    }
    sp.member_points.resize(assignment.size());
    std::vector<std::size_t> cursor(sp.member_offset.begin(), sp.member_offset.end() - 1);
    for (std::size_t p = 0; p < assignment.size(); ++p)
      sp.member_points[cursor[assignment[p]]++] = static_cast<Index>(p);
    sp.point_to_superpoint = std::move(assignment);
    return sp;
  }

  static SuperpointPartition identity(std::size_t n) {
    std::vector<Index> a(n);
    std::iota(a.begin(), a.end(), Index{0});
    return from_assignment(std::move(a), n);
  }
};

/// Default per-point features: position over the bounding-box diagonal and RGB / 255, each
/// channel standardized. Returns a row-major n x dim buffer; dim is 6 with colors, else 3.
inline std::vector<double> default_superpoint_features(const PointCloud& cloud, std::size_t* dim) {
  cloud.check_structure();
  const std::size_t n = cloud.size();
  const std::size_t d = cloud.has_colors() ? 6 : 3;
  if (dim) *dim = d;
  Vec3 lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& p : cloud.positions)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  double diameter = 0.0;
  for (int a = 0; a < 3; ++a) diameter += n ? (hi[a] - lo[a]) * (hi[a] - lo[a]) : 0.0;
  diameter = std::sqrt(diameter);
  if (!(diameter > 0.0)) diameter = 1.0;

  std::vector<double> f(n * d);
  for (std::size_t p = 0; p < n; ++p) {
    for (int a = 0; a < 3; ++a) f[p * d + a] = cloud.positions[p][a] / diameter;
    if (d == 6)
      for (int a = 0; a < 3; ++a) f[p * d + 3 + a] = cloud.colors[p][a] / 255.0;
  }
  for (std::size_t c = 0; c < d && n > 0; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t p = 0; p < n; ++p) mean += f[p * d + c];
    mean /= static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) var += (f[p * d + c] - mean) * (f[p * d + c] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t p = 0; p < n; ++p) f[p * d + c] = sd > 0.0 ? (f[p * d + c] - mean) / sd : 0.0;
  }
  return f;
}

/// Oversegmentation as the constant components of a quadratic-fidelity cut-pursuit solve with
/// unit edge weights; larger regularization gives fewer, larger superpoints.
inline SuperpointPartition compute_superpoints(std::span<const double> features, std::size_t dim,
                                               const AdjacencyGraph& point_graph,
                                               double regularization, unsigned threads = 0,
                                               std::uint64_t seed = 0) {
  if (point_graph.node_count == 0) throw ParameterError("compute_superpoints: empty cloud");
  if (!(regularization > 0.0) || !std::isfinite(regularization))
    throw ParameterError("compute_superpoints: regularization must be positive");
  if (dim == 0 || features.size() != point_graph.node_count * dim)
    throw StructuralError("compute_superpoints: feature buffer does not match graph size");
  NodeSignal x(point_graph.node_count, 0, dim);
  std::copy(features.begin(), features.end(), x.position.begin());
  AdjacencyGraph unit = point_graph;
  std::fill(unit.weight.begin(), unit.weight.end(), 1.0);
  unit.agreement.clear();
  ClusteringParams params;
  params.lambda = regularization;
  params.eta = 1.0;
  params.seed = seed;
  params.threads = threads;
  Partition part = solve_gmp(x, unit, params);
  const std::size_t count = part.component_count();
  return SuperpointPartition::from_assignment(std::move(part.assignment), count);
}

struct SuperpointTuning {
  double regularization = 0.0;
  double ratio = 0.0;  // superpoints per point
  SuperpointPartition partition;
};

/// Log-space bisection on the regularization until |S| / |P| is near `target_ratio`.
/// Returns the closest partition seen.
inline SuperpointTuning tune_superpoint_regularization(std::span<const double> features, std::size_t dim,
                                                       const AdjacencyGraph& point_graph,
                                                       double target_ratio = 1.0 / 30.0,
                                                       int max_steps = 12, unsigned threads = 0,
                                                       std::uint64_t seed = 0) {
  if (!(target_ratio > 0.0 && target_ratio <= 1.0))
    throw ParameterError("tune_superpoint_regularization: target ratio must be in (0, 1]");
  const double n = static_cast<double>(point_graph.node_count);
  double lo = std::log(1e-4), hi = std::log(1e4);
  SuperpointTuning best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int step = 0; step < max_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double reg = std::exp(mid);
    auto sp = compute_superpoints(features, dim, point_graph, reg, threads, seed);
    const double ratio = static_cast<double>(sp.count()) / n;
    const double gap = std::abs(std::log(ratio / target_ratio));
    if (gap < best_gap) {
      best_gap = gap;
      best = {reg, ratio, std::move(sp)};
    }
    if (gap < std::log(1.1)) break;
    (ratio > target_ratio ? lo : hi) = mid;
  }
  return best;
}

inline void set_centroids(SuperpointPartition& sp, std::span<const Vec3> positions) {
  if (positions.size() != sp.point_count())
    throw StructuralError("superpoints: position count differs from partition size");
  sp.centroid.assign(sp.count(), Vec3{0, 0, 0});
  for (std::size_t s = 0; s < sp.count(); ++s) {
    for (Index p : sp.members(s))
      for (int a = 0; a < 3; ++a) sp.centroid[s][a] += positions[p][a];
    for (int a = 0; a < 3; ++a) sp.centroid[s][a] /= static_cast<double>(sp.size(s));
  }
}

namespace detail {

// Most frequent non-IGNORE value, smallest value on ties; IGNORE when none.
inline Label mode_of(std::vector<Label>& values) {
  std::sort(values.begin(), values.end());
  Label best = IGNORE;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    if (values[i] != IGNORE && j - i > best_count) {
      best = values[i];
      best_count = j - i;
    }
    i = j;
  }
  return best;
}

}  // namespace detail

/// Majority object and class per superpoint; ties go to the smallest id.
inline void majority_labels(SuperpointPartition& sp, const PointCloud& cloud) {
  cloud.check_structure();
  if (!cloud.labeled()) throw StructuralError("majority_labels: cloud has no labels");
  if (cloud.size() != sp.point_count())
    throw StructuralError("majority_labels: cloud size differs from partition size");
  const std::size_t count = sp.count();
  sp.majority_object.assign(count, IGNORE);
  sp.majority_class.assign(count, IGNORE);
  sp.object_class.assign(count, IGNORE);
  std::vector<Label> buf;
  for (std::size_t s = 0; s < count; ++s) {
    buf.clear();
    for (Index p : sp.members(s)) buf.push_back(cloud.object[p]);
    const Label obj = detail::mode_of(buf);
    buf.clear();
    for (Index p : sp.members(s)) buf.push_back(cloud.semantic[p]);
    sp.majority_class[s] = detail::mode_of(buf);
    sp.majority_object[s] = obj;
    if (obj == IGNORE) continue;
    buf.clear();
    for (Index p : sp.members(s))
      if (cloud.object[p] == obj) buf.push_back(cloud.semantic[p]);
    sp.object_class[s] = detail::mode_of(buf);
  }
}

/// Mean of the two overlap ratios |s ∩ obj(t)| / |s| and |t ∩ obj(s)| / |t|.
inline double true_agreement(Index s, Index t, const SuperpointPartition& sp, const PointCloud& cloud) {
  const Label os = sp.majority_object.at(s), ot = sp.majority_object.at(t);
  if (os == IGNORE || ot == IGNORE) return kIgnoredAgreement;
  std::size_t s_in_t = 0, t_in_s = 0;
  for (Index p : sp.members(s)) s_in_t += cloud.object[p] == ot;
  for (Index p : sp.members(t)) t_in_s += cloud.object[p] == os;
  return 0.5 * (static_cast<double>(s_in_t) / static_cast<double>(sp.size(s)) +
                static_cast<double>(t_in_s) / static_cast<double>(sp.size(t)));
}

inline std::vector<double> superpoint_agreements(const SuperpointPartition& sp, const AdjacencyGraph& g,
                                                 const PointCloud& cloud, unsigned threads = 0) {
  if (g.node_count != sp.count())
    throw StructuralError("superpoint_agreements: graph does not match the partition");
  std::vector<double> a(g.edge_count());
  parallel_for(g.edge_count(), threads,
               [&](std::size_t e) { a[e] = true_agreement(g.source[e], g.target[e], sp, cloud); }, 256);
  return a;
}

inline double pointwise_agreement(Index p, Index q, const PointCloud& cloud) {
  const Label a = cloud.object.at(p), b = cloud.object.at(q);
  if (a == IGNORE || b == IGNORE) return kIgnoredAgreement;
  return a == b ? 1.0 : 0.0;
}

/// Copies each superpoint's labels onto its points.
inline PanopticLabels propagate_to_points(const SuperpointPartition& sp, const PanopticLabels& labels) {
  if (labels.semantic.size() != sp.count() || labels.object.size() != sp.count())
    throw StructuralError("propagate_to_points: labels do not cover every superpoint");
  PanopticLabels out;
  out.semantic.resize(sp.point_count());
  out.object.resize(sp.point_count());
  for (std::size_t p = 0; p < sp.point_count(); ++p) {
    out.semantic[p] = labels.semantic[sp.point_to_superpoint[p]];
    out.object[p] = labels.object[sp.point_to_superpoint[p]];
  }
  return out;
}

/// Superpoint-level labels from majority objects: the majority object and its class.
inline PanopticLabels majority_panoptic_labels(const SuperpointPartition& sp) {
  return {sp.object_class, sp.majority_object};
}

}  // namespace supercut
