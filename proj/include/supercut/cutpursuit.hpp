#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/graphs.hpp"
#include "supercut/maxflow.hpp"
#include "supercut/parallel.hpp"
#include "supercut/rng.hpp"

namespace supercut {

/// Lower clamp applied to class probabilities inside logarithms.
inline constexpr double kLogClamp = 1e-12;

inline double clamped_log(double p) { return std::log(std::max(p, kLogClamp)); }

/// Value of one constant component: a class distribution and a position (or feature) vector.
struct ComponentValue {
  std::vector<double> cls;
  std::vector<double> pos;
};

/// Cross-entropy of the component distribution against the node distribution plus the
/// weighted squared distance between positions: -sum_c x_c log y_c + eta |x - y|^2.
inline double dissimilarity(const double* x_cls, const double* x_pos, const double* y_cls,
                            const double* y_pos, std::size_t num_classes, std::size_t dim,
                            double eta) {
  double ce = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c)
    if (x_cls[c] != 0.0) ce -= x_cls[c] * clamped_log(y_cls[c]);
  double sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = x_pos[d] - y_pos[d];
    sq += diff * diff;
  }
  return ce + eta * sq;
}

inline double dissimilarity(const NodeSignal& x, std::size_t node, const ComponentValue& y,
                            double eta) {
  return dissimilarity(x.cls(node), x.pos(node), y.cls.data(), y.pos.data(), x.num_classes,
                       x.dim, eta);
}

/// Minimizer of the summed dissimilarity over a member set: the mean class distribution and
/// the centroid.
inline ComponentValue optimal_component_value(std::span<const Index> members, const NodeSignal& x) {
  if (members.empty()) throw ParameterError("optimal_component_value: empty member set");
  ComponentValue y{std::vector<double>(x.num_classes, 0.0), std::vector<double>(x.dim, 0.0)};
  for (Index p : members) {
    for (std::size_t c = 0; c < x.num_classes; ++c) y.cls[c] += x.cls(p)[c];
    for (std::size_t d = 0; d < x.dim; ++d) y.pos[d] += x.pos(p)[d];
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  for (double& v : y.cls) v *= inv;
  for (double& v : y.pos) v *= inv;
  return y;
}

/// Piecewise-constant approximation of a node signal.
struct Partition {
  std::vector<Index> assignment;       // node -> component
  std::vector<std::size_t> member_offset;  // component k owns member_nodes[offset[k]..offset[k+1])
  std::vector<Index> member_nodes;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<double> value_cls;  // components x num_classes
  std::vector<double> value_pos;  // components x dim
  double energy = 0.0;
  std::vector<double> energy_history;  // initial state, then one entry per outer iteration

  std::size_t component_count() const {
    return member_offset.empty() ? 0 : member_offset.size() - 1;
  }
  std::span<const Index> members(std::size_t k) const {
    return {member_nodes.data() + member_offset[k], member_offset[k + 1] - member_offset[k]};
  }
  const double* cls(std::size_t k) const { return value_cls.data() + k * num_classes; }
  const double* pos(std::size_t k) const { return value_pos.data() + k * dim; }
  ComponentValue value(std::size_t k) const {
    return {{cls(k), cls(k) + num_classes}, {pos(k), pos(k) + dim}};
  }

  /// Builds member lists and optimal values for an assignment with ids in [0, count).
  static Partition from_assignment(std::vector<Index> assignment, std::size_t count,
                                   const NodeSignal& x) {
    Partition part;
    part.assignment = std::move(assignment);
    part.num_classes = x.num_classes;
    part.dim = x.dim;
    part.member_offset.assign(count + 1, 0);
    for (Index k : part.assignment) {
      if (k >= count) throw StructuralError("partition: component id out of range");
      ++part.member_offset[k + 1];
    }
    std::partial_sum(part.member_offset.begin(), part.member_offset.end(),
                     part.member_offset.begin());
    part.member_nodes.resize(part.assignment.size());
    std::vector<std::size_t> cursor(part.member_offset.begin(), part.member_offset.end() - 1);
    for (std::size_t p = 0; p < part.assignment.size(); ++p)
      part.member_nodes[cursor[part.assignment[p]]++] = static_cast<Index>(p);
    part.refit(x);
    return part;
  }

  void refit(const NodeSignal& x) {
    const std::size_t k_count = component_count();
    value_cls.assign(k_count * num_classes, 0.0);
    value_pos.assign(k_count * dim, 0.0);
    for (std::size_t p = 0; p < assignment.size(); ++p) {
      const Index k = assignment[p];
      for (std::size_t c = 0; c < num_classes; ++c) value_cls[k * num_classes + c] += x.cls(p)[c];
      for (std::size_t d = 0; d < dim; ++d) value_pos[k * dim + d] += x.pos(p)[d];
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      const std::size_t size = member_offset[k + 1] - member_offset[k];
      if (size == 0) throw StructuralError("partition: empty component");
      const double inv = 1.0 / static_cast<double>(size);
      for (std::size_t c = 0; c < num_classes; ++c) value_cls[k * num_classes + c] *= inv;
      for (std::size_t d = 0; d < dim; ++d) value_pos[k * dim + d] *= inv;
    }
  }
};

struct EnergyTerms {
  double fidelity = 0.0;
  double cut = 0.0;  // already multiplied by lambda
  double total() const { return fidelity + cut; }
};

/// Fidelity plus lambda-weighted cut of a partition with its stored component values.
inline EnergyTerms energy_terms(const Partition& part, const NodeSignal& x, const AdjacencyGraph& g,
                                const ClusteringParams& params) {
  if (part.assignment.size() != g.node_count || x.num_nodes != g.node_count)
    throw StructuralError("energy: partition, signal and graph sizes differ");
  EnergyTerms terms;
  // Per-component log values so each node costs C multiply-adds.
  std::vector<double> log_value(part.value_cls.size());
  for (std::size_t i = 0; i < log_value.size(); ++i) log_value[i] = clamped_log(part.value_cls[i]);
  for (std::size_t p = 0; p < g.node_count; ++p) {
    const Index k = part.assignment[p];
    double ce = 0.0;
    const double* xc = x.cls(p);
    const double* lv = log_value.data() + k * part.num_classes;
    for (std::size_t c = 0; c < x.num_classes; ++c)
      if (xc[c] != 0.0) ce -= xc[c] * lv[c];
    double sq = 0.0;
    const double* xp = x.pos(p);
    const double* yp = part.pos(k);
    for (std::size_t d = 0; d < x.dim; ++d) {
      const double diff = xp[d] - yp[d];
      sq += diff * diff;
    }
    terms.fidelity += ce + params.eta * sq;
  }
  double cut = 0.0;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (part.assignment[g.source[e]] != part.assignment[g.target[e]]) cut += g.weight[e];
  terms.cut = params.lambda * cut;
  return terms;
}

inline double energy(const Partition& part, const NodeSignal& x, const AdjacencyGraph& g,
                     const ClusteringParams& params) {
  return energy_terms(part, x, g, params).total();
}

/// Edge of a component-local subgraph; endpoints index into the member list.
struct LocalEdge {
  Index u, v;
  double weight;
};

/// Exact minimizer over binary labelings b of
///   sum_p d(x_p, y_{b(p)}) + lambda * sum_{(p,q)} w_pq [b(p) != b(q)]
/// via s-t min-cut. Nodes that can take either label at equal cost take label 0.
inline std::vector<std::uint8_t> binary_split(std::span<const Index> members,
                                              std::span<const LocalEdge> edges,
                                              const ComponentValue& y0, const ComponentValue& y1,
                                              const NodeSignal& x, double lambda, double eta) {
  const int n = static_cast<int>(members.size());
  MaxFlow flow(n, edges.size());
  for (int i = 0; i < n; ++i) {
    const Index p = members[i];
    const double d0 = dissimilarity(x, p, y0, eta);
    const double d1 = dissimilarity(x, p, y1, eta);
    // Source side is label 0 and pays d0 through its sink link.
    const double base = std::min(d0, d1);
    flow.add_terminal(i, d1 - base, d0 - base);
  }
  for (const auto& e : edges) {
    const double c = lambda * e.weight;
    if (c > 0.0) flow.add_edge(static_cast<int>(e.u), static_cast<int>(e.v), c, c);
  }
  flow.solve();
  std::vector<std::uint8_t> label(n);
  for (int i = 0; i < n; ++i) label[i] = flow.sink_side(i) ? 1 : 0;
  return label;
}

namespace detail {

// Sufficient statistics of a component; fidelity and merge costs follow in closed form.
struct ComponentStats {
  double count = 0.0;
  std::vector<double> class_sum;
  std::vector<double> mean;
  double m2 = 0.0;  // sum of squared deviations from the mean

  double fidelity(double eta) const {
    double ce = 0.0;
    for (double s : class_sum)
      if (s != 0.0) ce -= s * clamped_log(s / count);
    return ce + eta * m2;
  }

  void absorb(const ComponentStats& o) {
    const double n = count + o.count;
    double gap2 = 0.0;
    for (std::size_t d = 0; d < mean.size(); ++d) {
      const double diff = o.mean[d] - mean[d];
      gap2 += diff * diff;
      mean[d] += diff * (o.count / n);
    }
    m2 += o.m2 + gap2 * count * o.count / n;
    for (std::size_t c = 0; c < class_sum.size(); ++c) class_sum[c] += o.class_sum[c];
    count = n;
  }
};

inline ComponentStats stats_of(std::span<const Index> members, const NodeSignal& x) {
  ComponentStats s;
  s.count = static_cast<double>(members.size());
  s.class_sum.assign(x.num_classes, 0.0);
  s.mean.assign(x.dim, 0.0);
  for (Index p : members) {
    for (std::size_t c = 0; c < x.num_classes; ++c) s.class_sum[c] += x.cls(p)[c];
    for (std::size_t d = 0; d < x.dim; ++d) s.mean[d] += x.pos(p)[d];
  }
  for (double& m : s.mean) m /= s.count;
  for (Index p : members)
    for (std::size_t d = 0; d < x.dim; ++d) {
      const double diff = x.pos(p)[d] - s.mean[d];
      s.m2 += diff * diff;
    }
  return s;
}

inline double direct_fidelity(std::span<const Index> members, const NodeSignal& x,
                              const ComponentValue& y, double eta) {
  double f = 0.0;
  for (Index p : members) f += dissimilarity(x, p, y, eta);
  return f;
}

// Excess of d over its minimum, used as the 2-means++ sampling weight.
inline double excess(const NodeSignal& x, Index p, const ComponentValue& y, double eta) {
  double kl = 0.0;
  for (std::size_t c = 0; c < x.num_classes; ++c) {
    const double xc = x.cls(p)[c];
    if (xc > 0.0) kl += xc * (std::log(xc) - clamped_log(y.cls[c]));
  }
  double sq = 0.0;
  for (std::size_t d = 0; d < x.dim; ++d) {
    const double diff = x.pos(p)[d] - y.pos[d];
    sq += diff * diff;
  }
  return std::max(0.0, kl) + eta * sq;
}

inline ComponentValue node_value(const NodeSignal& x, Index p) {
  return {{x.cls(p), x.cls(p) + x.num_classes}, {x.pos(p), x.pos(p) + x.dim}};
}

struct SplitOutcome {
  bool accepted = false;
  std::vector<Index> piece;  // per member, piece id in [0, piece_count)
  Index piece_count = 0;
};

// Tries to split one component. Accepts only when the refit pieces plus their internal cut
// lower the component's energy.
inline SplitOutcome split_component(std::span<const Index> members, std::span<const LocalEdge> edges,
                                    const NodeSignal& x, const ClusteringParams& params,
                                    std::uint64_t stream) {
  SplitOutcome out;
  const std::size_t n = members.size();
  if (n < 2) return out;
  const double eta = params.eta;
  CounterRng rng(params.seed, stream);

  // 2-means++ seeding under d.
  ComponentValue y0 = node_value(x, members[rng.below(n)]);
  std::vector<double> weight(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (weight[i] = excess(x, members[i], y0, eta));
  if (!(total > 0.0)) return out;
  double target = rng.uniform() * total;
  std::size_t pick = n - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (weight[i] > 0.0 && target < weight[i]) {
      pick = i;
      break;
    }
    target -= weight[i];
  }
  while (weight[pick] == 0.0) --pick;
  ComponentValue y1 = node_value(x, members[pick]);

  std::vector<std::uint8_t> label;
  std::vector<Index> side[2];
  for (int it = 0; it < params.split_iterations; ++it) {
    label = binary_split(members, edges, y0, y1, x, params.lambda, eta);
    side[0].clear();
    side[1].clear();
    for (std::size_t i = 0; i < n; ++i) side[label[i]].push_back(members[i]);
    if (side[0].empty() || side[1].empty()) return out;
    y0 = optimal_component_value(side[0], x);
    y1 = optimal_component_value(side[1], x);
  }

  // Pieces: connected parts of each side over positive-weight edges.
  std::vector<std::vector<Index>> adj(n);
  for (const auto& e : edges)
    if (e.weight > 0.0 && label[e.u] == label[e.v]) {
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
  out.piece.assign(n, IGNORE);
  std::vector<Index> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (out.piece[s] != IGNORE) continue;
    out.piece[s] = out.piece_count;
    stack.push_back(static_cast<Index>(s));
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      for (Index v : adj[u])
        if (out.piece[v] == IGNORE) {
          out.piece[v] = out.piece_count;
          stack.push_back(v);
        }
    }
    ++out.piece_count;
  }

  std::vector<std::vector<Index>> piece_members(out.piece_count);
  for (std::size_t i = 0; i < n; ++i) piece_members[out.piece[i]].push_back(members[i]);
  double split_energy = 0.0;
  for (const auto& pm : piece_members)
    split_energy += direct_fidelity(pm, x, optimal_component_value(pm, x), eta);
  for (const auto& e : edges)
    if (out.piece[e.u] != out.piece[e.v]) split_energy += params.lambda * e.weight;
  const double current = direct_fidelity(members, x, optimal_component_value(members, x), eta);
  out.accepted = current - split_energy > 1e-12 * (1.0 + std::abs(current));
  return out;
}

// Renumbers components by their smallest node and returns the new count.
inline std::size_t canonical_relabel(std::vector<Index>& assignment, std::vector<std::uint8_t>* flags) {
  Index max_id = 0;
  for (Index k : assignment) max_id = std::max(max_id, k);
  std::vector<Index> table(static_cast<std::size_t>(max_id) + 1, IGNORE);
  std::vector<std::uint8_t> new_flags;
  Index next = 0;
  for (Index& k : assignment) {
    if (table[k] == IGNORE) {
      table[k] = next++;
      if (flags) new_flags.push_back((*flags)[k]);
    }
    k = table[k];
  }
  if (flags) *flags = std::move(new_flags);
  return next;
}

}  // namespace detail

struct SolveReport {
  int outer_iterations = 0;
  std::vector<std::size_t> component_counts;
  bool fell_back_to_singletons = false;
};

/// Generalized minimal partition by l0 cut pursuit: alternating parallel binary splits of
/// components (min-cut against two refit candidates) and a sequential greedy merge pass.
/// Energy never increases between outer iterations and the result does not depend on the
/// worker count.
inline Partition solve_gmp(const NodeSignal& x, const AdjacencyGraph& g, const ClusteringParams& params,
                           SolveReport* report = nullptr) {
  params.validate();
  if (g.node_count == 0) throw ParameterError("solve_gmp: empty graph");
  if (x.num_nodes != g.node_count)
    throw StructuralError("solve_gmp: signal has " + std::to_string(x.num_nodes) +
                          " nodes but graph has " + std::to_string(g.node_count));
  if (g.weight.size() != g.edge_count())
    throw StructuralError("solve_gmp: graph weight array has wrong length");
  x.validate();

  const std::size_t n = g.node_count;
  const Csr csr(g);
  const double lambda = params.lambda;
  auto positive = [&](std::uint32_t e) { return lambda * g.weight[e] > 0.0; };

  std::size_t count = 0;
  std::vector<Index> assignment = connected_components(g, csr, positive, &count);
  std::vector<std::uint8_t> saturated(count, 0);
  Partition part = Partition::from_assignment(assignment, count, x);
  part.energy = energy(part, x, g, params);
  part.energy_history.push_back(part.energy);
  SolveReport local_report;
  local_report.component_counts.push_back(count);

  std::vector<Index> local_index(n, IGNORE);
  for (int outer = 0; outer < params.max_outer_iterations; ++outer) {
    const std::size_t k_count = part.component_count();

    // Split phase: components are independent.
    std::vector<detail::SplitOutcome> outcomes(k_count);
    parallel_for(k_count, params.threads, [&](std::size_t k) {
      if (saturated[k]) return;
      const auto members = part.members(k);
      if (members.size() < 2) {
        saturated[k] = 1;
        return;
      }
      for (std::size_t i = 0; i < members.size(); ++i) local_index[members[i]] = static_cast<Index>(i);
      std::vector<LocalEdge> edges;
      for (std::size_t i = 0; i < members.size(); ++i) {
        const Index u = members[i];
        for (std::size_t a = csr.offset[u]; a < csr.offset[u + 1]; ++a) {
          const Index v = csr.neighbor[a];
          if (v > u && part.assignment[v] == k)
            edges.push_back({static_cast<Index>(i), local_index[v], g.weight[csr.edge_id[a]]});
        }
      }
      const std::uint64_t stream = hash_combine(static_cast<std::uint64_t>(k),
                                                static_cast<std::uint64_t>(outer) + 1);
      outcomes[k] = detail::split_component(members, edges, x, params, stream);
      if (!outcomes[k].accepted) saturated[k] = 1;
    });

    bool changed = false;
    std::vector<Index> next_assignment(n);
    std::vector<std::uint8_t> next_saturated;
    Index next_id = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto members = part.members(k);
      if (outcomes[k].accepted) {
        changed = true;
        for (std::size_t i = 0; i < members.size(); ++i)
          next_assignment[members[i]] = next_id + outcomes[k].piece[i];
        next_id += outcomes[k].piece_count;
        next_saturated.insert(next_saturated.end(), outcomes[k].piece_count, 0);
      } else {
        for (Index p : members) next_assignment[p] = next_id;
        ++next_id;
        next_saturated.push_back(saturated[k]);
      }
    }

    // Merge phase: greedy over adjacent component pairs in ascending (min id, max id) order.
    const std::size_t split_count = next_id;
    std::vector<std::vector<Index>> members_of(split_count);
    for (std::size_t p = 0; p < n; ++p) members_of[next_assignment[p]].push_back(static_cast<Index>(p));
    std::vector<detail::ComponentStats> stats(split_count);
    parallel_for(split_count, params.threads,
                 [&](std::size_t k) { stats[k] = detail::stats_of(members_of[k], x); }, 64);
    std::vector<double> fid(split_count);
    for (std::size_t k = 0; k < split_count; ++k) fid[k] = stats[k].fidelity(params.eta);

    std::vector<std::uint64_t> pair_keys;
    std::vector<double> pair_weight;
    {
      std::vector<std::pair<std::uint64_t, double>> crossing;
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const std::uint64_t a = next_assignment[g.source[e]], b = next_assignment[g.target[e]];
        if (a == b) continue;
        crossing.emplace_back((std::min(a, b) << 32) | std::max(a, b), lambda * g.weight[e]);
      }
      std::sort(crossing.begin(), crossing.end());
      for (std::size_t i = 0; i < crossing.size();) {
        double w = 0.0;
        std::size_t j = i;
        for (; j < crossing.size() && crossing[j].first == crossing[i].first; ++j) w += crossing[j].second;
        pair_keys.push_back(crossing[i].first);
        pair_weight.push_back(w);
        i = j;
      }
    }
    std::vector<std::unordered_map<Index, double>> boundary(split_count);
    for (std::size_t i = 0; i < pair_keys.size(); ++i) {
      const Index a = static_cast<Index>(pair_keys[i] >> 32);
      const Index b = static_cast<Index>(pair_keys[i] & 0xffffffffULL);
      boundary[a][b] += pair_weight[i];
      boundary[b][a] += pair_weight[i];
    }
    std::vector<Index> root(split_count);
    std::iota(root.begin(), root.end(), Index{0});
    auto find = [&](Index a) {
      while (root[a] != a) a = root[a] = root[root[a]];
      return a;
    };
    for (bool merged_any = true; merged_any;) {
      merged_any = false;
      for (std::uint64_t key : pair_keys) {
        Index a = find(static_cast<Index>(key >> 32));
        Index b = find(static_cast<Index>(key & 0xffffffffULL));
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        const auto it = boundary[a].find(b);
        const double w = it == boundary[a].end() ? 0.0 : it->second;
        detail::ComponentStats joined = stats[a];
        joined.absorb(stats[b]);
        const double joined_fid = joined.fidelity(params.eta);
        const double increase = joined_fid - fid[a] - fid[b];
        const bool gain = w - increase > 1e-12 * (1.0 + std::abs(fid[a]) + std::abs(fid[b]) + w);
        if (!(gain || increase <= 0.0)) continue;
        // Fold the component with the smaller boundary into the other one.
        const Index keep = boundary[a].size() >= boundary[b].size() ? a : b;
        const Index gone = keep == a ? b : a;
        for (const auto& [nbr, wn] : boundary[gone]) {
          if (nbr == keep) continue;
          boundary[keep][nbr] += wn;
          auto& back = boundary[nbr];
          back.erase(gone);
          back[keep] += wn;
        }
        boundary[keep].erase(gone);
        boundary[gone] = {};
        stats[keep] = std::move(joined);
        stats[gone] = {};
        fid[keep] = joined_fid;
        root[gone] = keep;
        next_saturated[keep] = 0;
        merged_any = true;
        changed = true;
      }
    }
    for (std::size_t p = 0; p < n; ++p) next_assignment[p] = find(next_assignment[p]);
    const std::size_t new_count = detail::canonical_relabel(next_assignment, &next_saturated);

    Partition next = Partition::from_assignment(std::move(next_assignment), new_count, x);
    next.energy = energy(next, x, g, params);
    next.energy_history = std::move(part.energy_history);
    const double previous = part.energy;
    next.energy_history.push_back(next.energy);
    part = std::move(next);
    saturated = std::move(next_saturated);
    local_report.outer_iterations = outer + 1;
    local_report.component_counts.push_back(new_count);

    if (!changed) break;
    if (previous <= 0.0 || (previous - part.energy) < params.relative_energy_tolerance * previous) break;
  }

  // The all-singleton partition is a closed-form candidate; keep it when it is better.
  {
    std::vector<Index> identity(n);
    std::iota(identity.begin(), identity.end(), Index{0});
    double singleton_energy = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t c = 0; c < x.num_classes; ++c)
        if (x.cls(p)[c] != 0.0) singleton_energy -= x.cls(p)[c] * clamped_log(x.cls(p)[c]);
    double cut = 0.0;
    for (double w : g.weight) cut += w;
    singleton_energy += lambda * cut;
    if (singleton_energy < part.energy && n > part.component_count()) {
      Partition single = Partition::from_assignment(std::move(identity), n, x);
      single.energy = energy(single, x, g, params);
      if (single.energy < part.energy) {
        single.energy_history = std::move(part.energy_history);
        single.energy_history.push_back(single.energy);
        part = std::move(single);
        local_report.fell_back_to_singletons = true;
      }
    }
  }

  if (report) *report = std::move(local_report);
  return part;
}

}  // namespace supercut
