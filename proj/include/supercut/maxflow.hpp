#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

namespace supercut {

/// Boykov-Kolmogorov augmenting-path max-flow on a graph with terminal links.
///
/// Nodes are 0..n-1. add_terminal(i, to_source, to_sink) sets the capacities source->i and
/// i->sink; add_edge(i, j, c, rc) adds i->j with capacity c and j->i with capacity rc.
/// After solve(), sink_side(i) is true iff i can still reach the sink in the residual graph,
/// i.e. the sink side of the min cut with the smallest possible sink set.
class MaxFlow {
 public:
  explicit MaxFlow(int node_count, std::size_t edge_hint = 0) : nodes_(node_count) {
    head_.reserve(2 * edge_hint);
    next_.reserve(2 * edge_hint);
    cap_.reserve(2 * edge_hint);
  }

  int node_count() const { return static_cast<int>(nodes_.size()); }

  void add_terminal(int i, double to_source, double to_sink) {
    Node& n = nodes_[i];
    if (n.tr_cap > 0) to_source += n.tr_cap;
    else to_sink -= n.tr_cap;
    flow_ += std::min(to_source, to_sink);
    n.tr_cap = to_source - to_sink;
  }

  void add_edge(int i, int j, double cap, double rev_cap) {
    const int a = static_cast<int>(head_.size());
    head_.push_back(j);
    next_.push_back(nodes_[i].first);
    cap_.push_back(cap);
    nodes_[i].first = a;
    head_.push_back(i);
    next_.push_back(nodes_[j].first);
    cap_.push_back(rev_cap);
    nodes_[j].first = a + 1;
  }

  double solve() {
    init_trees();
    int current = kNone;
    for (;;) {
      int i = kNone;
      if (current != kNone) {
        nodes_[current].queued = false;
        if (nodes_[current].parent != kNone) i = current;
      }
      if (i == kNone && (i = next_active()) == kNone) break;

      int meet = kNone;  // arc from source tree to sink tree
      Node& ni = nodes_[i];
      if (!ni.is_sink) {
        for (int a = ni.first; a != kNone; a = next_[a]) {
          if (cap_[a] <= 0) continue;
          const int j = head_[a];
          Node& nj = nodes_[j];
          if (nj.parent == kNone) {
            nj.is_sink = false;
            nj.parent = sister(a);
            nj.ts = ni.ts;
            nj.dist = ni.dist + 1;
            set_active(j);
          } else if (nj.is_sink) {
            meet = a;
            break;
          } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
            nj.parent = sister(a);
            nj.ts = ni.ts;
            nj.dist = ni.dist + 1;
          }
        }
      } else {
        for (int a = ni.first; a != kNone; a = next_[a]) {
          if (cap_[sister(a)] <= 0) continue;
          const int j = head_[a];
          Node& nj = nodes_[j];
          if (nj.parent == kNone) {
            nj.is_sink = true;
            nj.parent = sister(a);
            nj.ts = ni.ts;
            nj.dist = ni.dist + 1;
            set_active(j);
          } else if (!nj.is_sink) {
            meet = sister(a);
            break;
          } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
            nj.parent = sister(a);
            nj.ts = ni.ts;
            nj.dist = ni.dist + 1;
          }
        }
      }

      ++time_;
      if (meet != kNone) {
        nodes_[i].queued = true;  // keep i as the current node
        current = i;
        augment(meet);
        while (!orphans_.empty()) {
          const int o = orphans_.front();
          orphans_.pop_front();
          if (nodes_[o].is_sink) adopt_sink_orphan(o);
          else adopt_source_orphan(o);
        }
      } else {
        current = kNone;
      }
    }
    mark_sink_side();
    return flow_;
  }

  bool sink_side(int i) const { return sink_side_[i]; }
  double flow() const { return flow_; }

 private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;
  static constexpr int kInfDist = std::numeric_limits<int>::max();

  struct Node {
    int first = kNone;
    int parent = kNone;
    double tr_cap = 0.0;  // > 0: residual from source; < 0: residual to sink
    bool is_sink = false;
    bool queued = false;
    long ts = 0;
    int dist = 0;
  };

  static int sister(int a) { return a ^ 1; }

  void set_active(int i) {
    if (!nodes_[i].queued) {
      nodes_[i].queued = true;
      active_.push_back(i);
    }
  }

  int next_active() {
    while (!active_.empty()) {
      const int i = active_.front();
      active_.pop_front();
      nodes_[i].queued = false;
      if (nodes_[i].parent != kNone) return i;
    }
    return kNone;
  }

  void init_trees() {
    active_.clear();
    orphans_.clear();
    time_ = 0;
    for (int i = 0; i < node_count(); ++i) {
      Node& n = nodes_[i];
      n.queued = false;
      n.ts = 0;
      if (n.tr_cap > 0) {
        n.is_sink = false;
        n.parent = kTerminal;
        n.dist = 1;
        set_active(i);
      } else if (n.tr_cap < 0) {
        n.is_sink = true;
        n.parent = kTerminal;
        n.dist = 1;
        set_active(i);
      } else {
        n.parent = kNone;
      }
    }
  }

  void set_orphan(int i) {
    nodes_[i].parent = kOrphan;
    orphans_.push_front(i);
  }

  void augment(int middle) {
    double bottleneck = cap_[middle];
    int i = head_[sister(middle)];
    for (int a; (a = nodes_[i].parent) != kTerminal; i = head_[a])
      bottleneck = std::min(bottleneck, cap_[sister(a)]);
    bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
    i = head_[middle];
    for (int a; (a = nodes_[i].parent) != kTerminal; i = head_[a])
      bottleneck = std::min(bottleneck, cap_[a]);
    bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);

    cap_[sister(middle)] += bottleneck;
    cap_[middle] -= bottleneck;
    i = head_[sister(middle)];
    for (int a; (a = nodes_[i].parent) != kTerminal; i = head_[a]) {
      cap_[a] += bottleneck;
      cap_[sister(a)] -= bottleneck;
      if (cap_[sister(a)] <= 0) set_orphan(i);
    }
    nodes_[i].tr_cap -= bottleneck;
    if (nodes_[i].tr_cap <= 0) set_orphan(i);

    i = head_[middle];
    for (int a; (a = nodes_[i].parent) != kTerminal; i = head_[a]) {
      cap_[sister(a)] += bottleneck;
      cap_[a] -= bottleneck;
      if (cap_[a] <= 0) set_orphan(i);
    }
    nodes_[i].tr_cap += bottleneck;
    if (nodes_[i].tr_cap >= 0) set_orphan(i);
    flow_ += bottleneck;
  }

  // Distance from j to its terminal along parent arcs, or kInfDist when the chain hits an
  // orphan. Marks visited nodes with the current timestamp.
  int origin_distance(int j) {
    int d = 0;
    for (;;) {
      Node& n = nodes_[j];
      if (n.ts == time_) return d + n.dist;
      const int a = n.parent;
      ++d;
      if (a == kTerminal) {
        n.ts = time_;
        n.dist = 1;
        return d;
      }
      if (a == kOrphan) return kInfDist;
      j = head_[a];
    }
  }

  void stamp_path(int j, int d) {
    for (; nodes_[j].ts != time_; j = head_[nodes_[j].parent]) {
      nodes_[j].ts = time_;
      nodes_[j].dist = d--;
    }
  }

  void adopt_source_orphan(int i) {
    int best_arc = kNone;
    int best_dist = kInfDist;
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = next_[a0]) {
      if (cap_[sister(a0)] <= 0) continue;
      const int j = head_[a0];
      if (nodes_[j].is_sink || nodes_[j].parent == kNone) continue;
      const int d = origin_distance(j);
      if (d == kInfDist) continue;
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      stamp_path(j, d);
    }
    finish_orphan(i, best_arc, best_dist, false);
  }

  void adopt_sink_orphan(int i) {
    int best_arc = kNone;
    int best_dist = kInfDist;
    for (int a0 = nodes_[i].first; a0 != kNone; a0 = next_[a0]) {
      if (cap_[a0] <= 0) continue;
      const int j = head_[a0];
      if (!nodes_[j].is_sink || nodes_[j].parent == kNone) continue;
      const int d = origin_distance(j);
      if (d == kInfDist) continue;
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      stamp_path(j, d);
    }
    finish_orphan(i, best_arc, best_dist, true);
  }

  void finish_orphan(int i, int best_arc, int best_dist, bool sink_tree) {
    Node& ni = nodes_[i];
    ni.parent = best_arc;
    if (best_arc != kNone) {
      ni.ts = time_;
      ni.dist = best_dist + 1;
      return;
    }
    // No valid parent: i becomes free; neighbors in its tree are re-examined.
    for (int a0 = ni.first; a0 != kNone; a0 = next_[a0]) {
      const int j = head_[a0];
      Node& nj = nodes_[j];
      if (nj.is_sink != sink_tree || nj.parent == kNone) continue;
      const double residual = sink_tree ? cap_[a0] : cap_[sister(a0)];
      if (residual > 0) set_active(j);
      const int a = nj.parent;
      if (a != kTerminal && a != kOrphan && head_[a] == i) {
        nj.parent = kOrphan;
        orphans_.push_back(j);
      }
    }
  }

  void mark_sink_side() {
    sink_side_.assign(nodes_.size(), false);
    std::vector<int> stack;
    for (int i = 0; i < node_count(); ++i)
      if (nodes_[i].tr_cap < 0) {
        sink_side_[i] = true;
        stack.push_back(i);
      }
    while (!stack.empty()) {
      const int k = stack.back();
      stack.pop_back();
      for (int a = nodes_[k].first; a != kNone; a = next_[a]) {
        const int j = head_[a];
        if (!sink_side_[j] && cap_[sister(a)] > 0) {
          sink_side_[j] = true;
          stack.push_back(j);
        }
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<int> head_;
  std::vector<int> next_;
  std::vector<double> cap_;
  std::deque<int> active_;
  std::deque<int> orphans_;
  std::vector<bool> sink_side_;
  long time_ = 0;
  double flow_ = 0.0;
};

}  // namespace supercut
