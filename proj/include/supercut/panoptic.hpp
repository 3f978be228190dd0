#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "supercut/core.hpp"
#include "supercut/cutpursuit.hpp"
#include "supercut/graphs.hpp"
#include "supercut/metrics.hpp"
#include "supercut/parallel.hpp"
#include "supercut/scenegen.hpp"
#include "supercut/superpoints.hpp"

namespace supercut {

/// Transition cost a / (1 - a + epsilon); a is clamped to [0, 1].
inline double edge_weight(double a, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("edge_weight: epsilon must be positive");
  a = std::clamp(a, 0.0, 1.0);
  return a / (1.0 - a + epsilon);
}

/// Copy of `graph` with weights derived from its agreements. Ignored (NaN) agreements give
/// weight 0.
inline AdjacencyGraph apply_weights(const AdjacencyGraph& graph, double epsilon) {
  if (graph.agreement.size() != graph.edge_count() || (!graph.has_agreement() && graph.edge_count() > 0))
    throw StructuralError("apply_weights: graph has no per-edge agreements");
  AdjacencyGraph out = graph;
  for (std::size_t e = 0; e < out.edge_count(); ++e)
    out.weight[e] = agreement_ignored(graph.agreement[e]) ? 0.0 : edge_weight(graph.agreement[e], epsilon);
  return out;
}

/// Component labels: class is the argmax of the component distribution (lowest id on ties);
/// thing components get fresh indices from C upwards in component order, stuff components
/// of class c get index c.
inline PanopticLabels clusters_to_panoptic(const Partition& part, const ClassTable& table) {
  if (part.num_classes != table.size())
    throw StructuralError("clusters_to_panoptic: partition class count differs from the class table");
  const std::size_t k_count = part.component_count();
  std::vector<Label> comp_class(k_count), comp_object(k_count);
  Label next_thing = static_cast<Label>(table.size());
  for (std::size_t k = 0; k < k_count; ++k) {
    const double* y = part.cls(k);
    Label best = 0;
    for (Label c = 1; c < table.size(); ++c)
      if (y[c] > y[best]) best = c;
    comp_class[k] = best;
    comp_object[k] = table.thing(best) ? next_thing++ : stuff_object_index(best);
  }
  PanopticLabels out;
  out.semantic.resize(part.assignment.size());
  out.object.resize(part.assignment.size());
  for (std::size_t p = 0; p < part.assignment.size(); ++p) {
    out.semantic[p] = comp_class[part.assignment[p]];
    out.object[p] = comp_object[part.assignment[p]];
  }
  return out;
}

enum class ScoresSource { File, Oracle };
enum class AgreementSource { File, Oracle, NoisyOracle };

struct PipelineConfig {
  ClusteringParams clustering;
  ClassTable table = default_scene_table();
  std::size_t knn_k = 10;
  // > 0: fixed superpoint regularization; 0: work on points directly; < 0: tune it so the
  // superpoint count is `superpoint_ratio` times the point count.
  double superpoint_regularization = -1.0;
  double superpoint_ratio = 1.0 / 30.0;
  ScoresSource scores_source = ScoresSource::Oracle;
  AgreementSource agreement_source = AgreementSource::Oracle;
  double corruption_rate = 0.0;
  double class_noise = 0.0;

  void validate() const {
    clustering.validate();
    if (knn_k == 0) throw ParameterError("pipeline: knn_k must be positive");
    if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0))
      throw ParameterError("pipeline: corruption rate must lie in [0, 1]");
    if (!(class_noise >= 0.0 && class_noise <= 1.0)) throw ParameterError("pipeline: class noise must lie in [0, 1]");
    if (agreement_source != AgreementSource::NoisyOracle && corruption_rate > 0.0)
      throw ParameterError("pipeline: a corruption rate needs the noisy-oracle agreement source");
  }
};

/// Externally supplied signals. Scores are per point (n x C); agreements are keyed by node
/// pairs of the clustering graph.
struct PipelineInputs {
  const std::vector<double>* point_scores = nullptr;
  const std::map<std::pair<Index, Index>, double>* agreements = nullptr;
  const SuperpointPartition* superpoints = nullptr;
};

using StageTimes = std::vector<std::pair<std::string, double>>;  // stage -> milliseconds

/// Everything upstream of the clustering parameters; reused across grid cells.
struct PreparedScene {
  SuperpointPartition superpoints;
  AdjacencyGraph graph;  // clustering graph with agreements
  NodeSignal x;
  StageTimes timings;
};

struct PipelineResult {
  PanopticLabels labels;  // per point
  Partition partition;    // over clustering nodes
  SuperpointPartition superpoints;
  AdjacencyGraph graph;
  StageTimes timings;
  double total_ms = 0.0;
};

namespace detail {

class StageClock {
 public:
  explicit StageClock(StageTimes& out) : out_(out), last_(std::chrono::steady_clock::now()) {}
  void lap(std::string stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.emplace_back(std::move(stage), std::chrono::duration<double, std::milli>(now - last_).count());
    last_ = now;
  }

 private:
  StageTimes& out_;
  std::chrono::steady_clock::time_point last_;
};

}  // namespace detail

inline PreparedScene prepare_scene(const PointCloud& cloud, const PipelineConfig& config,
                                   const PipelineInputs& inputs = {}) {
  config.validate();
  cloud.check_structure();
  const bool oracle = config.scores_source == ScoresSource::Oracle ||
                      config.agreement_source != AgreementSource::File;
  if (oracle && !cloud.labeled()) throw DataError("pipeline: oracle signals need a labeled cloud");
  const unsigned threads = config.clustering.threads;
  PreparedScene out;
  detail::StageClock clock(out.timings);

  const AdjacencyGraph point_graph = build_knn_graph(cloud.positions, config.knn_k, threads);
  clock.lap("knn_graph");

  if (inputs.superpoints) {
    out.superpoints = *inputs.superpoints;
    if (out.superpoints.point_count() != cloud.size())
      throw StructuralError("pipeline: superpoint file covers a different number of points");
  } else if (config.superpoint_regularization == 0.0) {
    out.superpoints = SuperpointPartition::identity(cloud.size());
  } else {
    std::size_t dim = 0;
    const auto features = default_superpoint_features(cloud, &dim);
    if (config.superpoint_regularization > 0.0)
      out.superpoints = compute_superpoints(features, dim, point_graph, config.superpoint_regularization,
                                            threads, config.clustering.seed);
    else
      out.superpoints = tune_superpoint_regularization(features, dim, point_graph, config.superpoint_ratio,
                                                       12, threads, config.clustering.seed)
                            .partition;
  }
  set_centroids(out.superpoints, cloud.positions);
  if (cloud.labeled()) majority_labels(out.superpoints, cloud);
  clock.lap("superpoints");

  out.graph = superpoint_adjacency(out.superpoints.point_to_superpoint, out.superpoints.count(), point_graph);
  clock.lap("adjacency");

  const std::size_t c_count = config.table.size();
  std::optional<OracleSignals> oracle_out;
  if (oracle) {
    const double agreement_noise =
        config.agreement_source == AgreementSource::NoisyOracle ? config.corruption_rate : 0.0;
    oracle_out = oracle_signals(out.superpoints, out.graph, cloud, config.table, config.class_noise,
                                agreement_noise, config.clustering.seed, threads);
  }
  if (config.scores_source == ScoresSource::Oracle) {
    out.x = std::move(oracle_out->x);
  } else {
    if (!inputs.point_scores) throw ParameterError("pipeline: class scores file required");
    if (inputs.point_scores->size() != cloud.size() * c_count)
      throw StructuralError("pipeline: class score rows do not match the point count and class table");
    out.x = NodeSignal(out.superpoints.count(), c_count, 3);
    for (std::size_t s = 0; s < out.superpoints.count(); ++s) {
      for (Index p : out.superpoints.members(s))
        for (std::size_t c = 0; c < c_count; ++c) out.x.cls(s)[c] += (*inputs.point_scores)[p * c_count + c];
      const double inv = 1.0 / static_cast<double>(out.superpoints.size(s));
      for (std::size_t c = 0; c < c_count; ++c) out.x.cls(s)[c] *= inv;
      for (int a = 0; a < 3; ++a) out.x.pos(s)[a] = out.superpoints.centroid[s][a];
    }
    out.x.validate();
  }
  if (config.agreement_source == AgreementSource::File) {
    if (!inputs.agreements) throw ParameterError("pipeline: agreements file required");
    out.graph.agreement.resize(out.graph.edge_count());
    for (std::size_t e = 0; e < out.graph.edge_count(); ++e) {
      const auto it = inputs.agreements->find({out.graph.source[e], out.graph.target[e]});
      if (it == inputs.agreements->end())
        throw StructuralError("pipeline: no agreement for edge (" + std::to_string(out.graph.source[e]) + "," +
                              std::to_string(out.graph.target[e]) + ")");
      out.graph.agreement[e] = it->second;
    }
  } else {
    out.graph.agreement = std::move(oracle_out->agreement);
  }
  clock.lap("signals");
  return out;
}

struct ClusteringOutcome {
  Partition partition;
  PanopticLabels labels;  // per point
};

/// Weights, solve, conversion and propagation for a prepared scene.
inline ClusteringOutcome cluster_prepared(const PreparedScene& scene, const ClusteringParams& params,
                                          const ClassTable& table, StageTimes* timings = nullptr) {
  StageTimes local;
  detail::StageClock clock(timings ? *timings : local);
  const AdjacencyGraph weighted = apply_weights(scene.graph, params.epsilon);
  clock.lap("weights");
  ClusteringOutcome out;
  out.partition = solve_gmp(scene.x, weighted, params);
  clock.lap("solve");
  const PanopticLabels node_labels = clusters_to_panoptic(out.partition, table);
  clock.lap("convert");
  out.labels = propagate_to_points(scene.superpoints, node_labels);
  clock.lap("propagate");
  return out;
}

/// Full pipeline: k-NN graph, superpoints, adjacency, signals, weights, solve, conversion,
/// propagation. Per-stage wall times are reported in milliseconds.
inline PipelineResult run_pipeline(const PointCloud& cloud, const PipelineConfig& config,
                                   const PipelineInputs& inputs = {}) {
  const auto start = std::chrono::steady_clock::now();
  PreparedScene prepared = prepare_scene(cloud, config, inputs);
  PipelineResult result;
  result.timings = prepared.timings;
  auto outcome = cluster_prepared(prepared, config.clustering, config.table, &result.timings);
  result.labels = std::move(outcome.labels);
  result.partition = std::move(outcome.partition);
  result.superpoints = std::move(prepared.superpoints);
  result.graph = std::move(prepared.graph);
  result.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

struct GridSpec {
  std::vector<double> lambdas{5.0, 10.0, 20.0, 40.0};
  std::vector<double> etas{2.5e-2, 5e-2, 1e-1};
  std::vector<double> epsilons{1e-5, 1e-4, 1e-3};
};

struct GridCell {
  double lambda, eta, epsilon;
  double mean_pq;
  std::vector<double> scene_pq;
};

struct GridResult {
  ClusteringParams best;
  double best_pq = 0.0;
  std::vector<GridCell> table;  // ascending (lambda, eta, epsilon)
};

/// Mean PQ over scenes for every grid cell. The best cell wins on PQ; ties go to the
/// lexicographically smallest (lambda, eta, epsilon).
inline GridResult grid_search(const std::vector<PointCloud>& scenes, GridSpec grid, const PipelineConfig& config) {
  if (grid.lambdas.empty() || grid.etas.empty() || grid.epsilons.empty())
    throw ParameterError("grid_search: empty parameter grid");
  if (scenes.empty()) throw ParameterError("grid_search: no scenes");
  for (auto* axis : {&grid.lambdas, &grid.etas, &grid.epsilons}) {
    std::sort(axis->begin(), axis->end());
    axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
  }
  const unsigned threads = config.clustering.threads;
  std::vector<PreparedScene> prepared(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    PipelineConfig local = config;
    local.clustering.threads = 1;
    prepared[i] = prepare_scene(scenes[i], local);
  });

  GridResult result;
  bool have_best = false;
  for (double lambda : grid.lambdas)
    for (double eta : grid.etas)
      for (double epsilon : grid.epsilons) {
        ClusteringParams params = config.clustering;
        params.lambda = lambda;
        params.eta = eta;
        params.epsilon = epsilon;
        params.threads = 1;
        GridCell cell{lambda, eta, epsilon, 0.0, std::vector<double>(scenes.size())};
        parallel_for(scenes.size(), threads, [&](std::size_t i) {
          const auto outcome = cluster_prepared(prepared[i], params, config.table);
          cell.scene_pq[i] = panoptic_quality(outcome.labels, scenes[i], config.table).pq;
        });
        for (double pq : cell.scene_pq) cell.mean_pq += pq;
        cell.mean_pq /= static_cast<double>(scenes.size());
        if (!have_best || cell.mean_pq > result.best_pq) {
          have_best = true;
          result.best_pq = cell.mean_pq;
          result.best = config.clustering;
          result.best.lambda = lambda;
          result.best.eta = eta;
          result.best.epsilon = epsilon;
        }
        result.table.push_back(std::move(cell));
      }
  return result;
}

}  // namespace supercut
