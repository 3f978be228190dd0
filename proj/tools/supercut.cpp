#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "supercut/io.hpp"

namespace fs = std::filesystem;
using namespace supercut;
using io::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the commands that run the clustering pipeline.
struct PipelineFlags {
  std::string config_path, classes_path, scores_path, agreements_path;
  double lambda = 0, eta = 0, epsilon = 0, sp_reg = 0, sp_ratio = 0, corrupt = 0, class_noise = 0;
  std::size_t knn = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool oracle_class = false, oracle_agreement = false;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app, bool file_inputs) {
    opts["config"] = app->add_option("--config", config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
    opts["classes"] = app->add_option("--classes", classes_path, "class table JSON")->check(CLI::ExistingFile);
    opts["lambda"] = app->add_option("--lambda", lambda, "regularization strength");
    opts["eta"] = app->add_option("--eta", eta, "position fidelity weight");
    opts["epsilon"] = app->add_option("--epsilon", epsilon, "edge weight offset");
    opts["knn"] = app->add_option("--knn", knn, "neighbors in the point graph");
    opts["sp-reg"] = app->add_option("--sp-reg", sp_reg, "superpoint regularization (0: points, <0: tune)");
    opts["sp-ratio"] = app->add_option("--sp-ratio", sp_ratio, "target superpoints per point when tuning");
    opts["seed"] = app->add_option("--seed", seed, "random seed");
    opts["threads"] = app->add_option("--threads", threads, "worker cap (0: hardware)");
    if (file_inputs) {
      opts["scores"] = app->add_option("--scores", scores_path, "per-point class scores (SCLS)")->check(CLI::ExistingFile);
      opts["agreements"] =
          app->add_option("--agreements", agreements_path, "superpoint agreements CSV")->check(CLI::ExistingFile);
    }
    opts["oracle-class"] = app->add_flag("--oracle-class", oracle_class, "class scores from ground truth");
    opts["oracle-agreement"] = app->add_flag("--oracle-agreement", oracle_agreement, "agreements from ground truth");
    opts["corrupt"] = app->add_option("--corrupt", corrupt, "rate of oracle agreements replaced by noise");
    opts["class-noise"] = app->add_option("--class-noise", class_noise, "mixing weight of random class scores");
  }

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (given("classes")) c.table = io::read_class_table(classes_path);
    if (given("config")) c = io::config_from_json(io::read_json(config_path), c, config_path);
    if (given("lambda")) c.clustering.lambda = lambda;
    if (given("eta")) c.clustering.eta = eta;
    if (given("epsilon")) c.clustering.epsilon = epsilon;
    if (given("knn")) c.knn_k = knn;
    if (given("sp-reg")) c.superpoint_regularization = sp_reg;
    if (given("sp-ratio")) c.superpoint_ratio = sp_ratio;
    if (given("seed")) c.clustering.seed = seed;
    if (given("threads")) c.clustering.threads = threads;
    if (given("class-noise")) c.class_noise = class_noise;
    if (given("scores") && oracle_class) throw UsageError("--scores and --oracle-class are exclusive");
    if (given("agreements") && oracle_agreement) throw UsageError("--agreements and --oracle-agreement are exclusive");
    if (given("scores")) c.scores_source = ScoresSource::File;
    else if (oracle_class) c.scores_source = ScoresSource::Oracle;
    if (given("agreements")) c.agreement_source = AgreementSource::File;
    else if (oracle_agreement) c.agreement_source = AgreementSource::Oracle;
    if (given("corrupt")) {
      if (c.agreement_source == AgreementSource::File) throw UsageError("--corrupt applies to oracle agreements only");
      c.corruption_rate = corrupt;
      c.agreement_source = corrupt > 0.0 ? AgreementSource::NoisyOracle : AgreementSource::Oracle;
    }
    c.validate();
    return c;
  }
};

json file_entry(const std::string& path) {
  return {{"path", fs::absolute(path).lexically_normal().string()}, {"fnv1a", io::fnv1a_hex(io::read_file(path))}};
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

PointCloud read_labeled_ply(const std::string& path) {
  PointCloud cloud = io::read_ply(path);
  if (!cloud.labeled()) throw DataError(path + ": point cloud has no semantic_class/object_id properties");
  return cloud;
}

void check_ground_truth(const PointCloud& cloud, const ClassTable& table, const std::string& path) {
  const auto violations = validate_ground_truth(cloud, table);
  if (!violations.empty())
    throw DataError(path + ": invalid ground truth: " + violations.front().message);
}

// ---------------------------------------------------------------------------------------

int cmd_generate(const std::string& spec_path, std::size_t objects, bool objects_given, std::uint64_t seed,
                 bool seed_given, const std::string& prefix, bool ascii) {
  SceneSpec spec;
  if (!spec_path.empty()) spec = io::scene_spec_from_json(io::read_json(spec_path), spec, spec_path);
  if (objects_given) spec.num_objects = objects;
  if (seed_given) spec.seed = seed;
  const PointCloud cloud = generate_scene(spec);
  io::write_ply(prefix + ".ply", cloud, !ascii);
  io::write_labels(prefix + "_gt.csv", PanopticLabels{cloud.semantic, cloud.object});
  io::write_file_atomic(prefix + "_classes.json", io::class_table_json(spec.table).dump(2) + "\n");
  spdlog::info("generated {} points, {} objects -> {}.ply", cloud.size(), spec.num_objects, prefix);
  return kOk;
}

int cmd_partition(const std::string& ply, const PipelineFlags& flags, const std::string& out,
                  const std::string& edges_out) {
  const PipelineConfig config = flags.resolve();
  const PointCloud cloud = io::read_ply(ply);
  const unsigned threads = config.clustering.threads;
  const AdjacencyGraph point_graph = build_knn_graph(cloud.positions, config.knn_k, threads);
  SuperpointPartition sp;
  if (config.superpoint_regularization == 0.0) {
    sp = SuperpointPartition::identity(cloud.size());
  } else {
    std::size_t dim = 0;
    const auto features = default_superpoint_features(cloud, &dim);
    if (config.superpoint_regularization > 0.0) {
      sp = compute_superpoints(features, dim, point_graph, config.superpoint_regularization, threads,
                               config.clustering.seed);
    } else {
      auto tuned = tune_superpoint_regularization(features, dim, point_graph, config.superpoint_ratio, 12, threads,
                                                  config.clustering.seed);
      spdlog::info("tuned superpoint regularization {} (ratio {})", tuned.regularization, tuned.ratio);
      sp = std::move(tuned.partition);
    }
  }
  io::write_superpoints(out, sp);
  if (!edges_out.empty()) io::write_edges(edges_out, superpoint_adjacency(sp.point_to_superpoint, sp.count(), point_graph));
  spdlog::info("{} points -> {} superpoints", cloud.size(), sp.count());
  return kOk;
}

struct ClusterInputs {
  std::string ply, superpoints, scores, agreements;
};

int run_cluster(const ClusterInputs& in, const PipelineConfig& config, const std::string& out_dir) {
  PointCloud cloud = io::read_ply(in.ply);
  std::optional<SuperpointPartition> sp;
  std::optional<std::vector<double>> scores;
  std::optional<std::map<std::pair<Index, Index>, double>> agreements;
  PipelineInputs inputs;
  if (!in.superpoints.empty()) {
    sp = io::read_superpoints(in.superpoints);
    inputs.superpoints = &*sp;
  }
  if (config.scores_source == ScoresSource::File) {
    std::uint64_t n = 0;
    std::uint32_t c = 0;
    scores = io::read_scores(in.scores, &n, &c);
    if (n != cloud.size() || c != config.table.size())
      throw DataError(in.scores + ": expected " + std::to_string(cloud.size()) + " x " +
                      std::to_string(config.table.size()) + " scores, found " + std::to_string(n) + " x " +
                      std::to_string(c));
    inputs.point_scores = &*scores;
  }
  if (config.agreement_source == AgreementSource::File) {
    agreements = io::read_agreements(in.agreements);
    inputs.agreements = &*agreements;
  }
  if (cloud.labeled()) check_ground_truth(cloud, config.table, in.ply);

  const PipelineResult result = run_pipeline(cloud, config, inputs);
  const AdjacencyGraph weighted = apply_weights(result.graph, config.clustering.epsilon);

  const std::map<std::string, std::string> outputs{{"labels", in_dir(out_dir, "labels.csv")},
                                                   {"partition", in_dir(out_dir, "partition.csv")},
                                                   {"components", in_dir(out_dir, "partition.json")},
                                                   {"superpoints", in_dir(out_dir, "superpoints.csv")},
                                                   {"graph", in_dir(out_dir, "graph.csv")}};
  io::write_labels(outputs.at("labels"), result.labels);
  io::write_partition(outputs.at("partition"), outputs.at("components"), result.partition);
  io::write_superpoints(outputs.at("superpoints"), result.superpoints);
  io::write_edges(outputs.at("graph"), weighted);

  json manifest;
  manifest["tool"] = "supercut";
  manifest["version"] = SUPERCUT_VERSION;
  manifest["command"] = "cluster";
  manifest["config"] = io::config_json(config);
  manifest["config"]["class_table"] = io::class_table_json(config.table);
  json inputs_json = {{"ply", file_entry(in.ply)}};
  if (!in.superpoints.empty()) inputs_json["superpoints"] = file_entry(in.superpoints);
  if (!in.scores.empty()) inputs_json["scores"] = file_entry(in.scores);
  if (!in.agreements.empty()) inputs_json["agreements"] = file_entry(in.agreements);
  manifest["inputs"] = inputs_json;
  json outputs_json = json::object();
  for (const auto& [role, path] : outputs) outputs_json[role] = file_entry(path);
  manifest["outputs"] = outputs_json;
  manifest["timings_ms"] = io::timings_json(result.timings);
  manifest["total_ms"] = result.total_ms;
  io::write_file_atomic(in_dir(out_dir, "manifest.json"), manifest.dump(2) + "\n");

  spdlog::info("{} superpoints -> {} components, energy {}", result.superpoints.count(),
               result.partition.component_count(), result.partition.energy);
  return kOk;
}

int cmd_cluster(ClusterInputs in, const PipelineFlags& flags, const std::string& out_dir) {
  const PipelineConfig config = flags.resolve();
  in.scores = flags.scores_path;
  in.agreements = flags.agreements_path;
  const bool from_config = flags.given("config");
  if (!from_config && in.scores.empty() && !flags.oracle_class)
    throw UsageError("cluster needs --scores or --oracle-class");
  if (!from_config && in.agreements.empty() && !flags.oracle_agreement)
    throw UsageError("cluster needs --agreements or --oracle-agreement");
  if (config.scores_source == ScoresSource::File && in.scores.empty())
    throw UsageError("the configuration reads class scores from a file; pass --scores");
  if (config.agreement_source == AgreementSource::File && in.agreements.empty())
    throw UsageError("the configuration reads agreements from a file; pass --agreements");
  return run_cluster(in, config, out_dir);
}

int cmd_cluster_from_manifest(const std::string& manifest_path, std::string out_dir, const PipelineFlags& flags) {
  const json m = io::read_json(manifest_path);
  ClusterInputs in;
  PipelineConfig config;
  try {
    if (m.at("command") != "cluster") throw DataError(manifest_path + ": not a cluster manifest");
    config = io::config_from_json(m.at("config"), config, manifest_path);
    config.table = io::class_table_from_json(m.at("config").at("class_table"), manifest_path);
    const json& inputs = m.at("inputs");
    auto take = [&](const char* role, std::string& path) {
      if (!inputs.contains(role)) return;
      path = inputs[role].at("path").get<std::string>();
      const std::string digest = io::fnv1a_hex(io::read_file(path));
      if (digest != inputs[role].at("fnv1a").get<std::string>())
        throw DataError(manifest_path + ": input '" + role + "' (" + path + ") changed since the recorded run");
    };
    take("ply", in.ply);
    take("superpoints", in.superpoints);
    take("scores", in.scores);
    take("agreements", in.agreements);
  } catch (const json::exception& e) {
    throw DataError(manifest_path + ": " + e.what());
  }
  if (flags.given("threads")) config.clustering.threads = flags.threads;
  config.validate();
  if (out_dir.empty()) out_dir = fs::path(manifest_path).parent_path().string();
  return run_cluster(in, config, out_dir.empty() ? "." : out_dir);
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& classes_path,
             const std::string& out) {
  const ClassTable table = classes_path.empty() ? default_scene_table() : io::read_class_table(classes_path);
  const PointCloud gt = read_labeled_ply(gt_path);
  check_ground_truth(gt, table, gt_path);
  const PanopticLabels pred = io::read_labels(pred_path);
  if (pred.size() != gt.size())
    throw DataError(pred_path + ": " + std::to_string(pred.size()) + " labels for " + std::to_string(gt.size()) +
                    " ground-truth points");
  for (std::size_t p = 0; p < pred.size(); ++p)
    if (pred.semantic[p] != IGNORE && pred.semantic[p] >= table.size())
      throw DataError(pred_path + ":" + std::to_string(p + 2) + ": class " + std::to_string(pred.semantic[p]) +
                      " is not in the class table");
  const auto metrics = panoptic_quality(pred, gt, table);
  const std::string text = io::metrics_json(metrics, table).dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else io::write_file_atomic(out, text);
  spdlog::info("PQ {:.3f} RQ {:.3f} SQ {:.3f} mIoU {:.3f}", metrics.pq, metrics.rq, metrics.sq, metrics.miou);
  return kOk;
}

std::vector<std::string> read_scene_list(const std::string& path) {
  const std::string text = io::read_file(path);
  std::vector<std::string> out;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto t = std::string(io::detail::trim(line));
    if (t.empty() || t.front() == '#') continue;
    fs::path p(t);
    if (p.is_relative()) p = fs::path(path).parent_path() / p;
    if (!fs::exists(p)) io::data_error(path, line_no, "no such scene '" + t + "'");
    out.push_back(p.string());
  }
  if (out.empty()) throw DataError(path + ": no scenes listed");
  return out;
}

int cmd_tune(const std::string& list_path, const std::string& grid_path, const PipelineFlags& flags,
             const std::string& out_dir) {
  PipelineConfig config = flags.resolve();
  if (config.scores_source == ScoresSource::File || config.agreement_source == AgreementSource::File)
    throw UsageError("tune runs on oracle signals; pass --oracle-class and --oracle-agreement");
  const GridSpec grid = grid_path.empty() ? GridSpec{} : io::grid_from_json(io::read_json(grid_path), grid_path);
  std::vector<PointCloud> scenes;
  for (const auto& p : read_scene_list(list_path)) {
    scenes.push_back(read_labeled_ply(p));
    check_ground_truth(scenes.back(), config.table, p);
  }
  const GridResult r = grid_search(scenes, grid, config);
  PipelineConfig best = config;
  best.clustering = r.best;
  json j = io::config_json(best);
  j["mean_pq"] = r.best_pq;
  io::write_file_atomic(in_dir(out_dir, "best_params.json"), j.dump(2) + "\n");
  io::write_file_atomic(in_dir(out_dir, "pq_table.csv"), io::grid_csv(r));
  spdlog::info("best lambda {} eta {} epsilon {}: mean PQ {:.3f}", r.best.lambda, r.best.eta, r.best.epsilon,
               r.best_pq);
  return kOk;
}

int cmd_bench(const std::string& sizes_path, int repeats, std::uint64_t seed, bool no_gmp, const std::string& out) {
  std::vector<std::pair<std::size_t, std::size_t>> sizes;
  if (sizes_path.empty()) {
    for (std::size_t n : {1000, 2000, 3000, 4000, 5000}) sizes.emplace_back(n, n);
  } else {
    sizes = io::read_sizes(sizes_path);
  }
  const auto rows = bench_matching(sizes, repeats, seed, !no_gmp);
  const std::string text = io::bench_csv(rows);
  if (out.empty()) std::cout << text;
  else io::write_file_atomic(out, text);
  return kOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("supercut");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SUPERCUT_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("SUPERCUT_LOG='{}' is not a log level; keeping 'warn'", env);
    else
      spdlog::set_level(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Panoptic point-cloud segmentation by graph clustering"};
  app.set_version_flag("--version", SUPERCUT_VERSION);
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "synthetic scene with ground truth");
  std::string spec_path, prefix;
  std::size_t objects = 0;
  std::uint64_t gen_seed = 0;
  bool ascii = false;
  gen->add_option("--spec", spec_path, "scene spec JSON")->check(CLI::ExistingFile);
  auto* objects_opt = gen->add_option("--objects", objects, "number of objects");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out", prefix, "output prefix (<prefix>.ply, <prefix>_gt.csv, <prefix>_classes.json)")->required();
  gen->add_flag("--ascii", ascii, "write ASCII PLY");

  auto* part = app.add_subcommand("partition", "superpoint oversegmentation");
  PipelineFlags part_flags;
  std::string part_ply, part_out, part_edges;
  part->add_option("--ply", part_ply, "input point cloud")->required()->check(CLI::ExistingFile);
  part->add_option("--out", part_out, "superpoint CSV")->required();
  part->add_option("--edges-out", part_edges, "superpoint adjacency CSV");
  part_flags.attach(part, false);

  auto* cluster = app.add_subcommand("cluster", "panoptic segmentation by graph clustering");
  PipelineFlags cluster_flags;
  ClusterInputs cluster_in;
  std::string cluster_out, manifest_path;
  cluster->add_option("--ply", cluster_in.ply, "input point cloud")->check(CLI::ExistingFile);
  cluster->add_option("--superpoints", cluster_in.superpoints, "superpoint CSV")->check(CLI::ExistingFile);
  cluster->add_option("--out-dir", cluster_out, "output directory");
  auto* manifest_opt =
      cluster->add_option("--from-manifest", manifest_path, "rerun a recorded run")->check(CLI::ExistingFile);
  cluster_flags.attach(cluster, true);

  auto* eval = app.add_subcommand("eval", "panoptic metrics against ground truth");
  std::string pred_path, gt_path, eval_classes, eval_out;
  eval->add_option("--pred", pred_path, "predicted labels CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path, "labeled point cloud")->required()->check(CLI::ExistingFile);
  eval->add_option("--classes", eval_classes, "class table JSON")->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "metrics JSON (default: stdout)");

  auto* tune = app.add_subcommand("tune", "grid search over clustering parameters");
  PipelineFlags tune_flags;
  std::string list_path, grid_path, tune_out;
  tune->add_option("--scenes", list_path, "file listing labeled PLY scenes")->required()->check(CLI::ExistingFile);
  tune->add_option("--grid", grid_path, "grid JSON")->check(CLI::ExistingFile);
  tune->add_option("--out-dir", tune_out, "output directory")->required();
  tune_flags.attach(tune, false);

  auto* bench = app.add_subcommand("bench-matching", "assignment solver timings");
  std::string sizes_path, bench_out;
  int repeats = 3;
  std::uint64_t bench_seed = 0;
  bool no_gmp = false;
  bench->add_option("--sizes", sizes_path, "CSV of n_true,n_pred")->check(CLI::ExistingFile);
  bench->add_option("--repeats", repeats, "timed repetitions per size")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "random seed");
  bench->add_flag("--no-gmp", no_gmp, "skip the clustering timings");
  bench->add_option("--out", bench_out, "benchmark CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(spec_path, objects, objects_opt->count() > 0, gen_seed, gen_seed_opt->count() > 0,
                                  prefix, ascii);
    if (*part) return cmd_partition(part_ply, part_flags, part_out, part_edges);
    if (*cluster) {
      if (manifest_opt->count() > 0) return cmd_cluster_from_manifest(manifest_path, cluster_out, cluster_flags);
      if (cluster_in.ply.empty() || cluster_out.empty()) throw UsageError("cluster needs --ply and --out-dir");
      return cmd_cluster(cluster_in, cluster_flags, cluster_out);
    }
    if (*eval) return cmd_eval(pred_path, gt_path, eval_classes, eval_out);
    if (*tune) return cmd_tune(list_path, grid_path, tune_flags, tune_out);
    if (*bench) return cmd_bench(sizes_path, repeats, bench_seed, no_gmp, bench_out);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const ParameterError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const StructuralError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const NumericError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  }
  return kUsage;
}
