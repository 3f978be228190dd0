#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>

#include "supercut/io.hpp"

using namespace supercut;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("supercut_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("generate --objects 4 --seed 3 --out " + p("scene")), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string p(const std::string& name) { return (dir_ / name).string(); }

  static int run(const std::string& args, std::string* err = nullptr) {
    const std::string log = p("stderr.txt");
    const int status = std::system((std::string(SUPERCUT_CLI) + " " + args + " >" + p("stdout.txt") + " 2>" + log).c_str());
    if (err) *err = io::read_file(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static double pq_of(const std::string& metrics_path) { return io::read_json(metrics_path)["pq"].get<double>(); }

  static std::string bytes(const std::string& name) { return io::read_file(p(name)); }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(CliTest, EvalOfGroundTruthIsPerfect) {
  ASSERT_EQ(run("eval --pred " + p("scene_gt.csv") + " --gt " + p("scene.ply") + " --classes " +
                p("scene_classes.json") + " --out " + p("gt_metrics.json")),
            0);
  EXPECT_DOUBLE_EQ(pq_of(p("gt_metrics.json")), 100.0);
}

TEST_F(CliTest, OracleClusteringThenEvalIsPerfect) {
  ASSERT_EQ(run("cluster --ply " + p("scene.ply") + " --oracle-class --oracle-agreement --sp-reg 0 --out-dir " +
                p("oracle")),
            0);
  ASSERT_EQ(run("eval --pred " + p("oracle/labels.csv") + " --gt " + p("scene.ply") + " --out " + p("oracle.json")), 0);
  EXPECT_DOUBLE_EQ(pq_of(p("oracle.json")), 100.0);
}

TEST_F(CliTest, SeededClusterIsByteIdenticalAcrossRunsThreadsAndManifest) {
  const std::string common = "cluster --ply " + p("scene.ply") + " --oracle-class --oracle-agreement --corrupt 0.2 --seed 7";
  ASSERT_EQ(run(common + " --out-dir " + p("a")), 0);
  ASSERT_EQ(run(common + " --threads 1 --out-dir " + p("b")), 0);
  ASSERT_EQ(run("cluster --from-manifest " + p("a/manifest.json") + " --out-dir " + p("c")), 0);
  for (const char* f : {"labels.csv", "partition.csv", "partition.json", "superpoints.csv", "graph.csv"}) {
    EXPECT_EQ(bytes(std::string("a/") + f), bytes(std::string("b/") + f)) << f;
    EXPECT_EQ(bytes(std::string("a/") + f), bytes(std::string("c/") + f)) << f;
  }
  const auto manifest = io::read_json(p("a/manifest.json"));
  EXPECT_EQ(manifest["config"]["seed"], 7);
  EXPECT_TRUE(manifest["inputs"].contains("ply"));
  EXPECT_TRUE(manifest["timings_ms"].contains("solve"));
}

TEST_F(CliTest, FileInputsReproduceOracleRun) {
  ASSERT_EQ(run("cluster --ply " + p("scene.ply") + " --oracle-class --oracle-agreement --seed 1 --out-dir " + p("ref")), 0);
  // Per-point one-hot scores and the oracle agreements written back as input files.
  const PointCloud cloud = io::read_ply(p("scene.ply"));
  const std::size_t c = default_scene_table().size();
  std::vector<double> scores(cloud.size() * c, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) scores[i * c + cloud.semantic[i]] = 1.0;
  io::write_scores(p("scores.bin"), scores, cloud.size(), static_cast<std::uint32_t>(c));
  auto graph = io::read_edges(p("ref/graph.csv"), io::read_superpoints(p("ref/superpoints.csv")).count());
  io::write_agreements(p("agreements.csv"), graph);
  ASSERT_EQ(run("cluster --ply " + p("scene.ply") + " --superpoints " + p("ref/superpoints.csv") + " --scores " +
                p("scores.bin") + " --agreements " + p("agreements.csv") + " --seed 1 --out-dir " + p("files")),
            0);
  ASSERT_EQ(run("eval --pred " + p("files/labels.csv") + " --gt " + p("scene.ply") + " --out " + p("files.json")), 0);
  EXPECT_DOUBLE_EQ(pq_of(p("files.json")), 100.0);
}

TEST_F(CliTest, MalformedInputsExitTwoWithLineNumbers) {
  std::ofstream(p("bad_labels.csv")) << "point_id,semantic_class,object_id\n0,0,0\n1,zz,0\n";
  std::string err;
  EXPECT_EQ(run("eval --pred " + p("bad_labels.csv") + " --gt " + p("scene.ply"), &err), 2);
  EXPECT_NE(err.find("bad_labels.csv:3"), std::string::npos) << err;

  std::ofstream(p("bad.ply")) << "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nend_header\n";
  EXPECT_EQ(run("partition --ply " + p("bad.ply") + " --out " + p("x.csv")), 2);

  std::ofstream(p("bad_sizes.csv")) << "n_true,n_pred\n10,0\n";
  EXPECT_EQ(run("bench-matching --sizes " + p("bad_sizes.csv"), &err), 2);
  EXPECT_NE(err.find("bad_sizes.csv:2"), std::string::npos) << err;
}

TEST_F(CliTest, ChangedInputInvalidatesManifest) {
  fs::copy_file(p("scene.ply"), p("copy.ply"), fs::copy_options::overwrite_existing);
  ASSERT_EQ(run("cluster --ply " + p("copy.ply") + " --oracle-class --oracle-agreement --out-dir " + p("m")), 0);
  std::ofstream(p("copy.ply"), std::ios::app) << "\n";
  std::string err;
  EXPECT_EQ(run("cluster --from-manifest " + p("m/manifest.json") + " --out-dir " + p("m2"), &err), 2);
  EXPECT_NE(err.find("changed"), std::string::npos) << err;
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("cluster --ply " + p("scene.ply") + " --out-dir " + p("u")), 1);
  EXPECT_EQ(run("cluster --ply " + p("scene.ply") + " --oracle-class --oracle-agreement --lambda -2 --out-dir " + p("u")),
            1);
  EXPECT_EQ(run("generate --objects 3"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliTest, OtherCommandsAreDeterministic) {
  for (const char* tag : {"1", "2"}) {
    const std::string t(tag);
    ASSERT_EQ(run("generate --objects 2 --seed 5 --ascii --out " + p("g" + t)), 0);
    ASSERT_EQ(run("partition --ply " + p("scene.ply") + " --sp-reg 0.2 --seed 4 --threads " + t + " --out " +
                  p("sp" + t + ".csv") + " --edges-out " + p("spe" + t + ".csv")),
              0);
    ASSERT_EQ(run("eval --pred " + p("scene_gt.csv") + " --gt " + p("scene.ply") + " --out " + p("ev" + t + ".json")), 0);
  }
  for (const char* f : {"g?.ply", "g?_gt.csv", "g?_classes.json", "sp?.csv", "spe?.csv", "ev?.json"}) {
    std::string a(f), b(f);
    a.replace(a.find('?'), 1, "1");
    b.replace(b.find('?'), 1, "2");
    EXPECT_EQ(bytes(a), bytes(b)) << f;
  }
}

TEST_F(CliTest, TuneWritesBestParamsAndTable) {
  std::ofstream(p("scenes.txt")) << "scene.ply\n";
  std::ofstream(p("grid.json")) << R"({"lambda": [1, 10], "eta": [0.05], "epsilon": [0.0001]})";
  ASSERT_EQ(run("tune --scenes " + p("scenes.txt") + " --grid " + p("grid.json") +
                " --oracle-class --oracle-agreement --sp-reg 0.3 --out-dir " + p("tune")),
            0);
  const auto best = io::read_json(p("tune/best_params.json"));
  EXPECT_TRUE(best.contains("lambda"));
  EXPECT_EQ(bytes("tune/pq_table.csv").substr(0, 27), "lambda,eta,epsilon,mean_pq\n");
}
