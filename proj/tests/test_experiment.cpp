#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gwgen/error.hpp"
#include "gwgen/experiment.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace gwgen;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Tiny budgets so every task runs in well under a second.
ExperimentConfig quick(const std::string& task, const std::string& extra_train = "", int batch = 16) {
  return parse_config(R"({"task": ")" + task + R"(", "seed": 2,
    "train": {"iterations": 6, "batch": )" + std::to_string(batch) + R"(, "noise_dim": 4, "hidden": 16, "checkpoint_every": 3,
              "gw": {"outer_iters": 5})" + extra_train + R"(},
    "dataset": {"scurve_points": 40, "community_size": 12, "glyph_count": 40}})");
}

}  // namespace

TEST_CASE("config parsing fills defaults") {
  const ExperimentConfig cfg = parse_config(R"({"task": "mixture2d"})");
  CHECK(cfg.task == Task::mixture2d);
  CHECK(cfg.train.iterations == 3000);
  CHECK(cfg.train.batch == 256);
  CHECK(cfg.train.n_g == 3);
  CHECK(cfg.train.lr == 2e-4);
  CHECK(cfg.train.adversary_mode == AdversaryMode::learned);
  CHECK(cfg.train.orth_mode == OrthMode::procrustes);
  CHECK(cfg.train.gen_penalties.empty());
  CHECK(cfg.eval_samples == 1000);
  CHECK(data_dim(cfg) == 2);
  CHECK(output_dim(cfg) == 2);
}

TEST_CASE("config parsing reads every section") {
  const ExperimentConfig cfg = parse_config(R"({
    "task": "mixture3d_to_2d", "seed": 9, "out_dir": "/tmp/x",
    "dataset": {"modes": [{"center": [0, 0, 0], "sigma": 0.2}, {"center": [1, 2, 3], "sigma": 0.1}]},
    "train": {"iterations": 10, "batch": 32, "adversary": "identity", "freeze_after": 4,
              "orth_mode": "layerwise_offdiag", "beta": 0.5, "gw": {"epsilon": 0.01, "outer_iters": 7}},
    "penalties": {"l1": 0.001},
    "eval": {"samples": 1200}})");
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.train.gw.seed == 9);
  CHECK(cfg.out_dir == fs::path("/tmp/x"));
  REQUIRE(cfg.data.modes.size() == 2);
  CHECK(cfg.data.modes[1].center[2] == 3.0);
  CHECK(cfg.train.adversary_mode == AdversaryMode::identity);
  CHECK(cfg.train.freeze_after == 4);
  CHECK(cfg.train.orth_mode == OrthMode::layerwise_offdiag);
  CHECK(cfg.train.gw.epsilon == 0.01);
  CHECK(cfg.train.gw.outer_iters == 7);
  REQUIRE(cfg.train.gen_penalties.size() == 1);
  CHECK(cfg.train.gen_penalties[0].kind == PenaltyKind::l1);
  CHECK(cfg.eval_samples == 1200);
  CHECK(data_dim(cfg) == 3);
  CHECK(output_dim(cfg) == 2);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{"), InvalidInput);
  CHECK_THROWS_AS(parse_config("{}"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mnist"})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "bogus": 1})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "train": {"lr2": 1}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "train": {"gw": {"eps": 1}}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "train": {"batch": "big"}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "train": {"adversary": "maybe"}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "eval": {"samples": 10}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture3d_to_2d", "dataset": {"modes": [{"center": [0, 0], "sigma": 1}]}})"),
                  InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "graph"})"), InvalidInput);  // learned adversary needs features
  CHECK_THROWS_AS(parse_config(R"({"task": "graph", "train": {"adversary": "identity"},
                                   "dataset": {"graph_file": "/no/such/file"}})"),
                  InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "mixture2d", "penalties": {"l1": -1}})"), InvalidInput);
  CHECK_THROWS_AS(parse_config(R"({"task": "style", "train": {"batch": 32}})"), InvalidInput);
  CHECK_THROWS_AS(load_config("/no/such/config.json"), InvalidInput);
}

TEST_CASE("resolved config round trips") {
  const ExperimentConfig cfg = parse_config(R"({"task": "style", "seed": 4, "penalties": {"tv": 0.01,
    "style": {"lambda": 0.5}}, "train": {"iterations": 100}})");
  const std::string text = resolved_config_json(cfg);
  const ExperimentConfig back = parse_config(text);
  CHECK(resolved_config_json(back) == text);
  // The style penalty starts halfway through training.
  bool found = false;
  for (const auto& p : back.train.gen_penalties)
    if (p.kind == PenaltyKind::style) {
      found = true;
      CHECK(p.start_iteration == 50);
      CHECK(p.lambda == 0.5);
    }
  CHECK(found);
  CHECK(back.train.style != nullptr);
}

TEST_CASE("csv round trip keeps nine significant digits") {
  std::mt19937_64 rng(100);
  const Matrix x = gwgen::testing::random_matrix(7, 3, rng, 100.0);
  std::stringstream buf;
  write_samples_csv(buf, x);
  std::string header;
  std::getline(std::stringstream(buf.str()), header);
  CHECK(header == "dim0,dim1,dim2");
  const Matrix back = read_samples_csv(buf);
  REQUIRE(back.rows() == 7);
  REQUIRE(back.cols() == 3);
  CHECK(((back - x).array().abs() <= 1e-8 * x.array().abs() + 1e-300).all());

  std::stringstream bad_header("x,y\n1,2\n");
  CHECK_THROWS_AS(read_samples_csv(bad_header), InvalidInput);
  std::stringstream ragged("dim0,dim1\n1,2\n3\n");
  CHECK_THROWS_AS(read_samples_csv(ragged), InvalidInput);
  std::stringstream junk("dim0\nabc\n");
  CHECK_THROWS_AS(read_samples_csv(junk), InvalidInput);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_samples_csv(empty), InvalidInput);
}

TEST_CASE("run writes deterministic artifacts") {
  TempDir a("gwgen_test_run_a"), b("gwgen_test_run_b");
  ExperimentConfig cfg = quick("mixture2d", R"(, "beta": 1.0)");
  cfg.l1 = 0.001;
  cfg.out_dir = a.path;
  std::stringstream err;
  REQUIRE(run(cfg, err) == 0);
  cfg.out_dir = b.path;
  REQUIRE(run(cfg, err) == 0);

  for (const char* name : {"samples_iter0.csv", "samples_iter3.csv", "samples_iter6.csv"}) {
    REQUIRE(fs::exists(a.path / name));
    CHECK(read_file(a.path / name) == read_file(b.path / name));
    const Matrix s = read_samples_csv(a.path / name);
    CHECK(s.rows() == cfg.eval_samples);
    CHECK(s.cols() == output_dim(cfg));
  }
  CHECK(fs::exists(a.path / "generator.ckpt"));
  CHECK(fs::exists(a.path / "config_resolved.json"));
  CHECK(parse_config(read_file(a.path / "config_resolved.json")).train.iterations == 6);

  std::ifstream metrics(a.path / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    CHECK(nlohmann::json::parse(line)["iteration"] == lines);
    ++lines;
  }
  CHECK(lines == 6);

  const auto eval = nlohmann::json::parse(read_file(a.path / "eval.json"));
  CHECK(eval["mode_coverage"].size() == 4);
  double total = 0.0;
  for (double c : eval["mode_coverage"]) total += c;
  CHECK(total <= 1.0 + 1e-12);
  CHECK(eval["centroid_distance_correlation"].get<double>() >= -1.0);
  CHECK(eval["centroid_distance_correlation"].get<double>() <= 1.0);
}

TEST_CASE("every task runs end to end") {
  for (const char* task : {"mixture3d_to_2d", "mixture2d_to_3d", "scurve", "style"}) {
    CAPTURE(task);
    // Procrustes on 64-pixel glyphs needs at least 64 rows per batch.
    const int batch = std::string(task) == "style" ? 64 : 16;
    const ExperimentOutputs out = run_experiment(quick(task, "", batch));
    CHECK(out.train.log.records.size() == 6);
    CHECK(out.snapshots.size() == 3);
    CHECK(std::isfinite(out.eval.final_gw));
    if (std::string(task) == "scurve") CHECK(out.eval.knn_overlap.has_value());
    if (std::string(task) == "style") CHECK(out.eval.mean_style_score.has_value());
  }
  const ExperimentOutputs g = run_experiment(quick("graph", R"(, "adversary": "identity")"));
  REQUIRE(g.eval.separation.has_value());
  CHECK(g.eval.separation->intra > 0.0);
}

TEST_CASE("graph files are read from disk") {
  TempDir dir("gwgen_test_graph");
  fs::create_directories(dir.path);
  const WeightedGraph graph = make_community_graph(2, 10, 0.9, 0.1, 3);
  {
    std::ofstream out(dir.path / "g.txt");
    write_graph(out, graph);
  }
  ExperimentConfig cfg = quick("graph", R"(, "adversary": "identity")");
  cfg.data.graph_file = (dir.path / "g.txt").string();
  const ExperimentOutputs out = run_experiment(cfg);
  // External graphs carry no community labels.
  CHECK_FALSE(out.eval.separation.has_value());
  CHECK(out.eval.knn_overlap.has_value());
}

TEST_CASE("run reports failures with exit codes") {
  std::stringstream err;
  ExperimentConfig bad = quick("graph", R"(, "adversary": "identity")");
  bad.data.graph_file = "/no/such/graph.txt";
  CHECK(run(bad, err) == 2);
  CHECK(err.str().find("graph file") != std::string::npos);

  TempDir dir("gwgen_test_diverge");
  ExperimentConfig div = quick("mixture2d");
  div.train.divergence_threshold = 1e-12;
  div.out_dir = dir.path;
  CHECK(run(div, err) == 3);
  CHECK(fs::exists(dir.path / "generator_last_good.ckpt"));
}
