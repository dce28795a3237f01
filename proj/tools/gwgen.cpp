// Command-line front end: `gwgen run` trains one experiment from a JSON
// config, `gwgen eval` scores a sample CSV against a reference.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "gwgen/error.hpp"
#include "gwgen/experiment.hpp"
#include "json.hpp"

namespace {

using gwgen::Index;
using gwgen::Matrix;
using nlohmann::json;

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool no_adversary = false;
  std::optional<int> freeze_at;
  std::optional<double> l1;
  std::optional<std::string> orth_mode;
  std::optional<int> iterations;
};

struct EvalOptions {
  std::string samples;
  std::string reference;
  std::string task = "mixture2d";
  Index modes = 4;
  Index knn_k = 10;
  Index community_size = 0;
  std::uint64_t seed = 0;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gwgen::InvalidInput("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Command-line flags are written into the JSON before parsing so that the
// usual validation sees them.
gwgen::ExperimentConfig build_config(const RunOptions& o) {
  json j;
  try {
    j = json::parse(slurp(o.config));
  } catch (const json::exception& e) {
    throw gwgen::InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  if (o.seed) j["seed"] = *o.seed;
  if (o.out_dir) j["out_dir"] = *o.out_dir;
  if (o.no_adversary) j["train"]["adversary"] = "identity";
  if (o.freeze_at) j["train"]["freeze_after"] = *o.freeze_at;
  if (o.l1) j["penalties"]["l1"] = *o.l1;
  if (o.orth_mode) j["train"]["orth_mode"] = *o.orth_mode;
  if (o.iterations) j["train"]["iterations"] = *o.iterations;
  return gwgen::parse_config(j.dump());
}

int do_run(const RunOptions& o) {
  gwgen::ExperimentConfig cfg;
  try {
    cfg = build_config(o);
  } catch (const std::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return 2;
  }
  if (cfg.out_dir.empty()) cfg.out_dir = "gwgen_out";
  const int rc = gwgen::run(cfg, std::cerr);
  if (rc == 0) std::cout << "wrote " << cfg.out_dir.string() << '\n';
  return rc;
}

bool looks_like_csv(const std::string& path) {
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  return first.rfind("dim0", 0) == 0;
}

gwgen::ReferenceSpec build_reference(const EvalOptions& o) {
  gwgen::ReferenceSpec ref;
  ref.task = gwgen::task_from_string(o.task);
  ref.knn_k = o.knn_k;
  ref.seed = o.seed;
  ref.gw.seed = o.seed;
  const bool csv = looks_like_csv(o.reference);

  if (gwgen::is_mixture(ref.task) || ref.task == gwgen::Task::style) {
    if (!csv) throw gwgen::InvalidInput("mixture and style references must be sample CSVs");
    ref.samples = gwgen::read_samples_csv(std::filesystem::path(o.reference));
    if (ref.task != gwgen::Task::style) ref.centers = gwgen::kmeans(ref.samples, o.modes, o.seed).centroids;
    return ref;
  }
  if (ref.task == gwgen::Task::scurve) {
    if (!csv) throw gwgen::InvalidInput("scurve references must be sample CSVs");
    ref.samples = gwgen::read_samples_csv(std::filesystem::path(o.reference));
    ref.distances = gwgen::floyd_warshall(gwgen::knn_graph(ref.samples, o.knn_k));
    return ref;
  }
  if (csv) throw gwgen::InvalidInput("graph references must be edge-list files");
  ref.distances = gwgen::floyd_warshall(gwgen::read_graph_file(o.reference));
  if (o.community_size > 0) {
    const Index n = ref.distances->size();
    if (n % o.community_size != 0) throw gwgen::InvalidInput("node count is not a multiple of --community-size");
    ref.labels = gwgen::community_labels(static_cast<int>(n / o.community_size), o.community_size);
  }
  return ref;
}

int do_eval(const EvalOptions& o) {
  try {
    const Matrix samples = gwgen::read_samples_csv(std::filesystem::path(o.samples));
    const gwgen::EvalReport rep = gwgen::evaluate(samples, build_reference(o));
    const std::string text = gwgen::eval_report_json(rep);
    if (o.out.empty()) {
      std::cout << text << '\n';
    } else {
      std::ofstream out(o.out);
      if (!out) throw gwgen::InvalidInput("cannot write " + o.out);
      out << text << '\n';
    }
    return 0;
  } catch (const gwgen::InvalidInput& e) {
    std::cerr << "error: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"train and evaluate generators under a normalized entropic GW loss"};
  app.require_subcommand(1);

  RunOptions ro;
  CLI::App* run = app.add_subcommand("run", "train one experiment and write its artifacts");
  run->add_option("--config", ro.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", ro.seed, "override the seed");
  run->add_option("--out-dir", ro.out_dir, "output directory (default gwgen_out)");
  run->add_flag("--no-adversary", ro.no_adversary, "use raw Euclidean distances, no learned adversary");
  run->add_option("--freeze-adversary-at", ro.freeze_at, "stop updating the adversary from this iteration");
  run->add_option("--l1", ro.l1, "generator l1 weight (0 disables)")->check(CLI::NonNegativeNumber);
  run->add_option("--orth-mode", ro.orth_mode, "adversary orthogonality constraint")
      ->check(CLI::IsMember({"procrustes", "layerwise_full", "layerwise_offdiag", "saxe_init_only"}));
  run->add_option("--iterations", ro.iterations, "override the iteration count");

  EvalOptions eo;
  CLI::App* eval = app.add_subcommand("eval", "score generated samples against a reference");
  eval->add_option("--samples", eo.samples, "generated samples CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--reference", eo.reference, "reference samples CSV or graph edge list")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--task", eo.task, "task the samples come from")
      ->check(CLI::IsMember({"mixture2d", "mixture3d_to_2d", "mixture2d_to_3d", "scurve", "graph", "style"}));
  eval->add_option("--modes", eo.modes, "mixture mode count, recovered from the reference by k-means")
      ->check(CLI::Range(1, 8));
  eval->add_option("--knn-k", eo.knn_k, "neighborhood size for geodesics and overlap");
  eval->add_option("--community-size", eo.community_size, "graph nodes per contiguous community block");
  eval->add_option("--seed", eo.seed, "seed for clustering and the GW solve");
  eval->add_option("--out", eo.out, "write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  if (run->parsed()) return do_run(ro);
  return do_eval(eo);
}
