#include "gwgen/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "gwgen/error.hpp"
#include "json.hpp"

namespace gwgen {

using nlohmann::json;

namespace {

GaussianMode mode(std::initializer_list<double> c, double sigma) {
  GaussianMode m;
  m.center = Vector(static_cast<Index>(c.size()));
  Index i = 0;
  for (double v : c) m.center[i++] = v;
  m.sigma = sigma;
  return m;
}

// Reads an object while rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(where_ + " must be a JSON object");
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw InvalidInput("unknown key '" + it.key() + "' in " + where_);
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput(where_ + "." + key + ": " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string adversary_name(const TrainConfig& t) {
  return t.adversary_mode == AdversaryMode::learned ? "learned" : "identity";
}

json gw_json(const GwConfig& g) {
  return {{"epsilon", g.epsilon},           {"outer_iters", g.outer_iters},
          {"sinkhorn_iters", g.sinkhorn_iters}, {"sinkhorn_tol", g.sinkhorn_tol},
          {"absorption_threshold", g.absorption_threshold}, {"outer_tol", g.outer_tol},
          {"init_jitter", g.init_jitter}};
}

void read_gw(const json& j, GwConfig& g) {
  Reader r(j, "train.gw");
  r.get("epsilon", g.epsilon);
  r.get("outer_iters", g.outer_iters);
  r.get("sinkhorn_iters", g.sinkhorn_iters);
  r.get("sinkhorn_tol", g.sinkhorn_tol);
  r.get("absorption_threshold", g.absorption_threshold);
  r.get("outer_tol", g.outer_tol);
  r.get("init_jitter", g.init_jitter);
  r.finish();
}

// Rebuilds the generator penalty list from the scalar weights.
void apply_penalties(ExperimentConfig& cfg) {
  auto& pens = cfg.train.gen_penalties;
  pens.clear();
  if (cfg.l1 > 0.0) pens.push_back({PenaltyKind::l1, cfg.l1, 0, 0, 0});
  if (cfg.tv > 0.0) pens.push_back({PenaltyKind::tv, cfg.tv, 0, kGlyphSide, kGlyphSide});
  cfg.train.style.reset();
  if (cfg.task == Task::style && cfg.style.lambda > 0.0) {
    cfg.train.style = std::make_shared<ThicknessProxy>(cfg.style.threshold, cfg.style.sharpness);
    pens.push_back({PenaltyKind::style, cfg.style.lambda, cfg.train.iterations / 2, 0, 0});
  }
}

Matrix sample_rows(const Matrix& pool, Index m, Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, pool.rows() - 1);
  Matrix out(m, pool.cols());
  for (Index i = 0; i < m; ++i) out.row(i) = pool.row(pick(rng));
  return out;
}

}  // namespace

std::vector<GaussianMode> default_modes(Task task) {
  switch (task) {
    case Task::mixture2d:
      return {mode({0, 0}, 0.3), mode({4, 0}, 0.3), mode({0, 4}, 0.3), mode({4, 4}, 0.3)};
    case Task::mixture3d_to_2d:
      return {mode({0, 0, 0}, 0.3), mode({4, 0, 1}, 0.3), mode({0, 4, -1}, 0.3), mode({4, 4, 2}, 0.3)};
    case Task::mixture2d_to_3d:
      return {mode({0, 0}, 0.3), mode({5, 0}, 0.3), mode({0, 3}, 0.3), mode({4, 5}, 0.3)};
    default:
      return {};
  }
}

Index data_dim(const ExperimentConfig& cfg) {
  switch (cfg.task) {
    case Task::mixture2d:
    case Task::mixture3d_to_2d:
    case Task::mixture2d_to_3d:
      return cfg.data.modes.empty() ? default_modes(cfg.task).front().center.size()
                                    : cfg.data.modes.front().center.size();
    case Task::scurve: return 3;
    case Task::graph: return 0;
    case Task::style: return kGlyphSide * kGlyphSide;
  }
  return 0;
}

Index output_dim(const ExperimentConfig& cfg) {
  switch (cfg.task) {
    case Task::mixture2d: return data_dim(cfg);
    case Task::mixture3d_to_2d: return 2;
    case Task::mixture2d_to_3d: return 3;
    case Task::scurve: return 2;
    case Task::graph: return 2;
    case Task::style: return kGlyphSide * kGlyphSide;
  }
  return 0;
}

void ExperimentConfig::validate() const {
  train.validate();
  if (hidden < 1) throw InvalidInput("hidden width must be positive");
  if (eval_samples < 2) throw InvalidInput("eval.samples must be >= 2");
  if (is_mixture(task)) {
    if (!data.modes.empty()) validate_modes(data.modes);
    const Index d = data_dim(*this);
    if (task == Task::mixture3d_to_2d && d != 3) throw InvalidInput("mixture3d_to_2d needs 3D modes");
    if (task == Task::mixture2d_to_3d && d != 2) throw InvalidInput("mixture2d_to_3d needs 2D modes");
    if (eval_samples < 1000) throw InvalidInput("mixture evaluation needs eval.samples >= 1000");
  }
  if (task == Task::scurve) {
    if (data.scurve_points < 3) throw InvalidInput("scurve_points must be >= 3");
    if (data.knn_k < 1 || data.knn_k >= data.scurve_points) throw InvalidInput("knn_k out of range");
    if (train.batch > data.scurve_points) throw InvalidInput("batch exceeds the S-curve sample count");
  }
  if (task == Task::graph) {
    if (train.adversary_mode == AdversaryMode::learned)
      throw InvalidInput("graph task has no features for a learned adversary; use identity");
    if (!data.graph_file.empty() && !std::filesystem::exists(data.graph_file))
      throw InvalidInput("graph file does not exist: " + data.graph_file);
  }
  if (train.adversary_mode == AdversaryMode::learned && train.orth_mode == OrthMode::procrustes &&
      train.batch < std::max(data_dim(*this), output_dim(*this)))
    throw InvalidInput("Procrustes needs a batch at least as large as the feature dimension");
  if (task == Task::style && data.glyph_count < 2) throw InvalidInput("glyph_count must be >= 2");
  if (l1 < 0.0 || tv < 0.0 || style.lambda < 0.0) throw InvalidInput("penalty weights must be nonnegative");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  {
    Reader r(root, "config");
    std::string task;
    r.get("task", task);
    if (task.empty()) throw InvalidInput("config.task is required");
    cfg.task = task_from_string(task);
    std::uint64_t seed = 0;
    r.get("seed", seed);
    cfg.train.seed = seed;
    std::string out_dir;
    r.get("out_dir", out_dir);
    cfg.out_dir = out_dir;

    if (const json* d = r.child("dataset")) {
      Reader dr(*d, "dataset");
      if (const json* modes = dr.child("modes")) {
        if (!modes->is_array()) throw InvalidInput("dataset.modes must be an array");
        for (const auto& mj : *modes) {
          Reader mr(mj, "dataset.modes[]");
          std::vector<double> c;
          GaussianMode gm;
          mr.get("center", c);
          mr.get("sigma", gm.sigma);
          mr.finish();
          gm.center = Eigen::Map<const Vector>(c.data(), static_cast<Index>(c.size()));
          cfg.data.modes.push_back(gm);
        }
      }
      dr.get("scurve_points", cfg.data.scurve_points);
      dr.get("knn_k", cfg.data.knn_k);
      dr.get("graph_file", cfg.data.graph_file);
      dr.get("communities", cfg.data.communities);
      dr.get("community_size", cfg.data.community_size);
      dr.get("p_in", cfg.data.p_in);
      dr.get("p_out", cfg.data.p_out);
      dr.get("glyph_count", cfg.data.glyph_count);
      dr.finish();
    }
    if (const json* t = r.child("train")) {
      Reader tr(*t, "train");
      auto& tc = cfg.train;
      tr.get("iterations", tc.iterations);
      tr.get("batch", tc.batch);
      tr.get("lr", tc.lr);
      tr.get("beta1", tc.beta1);
      tr.get("beta2", tc.beta2);
      tr.get("n_g", tc.n_g);
      tr.get("beta", tc.beta);
      std::string adv = adversary_name(tc);
      tr.get("adversary", adv);
      if (adv == "learned") tc.adversary_mode = AdversaryMode::learned;
      else if (adv == "identity") tc.adversary_mode = AdversaryMode::identity;
      else throw InvalidInput("train.adversary must be 'learned' or 'identity'");
      tr.get("freeze_after", tc.freeze_after);
      std::string orth = to_string(tc.orth_mode);
      tr.get("orth_mode", orth);
      tc.orth_mode = orth_mode_from_string(orth);
      tr.get("noise_dim", tc.noise_dim);
      tr.get("checkpoint_every", tc.checkpoint_every);
      tr.get("divergence_threshold", tc.divergence_threshold);
      tr.get("hidden", cfg.hidden);
      if (const json* g = tr.child("gw")) read_gw(*g, tc.gw);
      tr.finish();
    }
    if (const json* p = r.child("penalties")) {
      Reader pr(*p, "penalties");
      pr.get("l1", cfg.l1);
      pr.get("tv", cfg.tv);
      if (const json* s = pr.child("style")) {
        Reader sr(*s, "penalties.style");
        sr.get("lambda", cfg.style.lambda);
        sr.get("threshold", cfg.style.threshold);
        sr.get("sharpness", cfg.style.sharpness);
        sr.finish();
      }
      pr.finish();
    }
    if (const json* e = r.child("eval")) {
      Reader er(*e, "eval");
      er.get("samples", cfg.eval_samples);
      er.finish();
    }
    r.finish();
  }
  cfg.train.gw.seed = cfg.train.seed;
  apply_penalties(cfg);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  json modes = json::array();
  for (const auto& m : cfg.data.modes.empty() ? default_modes(cfg.task) : cfg.data.modes)
    modes.push_back({{"center", std::vector<double>(m.center.data(), m.center.data() + m.center.size())},
                     {"sigma", m.sigma}});
  const auto& t = cfg.train;
  json root = {
      {"task", to_string(cfg.task)},
      {"seed", t.seed},
      {"out_dir", cfg.out_dir.string()},
      {"dataset",
       {{"modes", modes},
        {"scurve_points", cfg.data.scurve_points},
        {"knn_k", cfg.data.knn_k},
        {"graph_file", cfg.data.graph_file},
        {"communities", cfg.data.communities},
        {"community_size", cfg.data.community_size},
        {"p_in", cfg.data.p_in},
        {"p_out", cfg.data.p_out},
        {"glyph_count", cfg.data.glyph_count}}},
      {"train",
       {{"iterations", t.iterations},
        {"batch", t.batch},
        {"lr", t.lr},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"n_g", t.n_g},
        {"beta", t.beta},
        {"adversary", adversary_name(t)},
        {"freeze_after", t.freeze_after},
        {"orth_mode", to_string(t.orth_mode)},
        {"noise_dim", t.noise_dim},
        {"checkpoint_every", t.checkpoint_every},
        {"divergence_threshold", t.divergence_threshold},
        {"hidden", cfg.hidden},
        {"gw", gw_json(t.gw)}}},
      {"penalties",
       {{"l1", cfg.l1},
        {"tv", cfg.tv},
        {"style", {{"lambda", cfg.style.lambda}, {"threshold", cfg.style.threshold},
                   {"sharpness", cfg.style.sharpness}}}}},
      {"eval", {{"samples", cfg.eval_samples}}}};
  return root.dump(2);
}

PreparedTask prepare_task(const ExperimentConfig& cfg) {
  PreparedTask out;
  ReferenceSpec& ref = out.reference;
  ref.task = cfg.task;
  ref.gw = cfg.train.gw;
  ref.knn_k = cfg.data.knn_k;
  ref.seed = cfg.train.seed;
  const std::uint64_t data_seed = cfg.train.seed + 1000003;

  if (is_mixture(cfg.task)) {
    const auto modes = cfg.data.modes.empty() ? default_modes(cfg.task) : cfg.data.modes;
    ref.centers = mode_centers(modes);
    ref.radius = default_coverage_radius(ref.centers);
    ref.samples = make_gaussian_mixture(modes, 256, data_seed).points;
    out.sampler = std::make_unique<FunctionSampler>(
        [modes](Index m, Rng& rng) { return draw_gaussian_mixture(modes, m, rng); },
        ref.centers.cols());
  } else if (cfg.task == Task::scurve) {
    PointCloud pts = make_scurve(cfg.data.scurve_points, data_seed);
    DistanceMatrix geo = floyd_warshall(knn_graph(pts.points, cfg.data.knn_k));
    ref.samples = pts.points;
    ref.distances = geo;
    out.sampler = std::make_unique<PrecomputedSampler>(geo, pts.points);
  } else if (cfg.task == Task::graph) {
    WeightedGraph g;
    if (!cfg.data.graph_file.empty()) {
      g = read_graph_file(cfg.data.graph_file);
    } else {
      g = make_community_graph(cfg.data.communities, cfg.data.community_size, cfg.data.p_in,
                               cfg.data.p_out, data_seed);
      ref.labels = community_labels(cfg.data.communities, cfg.data.community_size);
    }
    DistanceMatrix geo = floyd_warshall(g);
    if (cfg.train.batch > geo.size()) throw InvalidInput("batch exceeds the graph node count");
    ref.distances = geo;
    out.sampler = std::make_unique<PrecomputedSampler>(geo);
  } else {
    Matrix pool = make_glyphs(cfg.data.glyph_count, data_seed);
    ref.samples = pool;
    out.sampler = std::make_unique<FunctionSampler>(
        [pool](Index m, Rng& rng) { return sample_rows(pool, m, rng); }, pool.cols());
  }
  return out;
}

Matrix checkpoint_noise(const ExperimentConfig& cfg) {
  Rng rng(cfg.train.seed ^ 0xC0FFEE1234567ULL);
  return sample_noise(cfg.eval_samples, cfg.train.noise_dim, rng);
}

ExperimentOutputs run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool learned = cfg.train.adversary_mode == AdversaryMode::learned;
  TrainState init = make_train_state(cfg.train, data_dim(cfg), output_dim(cfg), learned, cfg.hidden);
  return run_experiment(cfg, std::move(init));
}

ExperimentOutputs run_experiment(const ExperimentConfig& cfg, TrainState initial) {
  cfg.validate();
  PreparedTask task = prepare_task(cfg);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream(cfg.out_dir / "config_resolved.json") << resolved_config_json(cfg) << '\n';
  }

  ExperimentOutputs out;
  const Matrix noise = checkpoint_noise(cfg);
  auto dump = [&](int iteration, const TrainState& s) {
    Matrix y = predict(s.generator, noise);
    if (!cfg.out_dir.empty())
      write_samples_csv(cfg.out_dir / ("samples_iter" + std::to_string(iteration) + ".csv"), y);
    out.snapshots[iteration] = std::move(y);
  };
  dump(0, initial);

  auto write_metrics = [&](const MetricsLog& log) {
    if (cfg.out_dir.empty()) return;
    std::ofstream m(cfg.out_dir / "metrics.jsonl");
    write_jsonl(m, log);
  };
  try {
    out.train = train(std::move(initial), *task.sampler, cfg.train, dump);
  } catch (const TrainingAborted& e) {
    if (!cfg.out_dir.empty())
      save_checkpoint_file(cfg.out_dir / "generator_last_good.ckpt", e.checkpoint().generator,
                           &e.checkpoint().generator_opt);
    throw;
  }
  write_metrics(out.train.log);
  if (!cfg.out_dir.empty())
    save_checkpoint_file(cfg.out_dir / "generator.ckpt", out.train.state.generator,
                         &out.train.state.generator_opt);

  // Geodesic and graph tasks match one generated point per reference point.
  Matrix eval_samples = out.snapshots.rbegin()->second;
  if (task.reference.distances) {
    Rng rng(cfg.train.seed ^ 0xEA1ULL);
    eval_samples = generate(out.train.state.generator, task.reference.distances->size(), rng);
  }
  out.eval = evaluate(eval_samples, task.reference);
  if (cfg.task == Task::style) {
    const ThicknessProxy proxy(cfg.style.threshold, cfg.style.sharpness);
    out.eval.mean_style_score = proxy.score(out.snapshots.rbegin()->second).mean();
  }
  if (!cfg.out_dir.empty()) std::ofstream(cfg.out_dir / "eval.json") << eval_report_json(out.eval) << '\n';
  return out;
}

int run(const ExperimentConfig& cfg, std::ostream& err) {
  try {
    run_experiment(cfg);
    return 0;
  } catch (const TrainingAborted& e) {
    err << "error: " << e.what() << " (last good checkpoint at iteration " << e.checkpoint_iteration()
        << ")\n";
    return 3;
  } catch (const InvalidInput& e) {
    err << "error: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

void write_samples_csv(std::ostream& out, const Matrix& samples) {
  for (Index c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << "dim" << c;
  out << '\n' << std::setprecision(9);
  for (Index r = 0; r < samples.rows(); ++r) {
    for (Index c = 0; c < samples.cols(); ++c) out << (c ? "," : "") << samples(r, c);
    out << '\n';
  }
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_samples_csv(out, samples);
}

Matrix read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty CSV");
  const Index cols = std::count(line.begin(), line.end(), ',') + 1;
  if (line.rfind("dim0", 0) != 0) throw InvalidInput("CSV header must start with dim0");
  std::vector<double> vals;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput("CSV row " + std::to_string(rows + 1) + ": bad number '" + cell + "'");
      }
      ++c;
    }
    if (c != cols) throw InvalidInput("CSV row " + std::to_string(rows + 1) + " has the wrong width");
    ++rows;
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = vals[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Matrix read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return read_samples_csv(in);
}

}  // namespace gwgen
