#pragma once

// Config-driven experiment runner: dataset synthesis, training, sample dumps
// and evaluation for each supported task.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gwgen/datasets.hpp"
#include "gwgen/evaluation.hpp"
#include "gwgen/trainer.hpp"

namespace gwgen {

struct DatasetParams {
  std::vector<GaussianMode> modes;  // mixture tasks; empty selects the task default
  Index scurve_points = 500;
  int knn_k = 10;
  std::string graph_file;  // graph task; empty generates a community graph
  int communities = 2;
  Index community_size = 40;
  double p_in = 0.8;
  double p_out = 0.05;
  Index glyph_count = 2000;
};

struct StyleParams {
  double lambda = 1.0;
  double threshold = 3.0;
  double sharpness = 10.0;
};

struct ExperimentConfig {
  Task task = Task::mixture2d;
  DatasetParams data;
  TrainConfig train;
  double l1 = 0.0;  // generator l1 weight; 0 disables
  double tv = 0.0;  // generator total-variation weight (style task)
  StyleParams style;
  Index hidden = 128;
  Index eval_samples = 1000;
  std::filesystem::path out_dir;  // empty: nothing is written

  /// Throws InvalidInput on missing or inconsistent task parameters.
  void validate() const;
};

/// Task defaults for mixtures: four modes on a 4 x 4 square in 2D, an
/// irregular tetrahedron-like layout in 3D.
std::vector<GaussianMode> default_modes(Task task);

/// Data dimension and generator output dimension of a task.
Index data_dim(const ExperimentConfig& cfg);
Index output_dim(const ExperimentConfig& cfg);

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field, defaults included, in the format parse_config accepts.
std::string resolved_config_json(const ExperimentConfig& cfg);

/// Reference material built from the config: the sampler the trainer draws
/// from and what evaluation compares against.
struct PreparedTask {
  std::unique_ptr<DataSampler> sampler;
  ReferenceSpec reference;
};
PreparedTask prepare_task(const ExperimentConfig& cfg);

struct ExperimentOutputs {
  TrainResult train;
  std::map<int, Matrix> snapshots;  // checkpoint iteration -> eval_samples generated rows
  EvalReport eval;
};

/// Trains and evaluates; writes artifacts when cfg.out_dir is set.
ExperimentOutputs run_experiment(const ExperimentConfig& cfg);
/// Same with an explicit starting state (e.g. resumed training).
ExperimentOutputs run_experiment(const ExperimentConfig& cfg, TrainState initial);

/// Prints a diagnostic to `err` and returns nonzero on failure.
int run(const ExperimentConfig& cfg, std::ostream& err);

/// Header `dim0,dim1,...`, one sample per row, 9 significant digits.
void write_samples_csv(std::ostream& out, const Matrix& samples);
void write_samples_csv(const std::filesystem::path& path, const Matrix& samples);
Matrix read_samples_csv(std::istream& in);
Matrix read_samples_csv(const std::filesystem::path& path);

/// Noise batch reused at every checkpoint so dumps are comparable over time.
Matrix checkpoint_noise(const ExperimentConfig& cfg);

}  // namespace gwgen
