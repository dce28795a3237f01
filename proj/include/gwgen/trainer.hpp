#pragma once

// Alternating generator / adversary optimization of the normalized entropic
// GW objective between data and generated intra-space distances.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwgen/gw_core.hpp"
#include "gwgen/metric_spaces.hpp"
#include "gwgen/neural.hpp"
#include "gwgen/regularizers.hpp"

namespace gwgen {

using Rng = std::mt19937_64;

/// One reference minibatch: raw features, precomputed distances, or both.
struct DataBatch {
  std::optional<Matrix> features;
  std::optional<Matrix> distances;
};

class DataSampler {
 public:
  virtual ~DataSampler() = default;
  virtual DataBatch sample(Index m, Rng& rng) const = 0;
  /// Feature dimension, or 0 when only distances are available.
  virtual Index feature_dim() const = 0;
};

/// Fresh draws from a callable distribution on every call.
class FunctionSampler final : public DataSampler {
 public:
  FunctionSampler(std::function<Matrix(Index, Rng&)> draw, Index dim)
      : draw_(std::move(draw)), dim_(dim) {}
  DataBatch sample(Index m, Rng& rng) const override;
  Index feature_dim() const override { return dim_; }

 private:
  std::function<Matrix(Index, Rng&)> draw_;
  Index dim_;
};

/// Subsets of a finite reference set with a precomputed distance matrix
/// (graph geodesics, k-NN geodesics). Batches draw without replacement.
class PrecomputedSampler final : public DataSampler {
 public:
  PrecomputedSampler(DistanceMatrix distances, std::optional<Matrix> features = std::nullopt);
  DataBatch sample(Index m, Rng& rng) const override;
  Index feature_dim() const override { return features_ ? features_->cols() : 0; }
  Index size() const noexcept { return distances_.size(); }

 private:
  DistanceMatrix distances_;
  std::optional<Matrix> features_;
};

enum class AdversaryMode { learned, identity };

enum class OrthMode { procrustes, layerwise_full, layerwise_offdiag, saxe_init_only };

std::string to_string(OrthMode m);
OrthMode orth_mode_from_string(const std::string& s);

enum class PenaltyKind { l1, tv, style };

struct GeneratorPenalty {
  PenaltyKind kind = PenaltyKind::l1;
  double lambda = 0.0;
  int start_iteration = 0;  // inactive before this iteration
  Index tv_height = 0;      // tv only
  Index tv_width = 0;
};

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  int n_g = 3;
  Index batch = 256;
  int iterations = 3000;
  GwConfig gw;
  double beta = 1.0;
  std::vector<GeneratorPenalty> gen_penalties;
  AdversaryMode adversary_mode = AdversaryMode::learned;
  int freeze_after = -1;  // < 0: never freeze
  OrthMode orth_mode = OrthMode::procrustes;
  Index noise_dim = 16;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  double divergence_threshold = 1e6;
  std::shared_ptr<const StyleAdversary> style;

  void validate() const;
};

enum class StepKind { generator, adversary };

/// Alternation between generator and adversary updates: one adversary step in
/// every n_g + 1 consecutive iterations.
StepKind adversary_schedule(int t, int n_g);

/// Networks and optimizer states being trained.
struct TrainState {
  DenseNet generator;
  AdamState generator_opt;
  std::optional<DenseNet> adversary;  // shared by both branches unless generated_adversary is set
  AdamState adversary_opt;
  std::optional<DenseNet> generated_adversary;
  AdamState generated_adversary_opt;
};

/// Builds default architectures, all orthogonally initialized: generator
/// noise -> 128 -> 128 -> out and, when `learned`, adversary in -> 128 -> 128 -> in.
/// Unequal data and output dimensions get a second adversary for the
/// generated branch.
TrainState make_train_state(const TrainConfig& cfg, Index data_dim, Index output_dim, bool learned,
                            Index hidden = 128);

struct IterationRecord {
  int iteration = 0;
  StepKind step = StepKind::generator;
  double gw_loss = 0.0;           // normalized raw cost, original-scale distances
  double gw_entropic_loss = 0.0;  // same combination of the entropic objective values
  double adversary_reg = 0.0;
  std::map<std::string, double> penalties;
  double marginal_violation = 0.0;
  double feature_stretch = 0.0;  // max feature distance / max input distance, data branch
  double wall_ms = 0.0;
};

struct MetricsLog {
  std::vector<IterationRecord> records;
  void append(IterationRecord r) { records.push_back(std::move(r)); }
};

std::string to_json_line(const IterationRecord& r);
void write_jsonl(std::ostream& out, const MetricsLog& log);

/// Raised on NaN or diverged loss; carries the last checkpointed state.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, int iteration, TrainState checkpoint, int checkpoint_iteration)
      : std::runtime_error(what), iteration_(iteration), checkpoint_(std::move(checkpoint)),
        checkpoint_iteration_(checkpoint_iteration) {}
  int iteration() const noexcept { return iteration_; }
  const TrainState& checkpoint() const noexcept { return checkpoint_; }
  int checkpoint_iteration() const noexcept { return checkpoint_iteration_; }

 private:
  int iteration_;
  TrainState checkpoint_;
  int checkpoint_iteration_;
};

struct TrainResult {
  TrainState state;
  MetricsLog log;
};

/// Called after every `checkpoint_every` iterations and after the last one.
using CheckpointHook = std::function<void(int iteration, const TrainState&)>;

TrainResult train(TrainState state, const DataSampler& sampler, const TrainConfig& cfg,
                  const CheckpointHook& hook = {});

/// Intra-space distances of a batch in the space the GW loss sees.
struct BranchFeatures {
  Matrix inputs;                    // raw samples
  Matrix features;                  // adversary output, or inputs in identity mode
  std::optional<Tape> adversary_tape;
  DistanceMatrix distances;
};

BranchFeatures embed_branch(const Matrix& inputs, const DenseNet* adversary);

/// dL/dY for the generated batch Y with all couplings frozen, chained through
/// the generated-branch distances and, if present, the adversary.
Matrix gw_output_gradient(const DistanceMatrix& data_distances, const BranchFeatures& generated,
                          const NormalizedGw& solved, const DenseNet* adversary);

/// Solves the normalized loss for (data, generated) and assembles dL/dtheta.
GradientSet generator_gw_gradient(const DenseNet& generator, const Tape& generator_tape,
                                  const DistanceMatrix& data_distances, const Matrix& y,
                                  const DenseNet* adversary, const GwConfig& cfg,
                                  NormalizedGw* solved_out = nullptr);

/// Generated samples from fixed noise, batch x output_dim.
Matrix sample_noise(Index m, Index noise_dim, Rng& rng);
Matrix generate(const DenseNet& generator, Index m, Rng& rng);

}  // namespace gwgen
