#pragma once

// Small dense feedforward networks with exact reverse-mode gradients and Adam.
// Batches are stored one sample per row.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gwgen/types.hpp"

namespace gwgen {

enum class Activation { identity, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  Index in_dim() const noexcept { return weight.cols(); }
  Index out_dim() const noexcept { return weight.rows(); }
};

class DenseNet {
 public:
  DenseNet() = default;
  /// Layer widths `dims[0] -> dims[1] -> ...`; ReLU between layers, identity
  /// on the last one. Parameters start at zero; call orthogonal_init.
  explicit DenseNet(const std::vector<Index>& dims);
  explicit DenseNet(std::vector<DenseLayer> layers);

  Index input_dim() const;
  Index output_dim() const;
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const;

  const DenseLayer& layer(std::size_t k) const { return layers_.at(k); }
  /// Mutable access invalidates outstanding tapes.
  DenseLayer& mutable_layer(std::size_t k);
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Bumped on every parameter mutation; tapes record it.
  std::uint64_t version() const noexcept { return version_; }
  void touch() noexcept { ++version_; }

  bool operator==(const DenseNet& other) const;

 private:
  void check_chain() const;

  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

/// Per-layer gradients shaped like the owning network's parameters.
struct LayerGradient {
  Matrix weight;
  Vector bias;
};

struct GradientSet {
  std::vector<LayerGradient> layers;

  static GradientSet zeros_like(const DenseNet& net);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
  double squared_norm() const;
  bool all_finite() const;
};

/// Activations cached by forward for use in backward.
struct Tape {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> preactivations;  // X W^T + b for each layer
  std::uint64_t net_version = 0;
  const void* net_identity = nullptr;
};

struct ForwardResult {
  Matrix output;
  Tape tape;
};

/// Replaces every weight with the semi-orthogonal factor of a seeded Gaussian
/// draw and zeroes the biases.
void orthogonal_init(DenseNet& net, std::uint64_t seed);

ForwardResult forward(const DenseNet& net, const Matrix& x);
/// Output only, no tape.
Matrix predict(const DenseNet& net, const Matrix& x);

struct BackwardResult {
  GradientSet grads;
  Matrix input_grad;
};

/// Gradients of sum(upstream .* Y) for the forward pass recorded in `tape`.
BackwardResult backward(const DenseNet& net, const Tape& tape, const Matrix& upstream);

enum class StepDirection { descend, ascend };

struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double eps_hat = 1e-8;
  std::uint64_t step = 0;
  GradientSet first_moment;
  GradientSet second_moment;

  static AdamState for_net(const DenseNet& net, double lr = 2e-4, double beta1 = 0.5,
                           double beta2 = 0.99, double eps_hat = 1e-8);
  bool operator==(const AdamState& other) const;
};

/// One bias-corrected Adam update. `ascend` moves along +grad.
void adam_step(DenseNet& net, const GradientSet& grads, AdamState& state, StepDirection direction);

// Checkpoints. The binary form is versioned and bit-exact; JSON is for humans.
struct Checkpoint {
  DenseNet net;
  bool has_optimizer = false;
  AdamState optimizer;
};

void save_checkpoint(std::ostream& out, const DenseNet& net, const AdamState* optimizer = nullptr);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::filesystem::path& path, const DenseNet& net,
                          const AdamState* optimizer = nullptr);
Checkpoint load_checkpoint_file(const std::filesystem::path& path);
std::string checkpoint_json(const DenseNet& net, const AdamState* optimizer = nullptr);

}  // namespace gwgen
