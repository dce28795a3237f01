#pragma once

// Adversary regularizers (orthogonal Procrustes, layerwise orthogonality) and
// generator shaping penalties (l1, total variation, style).

#include <functional>
#include <memory>

#include "gwgen/neural.hpp"
#include "gwgen/types.hpp"

namespace gwgen {

struct PenaltyResult {
  double value = 0.0;
  Matrix grad;  // shaped like the penalized quantity
};

struct ProcrustesSolution {
  Matrix map;  // s x d; P in min ||F - X P^T||_F
  bool converged = true;
  int iterations = 0;
};

/// Closest (semi-)orthogonal map from X (n x d) to F (n x s).
/// s == d uses the SVD closed form; otherwise projected gradient on the
/// residual with SVD retraction, started from the polar factor of F^T X.
ProcrustesSolution procrustes_project(const Matrix& f, const Matrix& x, int max_iters = 200,
                                      double tol = 1e-8);

/// beta ||F - X P*^T||_F^2 and its gradient in F with P* held fixed.
PenaltyResult procrustes_penalty(const Matrix& f, const Matrix& x, double beta);

enum class LayerwiseMode { full, offdiag };

struct LayerwisePenalty {
  double value = 0.0;
  GradientSet grad;  // weight gradients; bias entries are zero
};

/// sum_k beta ||G_k - I||_F^2 where G_k is the Gram matrix of W_k on its
/// smaller side (W^T W for tall, W W^T for wide); offdiag drops the diagonal.
LayerwisePenalty layerwise_orthogonality_penalty(const DenseNet& net, double beta, LayerwiseMode mode);

/// lambda * mean_b sum_i |y_bi|.
PenaltyResult l1_penalty(const Matrix& y, double lambda);

/// Anisotropic total variation of row-major h x w images stored one per row.
PenaltyResult tv_penalty(const Matrix& images, Index height, Index width, double lambda);

/// Pluggable differentiable style score c(y) in [0, 1].
class StyleAdversary {
 public:
  virtual ~StyleAdversary() = default;
  virtual Vector score(const Matrix& y) const = 0;
  /// Row b holds d score_b / d y_b.
  virtual Matrix score_grad(const Matrix& y) const = 0;
};

/// sigmoid(sharpness * mean intensity - threshold).
class ThicknessProxy final : public StyleAdversary {
 public:
  explicit ThicknessProxy(double threshold = 3.0, double sharpness = 10.0)
      : threshold_(threshold), sharpness_(sharpness) {}
  Vector score(const Matrix& y) const override;
  Matrix score_grad(const Matrix& y) const override;

  double threshold() const noexcept { return threshold_; }
  double sharpness() const noexcept { return sharpness_; }

 private:
  double threshold_;
  double sharpness_;
};

/// Closure-backed adversary, e.g. for a trained classifier.
class FunctionStyleAdversary final : public StyleAdversary {
 public:
  FunctionStyleAdversary(std::function<Vector(const Matrix&)> score,
                         std::function<Matrix(const Matrix&)> grad)
      : score_(std::move(score)), grad_(std::move(grad)) {}
  Vector score(const Matrix& y) const override { return score_(y); }
  Matrix score_grad(const Matrix& y) const override { return grad_(y); }

 private:
  std::function<Vector(const Matrix&)> score_;
  std::function<Matrix(const Matrix&)> grad_;
};

/// -lambda * mean_b c(y_b); throws InvalidInput if a score leaves [0, 1].
PenaltyResult style_penalty(const StyleAdversary& adversary, const Matrix& y, double lambda);

}  // namespace gwgen
