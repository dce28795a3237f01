#include "gwgen/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwgen/error.hpp"

namespace gwgen {

namespace {

// Nearest matrix with orthonormal rows or columns (whichever is the smaller side).
Matrix polar_factor(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

ProcrustesSolution procrustes_project(const Matrix& f, const Matrix& x, int max_iters, double tol) {
  if (f.rows() != x.rows()) throw ShapeMismatch("Procrustes: F and X need the same row count");
  if (!f.allFinite() || !x.allFinite()) throw InvalidInput("Procrustes: non-finite input");
  const Index s = f.cols(), d = x.cols();
  if (f.rows() < std::max(s, d)) throw InvalidInput("Procrustes: need n >= max(s, d)");

  const Matrix cross = f.transpose() * x;  // s x d
  ProcrustesSolution sol;
  sol.map = polar_factor(cross);
  if (s >= d) {
    // With P^T P = I the quadratic term ||X P^T||^2 is constant, so the polar
    // factor of F^T X is optimal (the classical closed form when s == d).
    return sol;
  }

  // s < d: minimize ||F - X P^T||^2 over P P^T = I by projected gradient.
  const Matrix gram = x.transpose() * x;  // d x d
  const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0)) return sol;
  const double step = 1.0 / lipschitz;
  sol.converged = false;
  for (int it = 1; it <= max_iters; ++it) {
    const Matrix grad = 2.0 * (sol.map * gram - cross);
    Matrix next = polar_factor(sol.map - step * grad);
    const double change = (next - sol.map).norm();
    sol.map = std::move(next);
    sol.iterations = it;
    if (change < tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

PenaltyResult procrustes_penalty(const Matrix& f, const Matrix& x, double beta) {
  const ProcrustesSolution sol = procrustes_project(f, x);
  const Matrix residual = f - x * sol.map.transpose();
  return {beta * residual.squaredNorm(), 2.0 * beta * residual};
}

LayerwisePenalty layerwise_orthogonality_penalty(const DenseNet& net, double beta,
                                                 LayerwiseMode mode) {
  LayerwisePenalty out;
  out.grad = GradientSet::zeros_like(net);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const Matrix& w = net.layer(k).weight;
    const bool tall = w.rows() >= w.cols();
    Matrix dev = tall ? Matrix(w.transpose() * w) : Matrix(w * w.transpose());
    if (mode == LayerwiseMode::full) {
      dev -= Matrix::Identity(dev.rows(), dev.cols());
    } else {
      dev.diagonal().setZero();
    }
    out.value += beta * dev.squaredNorm();
    out.grad.layers[k].weight = 4.0 * beta * (tall ? Matrix(w * dev) : Matrix(dev * w));
  }
  return out;
}

PenaltyResult l1_penalty(const Matrix& y, double lambda) {
  const double batch = static_cast<double>(std::max<Index>(y.rows(), 1));
  PenaltyResult out;
  out.value = lambda * y.cwiseAbs().sum() / batch;
  out.grad = y.unaryExpr([](double v) { return sign(v); }) * (lambda / batch);
  return out;
}

PenaltyResult tv_penalty(const Matrix& images, Index height, Index width, double lambda) {
  if (height < 2 || width < 2) throw InvalidInput("tv_penalty needs images of at least 2x2");
  if (images.cols() != height * width)
    throw ShapeMismatch("tv_penalty: row length differs from height * width");
  const double batch = static_cast<double>(std::max<Index>(images.rows(), 1));
  const double scale = lambda / batch;
  PenaltyResult out;
  out.grad = Matrix::Zero(images.rows(), images.cols());
  double total = 0.0;
  for (Index b = 0; b < images.rows(); ++b) {
    auto pix = [&](Index r, Index c) { return r * width + c; };
    auto add_diff = [&](Index to, Index from) {
      const double diff = images(b, to) - images(b, from);
      total += std::abs(diff);
      out.grad(b, to) += scale * sign(diff);
      out.grad(b, from) -= scale * sign(diff);
    };
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c + 1 < width; ++c) add_diff(pix(r, c + 1), pix(r, c));
    for (Index r = 0; r + 1 < height; ++r)
      for (Index c = 0; c < width; ++c) add_diff(pix(r + 1, c), pix(r, c));
  }
  out.value = scale * total;
  return out;
}

Vector ThicknessProxy::score(const Matrix& y) const {
  const Vector z = (sharpness_ * y.rowwise().mean()).array() - threshold_;
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix ThicknessProxy::score_grad(const Matrix& y) const {
  const Vector s = score(y);
  const double per_pixel = sharpness_ / static_cast<double>(std::max<Index>(y.cols(), 1));
  Matrix g(y.rows(), y.cols());
  for (Index b = 0; b < y.rows(); ++b) g.row(b).setConstant(s[b] * (1.0 - s[b]) * per_pixel);
  return g;
}

PenaltyResult style_penalty(const StyleAdversary& adversary, const Matrix& y, double lambda) {
  const Vector scores = adversary.score(y);
  if (scores.size() != y.rows()) throw ShapeMismatch("style adversary returned wrong score count");
  if (!scores.allFinite() || (scores.array() < 0.0).any() || (scores.array() > 1.0).any())
    throw InvalidInput("style scores must lie in [0, 1]");
  const double batch = static_cast<double>(std::max<Index>(y.rows(), 1));
  PenaltyResult out;
  out.value = -lambda * scores.sum() / batch;
  if (lambda == 0.0) {
    out.grad = Matrix::Zero(y.rows(), y.cols());
    return out;
  }
  Matrix g = adversary.score_grad(y);
  if (g.rows() != y.rows() || g.cols() != y.cols())
    throw ShapeMismatch("style adversary gradient has the wrong shape");
  if (!g.allFinite()) throw InvalidInput("style adversary gradient is not finite");
  out.grad = (-lambda / batch) * g;
  return out;
}

}  // namespace gwgen
