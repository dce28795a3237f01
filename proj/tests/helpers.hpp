#pragma once

// Reference implementations and numeric utilities shared by the test suites.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gwgen/types.hpp"

namespace gwgen::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = scale * n01(rng);
  return m;
}

inline Matrix random_symmetric(Index n, std::mt19937_64& rng) {
  const Matrix a = random_matrix(n, n, rng);
  return 0.5 * (a + a.transpose());
}

/// Haar-distributed orthogonal matrix via QR with sign correction.
inline Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  const Matrix a = random_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

/// Euclidean distances by an explicit double loop.
inline Matrix distance_loop(const Matrix& x) {
  const Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Index c = 0; c < x.cols(); ++c) acc += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      d(i, j) = std::sqrt(acc);
    }
  return d;
}

/// sum_ijkl (D_ik - Dbar_jl)^2 / 2 * T_ij T_kl by brute force.
inline double gw_quadruple_loop(const Matrix& d, const Matrix& dbar, const Matrix& t) {
  long double acc = 0.0L;
  for (Index i = 0; i < d.rows(); ++i)
    for (Index j = 0; j < dbar.rows(); ++j)
      for (Index k = 0; k < d.rows(); ++k)
        for (Index l = 0; l < dbar.rows(); ++l) {
          const long double diff = d(i, k) - dbar(j, l);
          acc += 0.5L * diff * diff * t(i, j) * t(k, l);
        }
  return static_cast<double>(acc);
}

/// Central differences of a scalar function of a matrix argument.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * h);
    }
  return g;
}

/// Symmetric perturbations D + h (E_ij + E_ji), for functions of distance matrices.
inline Matrix symmetric_finite_difference(const std::function<double(const Matrix&)>& f,
                                          const Matrix& x, double h = 1e-6) {
  const Index n = x.rows();
  Matrix g = Matrix::Zero(n, n);
  Matrix probe = x;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      probe(i, j) = probe(j, i) = x(i, j) + h;
      const double up = f(probe);
      probe(i, j) = probe(j, i) = x(i, j) - h;
      const double down = f(probe);
      probe(i, j) = probe(j, i) = x(i, j);
      // The perturbation moves two entries, each carrying half.
      g(i, j) = g(j, i) = (up - down) / (4.0 * h);
    }
  return g;
}

/// Distance matrices have a pinned zero diagonal, so gradients are compared off it.
inline Matrix off_diagonal(Matrix m) {
  m.diagonal().setZero();
  return m;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / denom;
}

/// Plain-domain Sinkhorn in long double, for small well-conditioned problems.
inline Matrix naive_sinkhorn(const Matrix& cost, const Vector& a, const Vector& b, double eps,
                             int iters = 20000) {
  const Index n = cost.rows(), m = cost.cols();
  std::vector<long double> k(static_cast<std::size_t>(n * m)), u(n, 1.0L), v(m, 1.0L);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) k[i * m + j] = std::exp(-static_cast<long double>(cost(i, j)) / eps);
  for (int it = 0; it < iters; ++it) {
    for (Index i = 0; i < n; ++i) {
      long double s = 0.0L;
      for (Index j = 0; j < m; ++j) s += k[i * m + j] * v[j];
      u[i] = a[i] / s;
    }
    for (Index j = 0; j < m; ++j) {
      long double s = 0.0L;
      for (Index i = 0; i < n; ++i) s += k[i * m + j] * u[i];
      v[j] = b[j] / s;
    }
  }
  Matrix t(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) t(i, j) = static_cast<double>(u[i] * k[i * m + j] * v[j]);
  return t;
}

/// Residual of F against X P^T.
inline double procrustes_residual(const Matrix& f, const Matrix& x, const Matrix& p) {
  return (f - x * p.transpose()).norm();
}

}  // namespace gwgen::testing
