#include "gwgen/kernels.hpp"

#include <cmath>
#include <limits>

namespace gwgen::kernels {

namespace detail {

// Per-entry helpers shared by both variants so the arithmetic is identical.

inline double row_distance(const Matrix& p, Index i, Index j) {
  double acc = 0.0;
  for (Index c = 0; c < p.cols(); ++c) {
    const double diff = p(i, c) - p(j, c);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

inline void distance_row(const Matrix& p, Matrix& out, Index i) {
  for (Index j = 0; j < p.rows(); ++j) {
    out(i, j) = (i == j) ? 0.0 : row_distance(p, std::min(i, j), std::max(i, j));
  }
}

inline void backward_row(const Matrix& p, const Matrix& u, double min_distance, Matrix& out,
                         Index i) {
  for (Index j = 0; j < p.rows(); ++j) {
    if (j == i) continue;
    const double w = u(i, j) + u(j, i);
    if (w == 0.0) continue;
    const double dist = row_distance(p, std::min(i, j), std::max(i, j));
    if (dist < min_distance) continue;
    const double s = w / dist;
    for (Index c = 0; c < p.cols(); ++c) out(i, c) += s * (p(i, c) - p(j, c));
  }
}

inline void relax_row(Matrix& d, Index k, Index i) {
  const double dik = d(i, k);
  if (!std::isfinite(dik)) return;
  for (Index j = 0; j < d.cols(); ++j) {
    const double via = dik + d(k, j);
    if (via < d(i, j)) d(i, j) = via;
  }
}

inline void gibbs_col(const Matrix& c, const Vector& f, const Vector& g, double eps, Matrix& out,
                      Index j) {
  out.col(j) = ((f.array() + g[j] - c.col(j).array()) / eps).exp();
}

inline double lse_row(const Matrix& c, const Vector& f, const Vector& g, double eps, Index i) {
  const Eigen::ArrayXd z = ((f[i] + g.array() - c.row(i).transpose().array()) / eps);
  const double hi = z.maxCoeff();
  if (!std::isfinite(hi)) return eps * hi;
  return eps * (hi + std::log((z - hi).exp().sum()));
}

inline double lse_col(const Matrix& c, const Vector& f, const Vector& g, double eps, Index j) {
  const Eigen::ArrayXd z = ((f.array() + g[j] - c.col(j).array()) / eps);
  const double hi = z.maxCoeff();
  if (!std::isfinite(hi)) return eps * hi;
  return eps * (hi + std::log((z - hi).exp().sum()));
}

}  // namespace detail

namespace parallel {

Matrix pairwise_distances(const Matrix& points) {
  const Index n = points.rows();
  Matrix out(n, n);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) detail::distance_row(points, out, i);
  return out;
}

Matrix pairwise_distances_backward(const Matrix& points, const Matrix& upstream,
                                   double min_distance) {
  Matrix out = Matrix::Zero(points.rows(), points.cols());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < points.rows(); ++i)
    detail::backward_row(points, upstream, min_distance, out, i);
  return out;
}

void floyd_warshall(Matrix& dist) {
  const Index n = dist.rows();
  for (Index k = 0; k < n; ++k) {
    // Row k and column k are fixed points of iteration k, so rows are independent.
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) detail::relax_row(dist, k, i);
  }
}

Matrix gibbs_kernel(const Matrix& cost, const Vector& f, const Vector& g, double eps) {
  Matrix out(cost.rows(), cost.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < cost.cols(); ++j) detail::gibbs_col(cost, f, g, eps, out, j);
  return out;
}

Vector row_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps) {
  Vector out(cost.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < cost.rows(); ++i) out[i] = detail::lse_row(cost, f, g, eps, i);
  return out;
}

Vector col_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps) {
  Vector out(cost.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < cost.cols(); ++j) out[j] = detail::lse_col(cost, f, g, eps, j);
  return out;
}

Vector matvec(const RowMatrix& k, const Vector& x) {
  Vector out(k.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < k.rows(); ++i) out[i] = k.row(i).dot(x.transpose());
  return out;
}

Vector matvec_transposed(const Matrix& k, const Vector& x) {
  Vector out(k.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < k.cols(); ++j) out[j] = k.col(j).dot(x);
  return out;
}

}  // namespace parallel

namespace serial {

Matrix pairwise_distances(const Matrix& points) {
  const Index n = points.rows();
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) detail::distance_row(points, out, i);
  return out;
}

Matrix pairwise_distances_backward(const Matrix& points, const Matrix& upstream,
                                   double min_distance) {
  Matrix out = Matrix::Zero(points.rows(), points.cols());
  for (Index i = 0; i < points.rows(); ++i)
    detail::backward_row(points, upstream, min_distance, out, i);
  return out;
}

void floyd_warshall(Matrix& dist) {
  const Index n = dist.rows();
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i) detail::relax_row(dist, k, i);
}

Matrix gibbs_kernel(const Matrix& cost, const Vector& f, const Vector& g, double eps) {
  Matrix out(cost.rows(), cost.cols());
  for (Index j = 0; j < cost.cols(); ++j) detail::gibbs_col(cost, f, g, eps, out, j);
  return out;
}

Vector row_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps) {
  Vector out(cost.rows());
  for (Index i = 0; i < cost.rows(); ++i) out[i] = detail::lse_row(cost, f, g, eps, i);
  return out;
}

Vector col_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps) {
  Vector out(cost.cols());
  for (Index j = 0; j < cost.cols(); ++j) out[j] = detail::lse_col(cost, f, g, eps, j);
  return out;
}

Vector matvec(const RowMatrix& k, const Vector& x) {
  Vector out(k.rows());
  for (Index i = 0; i < k.rows(); ++i) out[i] = k.row(i).dot(x.transpose());
  return out;
}

Vector matvec_transposed(const Matrix& k, const Vector& x) {
  Vector out(k.cols());
  for (Index j = 0; j < k.cols(); ++j) out[j] = k.col(j).dot(x);
  return out;
}

}  // namespace serial

}  // namespace gwgen::kernels
