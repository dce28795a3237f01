#pragma once

// Data-parallel inner loops. Every kernel has an OpenMP version (`parallel`)
// and a single-threaded reference (`serial`). Both evaluate each output entry
// with the same sequence of floating-point operations, so their results are
// bitwise identical; the serial versions exist for tests and benchmarks.

#include "gwgen/types.hpp"

namespace gwgen::kernels {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace parallel {

/// D_ij = ||x_i - x_j||_2 for the rows of `points`.
Matrix pairwise_distances(const Matrix& points);
/// d/dx of sum_ij U_ij ||x_i - x_j||, skipping pairs closer than `min_distance`.
Matrix pairwise_distances_backward(const Matrix& points, const Matrix& upstream,
                                   double min_distance);
/// In-place all-pairs relaxation over a dense matrix (inf for missing edges).
void floyd_warshall(Matrix& dist);
/// K_ij = exp((f_i + g_j - C_ij) / eps), filled column by column.
Matrix gibbs_kernel(const Matrix& cost, const Vector& f, const Vector& g, double eps);
/// out_i = eps * log sum_j exp((f_i + g_j - C_ij) / eps)
Vector row_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps);
/// out_j = eps * log sum_i exp((f_i + g_j - C_ij) / eps)
Vector col_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps);
/// y = K x for row-major K.
Vector matvec(const RowMatrix& k, const Vector& x);
/// y = K^T x for column-major K.
Vector matvec_transposed(const Matrix& k, const Vector& x);

}  // namespace parallel

namespace serial {

Matrix pairwise_distances(const Matrix& points);
Matrix pairwise_distances_backward(const Matrix& points, const Matrix& upstream,
                                   double min_distance);
void floyd_warshall(Matrix& dist);
Matrix gibbs_kernel(const Matrix& cost, const Vector& f, const Vector& g, double eps);
Vector row_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps);
Vector col_lse(const Matrix& cost, const Vector& f, const Vector& g, double eps);
Vector matvec(const RowMatrix& k, const Vector& x);
Vector matvec_transposed(const Matrix& k, const Vector& x);

}  // namespace serial

}  // namespace gwgen::kernels
