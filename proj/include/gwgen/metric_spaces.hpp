#pragma once

// Intra-space distance structures: point clouds, graphs and the distance
// matrices built from them.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gwgen/types.hpp"

namespace gwgen {

/// Nonnegative weights summing to one (within 1e-9).
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(Vector entries);

  static ProbabilityVector uniform(Index n);

  const Vector& entries() const noexcept { return entries_; }
  Index size() const noexcept { return entries_.size(); }
  double operator[](Index i) const { return entries_[i]; }

 private:
  Vector entries_;
};

struct PointCloud {
  Matrix points;  // n x d, one sample per row
  ProbabilityVector weights;

  PointCloud() = default;
  explicit PointCloud(Matrix pts);
  PointCloud(Matrix pts, ProbabilityVector w);

  Index size() const noexcept { return points.rows(); }
  Index dim() const noexcept { return points.cols(); }
};

/// Square, symmetric, zero-diagonal, nonnegative matrix of distances.
/// `scale` is the factor the values were divided by (1 when unnormalized).
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  /// Validates the invariants; throws InvalidInput on violation.
  explicit DistanceMatrix(Matrix values, double scale = 1.0);

  const Matrix& values() const noexcept { return values_; }
  double scale() const noexcept { return scale_; }
  Index size() const noexcept { return values_.rows(); }
  double operator()(Index i, Index j) const { return values_(i, j); }

  /// Values multiplied back by `scale`.
  Matrix original() const { return values_ * scale_; }

 private:
  Matrix values_;
  double scale_ = 1.0;
};

struct Edge {
  Index from;
  Index to;
  double weight;
};

inline bool operator==(const Edge& a, const Edge& b) {
  return a.from == b.from && a.to == b.to && a.weight == b.weight;
}

struct WeightedGraph {
  Index node_count = 0;
  std::vector<Edge> edges;

  /// Throws InvalidInput for out-of-range nodes, self-loops or bad weights.
  void validate() const;
  /// Number of connected components (isolated nodes count).
  std::size_t component_count() const;
};

DistanceMatrix pairwise_euclidean(const Matrix& points);

/// Gradient of sum_ij upstream_ij * D_ij with respect to the points.
/// Pairs closer than 1e-12 contribute nothing.
Matrix pairwise_euclidean_backward(const Matrix& points, const Matrix& upstream);

/// Divides by the largest off-diagonal entry and records it in `scale`.
/// An all-zero matrix comes back unchanged with scale 1.
DistanceMatrix normalize_distances(const DistanceMatrix& d);

/// Symmetrized k-nearest-neighbor graph weighted by Euclidean distance.
/// Throws DisconnectedGraph when the result has more than one component.
WeightedGraph knn_graph(const Matrix& points, int k);

/// All-pairs shortest paths. Throws DisconnectedGraph if any pair is unreachable.
DistanceMatrix floyd_warshall(const WeightedGraph& g);

/// Edge-list text format: `i j weight` per line, `#` starts a comment.
WeightedGraph read_graph(std::istream& in);
WeightedGraph read_graph_file(const std::filesystem::path& path);
void write_graph(std::ostream& out, const WeightedGraph& g);

}  // namespace gwgen
