#include "gwgen/metric_spaces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "gwgen/error.hpp"
#include "gwgen/kernels.hpp"

namespace gwgen {

namespace {

constexpr double kSimplexTol = 1e-9;
constexpr double kSymmetryTol = 1e-9;
constexpr double kCoincident = 1e-12;

bool all_finite(const Matrix& m) { return m.allFinite(); }

// Union-find over node indices; returns the number of components.
std::size_t count_components(Index n, const std::vector<Edge>& edges) {
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::size_t components = static_cast<std::size_t>(n);
  for (const auto& e : edges) {
    const Index a = find(e.from), b = find(e.to);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
      --components;
    }
  }
  return components;
}

}  // namespace

ProbabilityVector::ProbabilityVector(Vector entries) : entries_(std::move(entries)) {
  if (entries_.size() == 0) throw InvalidInput("probability vector must be non-empty");
  if (!entries_.allFinite() || (entries_.array() < 0.0).any())
    throw InvalidInput("probability vector entries must be finite and nonnegative");
  if (std::abs(entries_.sum() - 1.0) > kSimplexTol)
    throw InvalidInput("probability vector must sum to 1, got " + std::to_string(entries_.sum()));
}

ProbabilityVector ProbabilityVector::uniform(Index n) {
  if (n < 1) throw InvalidInput("uniform distribution needs n >= 1");
  return ProbabilityVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

PointCloud::PointCloud(Matrix pts) : PointCloud(pts, ProbabilityVector::uniform(pts.rows())) {}

PointCloud::PointCloud(Matrix pts, ProbabilityVector w) : points(std::move(pts)), weights(std::move(w)) {
  if (points.rows() < 1) throw InvalidInput("point cloud needs at least one point");
  if (!all_finite(points)) throw InvalidInput("point cloud has non-finite coordinates");
  if (weights.size() != points.rows()) throw ShapeMismatch("weights length differs from point count");
}

DistanceMatrix::DistanceMatrix(Matrix values, double scale) : values_(std::move(values)), scale_(scale) {
  if (values_.rows() != values_.cols()) throw ShapeMismatch("distance matrix must be square");
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw InvalidInput("distance scale must be positive");
  if (!all_finite(values_)) throw InvalidInput("distance matrix has non-finite entries");
  const Index n = values_.rows();
  for (Index i = 0; i < n; ++i) {
    if (values_(i, i) != 0.0) throw InvalidInput("distance matrix diagonal must be zero");
    for (Index j = 0; j < n; ++j) {
      if (values_(i, j) < 0.0) throw InvalidInput("distance matrix has negative entries");
      if (j > i && std::abs(values_(i, j) - values_(j, i)) > kSymmetryTol)
        throw InvalidInput("distance matrix is not symmetric");
    }
  }
}

void WeightedGraph::validate() const {
  if (node_count < 1) throw InvalidInput("graph needs at least one node");
  for (const auto& e : edges) {
    if (e.from < 0 || e.to < 0 || e.from >= node_count || e.to >= node_count)
      throw InvalidInput("edge endpoint out of range");
    if (e.from == e.to) throw InvalidInput("self-loops are not allowed");
    if (!std::isfinite(e.weight) || e.weight <= 0.0)
      throw InvalidInput("edge weights must be finite and positive");
  }
}

std::size_t WeightedGraph::component_count() const { return count_components(node_count, edges); }

DistanceMatrix pairwise_euclidean(const Matrix& points) {
  if (points.rows() < 1) throw InvalidInput("pairwise_euclidean needs at least one point");
  if (!all_finite(points)) throw InvalidInput("pairwise_euclidean: non-finite input");
  return DistanceMatrix(kernels::parallel::pairwise_distances(points));
}

Matrix pairwise_euclidean_backward(const Matrix& points, const Matrix& upstream) {
  if (upstream.rows() != points.rows() || upstream.cols() != points.rows())
    throw ShapeMismatch("upstream must be n x n for n points");
  if (!all_finite(points) || !all_finite(upstream))
    throw InvalidInput("pairwise_euclidean_backward: non-finite input");
  return kernels::parallel::pairwise_distances_backward(points, upstream, kCoincident);
}

DistanceMatrix normalize_distances(const DistanceMatrix& d) {
  const Index n = d.size();
  double hi = 0.0;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j) hi = std::max(hi, d(i, j));
  if (hi == 0.0) return DistanceMatrix(d.values(), 1.0);
  return DistanceMatrix(d.values() / hi, hi);
}

WeightedGraph knn_graph(const Matrix& points, int k) {
  const Index n = points.rows();
  if (k < 1 || k >= n) throw InvalidInput("knn_graph requires 1 <= k < n");
  if (!all_finite(points)) throw InvalidInput("knn_graph: non-finite input");

  const Matrix dist = kernels::parallel::pairwise_distances(points);
  // adjacency[i][j] set when j is among the k nearest of i (or vice versa).
  std::vector<std::vector<char>> adjacent(static_cast<std::size_t>(n),
                                          std::vector<char>(static_cast<std::size_t>(n), 0));
  std::vector<Index> order(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    order.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
      return a < b;
    });
    for (int r = 0; r < k; ++r) {
      adjacent[i][order[r]] = 1;
      adjacent[order[r]][i] = 1;
    }
  }

  WeightedGraph g;
  g.node_count = n;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (adjacent[i][j]) {
        const double w = dist(i, j);
        if (w <= 0.0) throw InvalidInput("knn_graph: coincident points produce zero-weight edges");
        g.edges.push_back({i, j, w});
      }

  const std::size_t components = g.component_count();
  if (components > 1)
    throw DisconnectedGraph("knn graph has " + std::to_string(components) +
                                " components; increase k",
                            components);
  return g;
}

DistanceMatrix floyd_warshall(const WeightedGraph& g) {
  g.validate();
  const Index n = g.node_count;
  Matrix dist = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  dist.diagonal().setZero();
  for (const auto& e : g.edges) {
    dist(e.from, e.to) = std::min(dist(e.from, e.to), e.weight);
    dist(e.to, e.from) = std::min(dist(e.to, e.from), e.weight);
  }
  kernels::parallel::floyd_warshall(dist);
  if (!dist.allFinite()) {
    throw DisconnectedGraph("graph is disconnected; shortest paths undefined",
                            g.component_count());
  }
  return DistanceMatrix(std::move(dist));
}

WeightedGraph read_graph(std::istream& in) {
  WeightedGraph g;
  Index max_index = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    Index i = 0, j = 0;
    double w = 0.0;
    if (!(fields >> i)) continue;  // blank or comment-only line
    if (!(fields >> j >> w))
      throw InvalidInput("graph line " + std::to_string(line_no) + ": expected `i j weight`");
    std::string rest;
    if (fields >> rest)
      throw InvalidInput("graph line " + std::to_string(line_no) + ": trailing tokens");
    g.edges.push_back({i, j, w});
    max_index = std::max({max_index, i, j});
  }
  g.node_count = max_index + 1;
  g.validate();
  return g;
}

WeightedGraph read_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open graph file " + path.string());
  return read_graph(in);
}

void write_graph(std::ostream& out, const WeightedGraph& g) {
  out << "# nodes " << g.node_count << "\n";
  out << std::setprecision(17);
  for (const auto& e : g.edges) out << e.from << ' ' << e.to << ' ' << e.weight << '\n';
}

}  // namespace gwgen
