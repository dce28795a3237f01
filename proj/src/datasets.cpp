#include "gwgen/datasets.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gwgen/error.hpp"

namespace gwgen {

void validate_modes(const std::vector<GaussianMode>& modes) {
  if (modes.empty()) throw InvalidInput("a mixture needs at least one mode");
  const Index dim = modes.front().center.size();
  if (dim < 1) throw InvalidInput("mode centers must be nonempty");
  for (const auto& m : modes) {
    if (m.center.size() != dim) throw ShapeMismatch("mode centers differ in dimension");
    if (!m.center.allFinite()) throw InvalidInput("mode center is not finite");
    if (!(m.sigma > 0.0) || !std::isfinite(m.sigma)) throw InvalidInput("mode sigma must be positive");
  }
}

Matrix draw_gaussian_mixture(const std::vector<GaussianMode>& modes, Index n, std::mt19937_64& rng,
                             std::vector<Index>* labels) {
  validate_modes(modes);
  if (n < 0) throw InvalidInput("sample count must be nonnegative");
  const Index dim = modes.front().center.size();
  std::uniform_int_distribution<std::size_t> pick(0, modes.size() - 1);
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix out(n, dim);
  if (labels) labels->assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    if (labels) (*labels)[static_cast<std::size_t>(i)] = static_cast<Index>(k);
    for (Index c = 0; c < dim; ++c) out(i, c) = modes[k].center[c] + modes[k].sigma * n01(rng);
  }
  return out;
}

PointCloud make_gaussian_mixture(const std::vector<GaussianMode>& modes, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return PointCloud(draw_gaussian_mixture(modes, n, rng));
}

Matrix mode_centers(const std::vector<GaussianMode>& modes) {
  validate_modes(modes);
  Matrix c(static_cast<Index>(modes.size()), modes.front().center.size());
  for (std::size_t k = 0; k < modes.size(); ++k) c.row(static_cast<Index>(k)) = modes[k].center.transpose();
  return c;
}

PointCloud make_scurve(Index n, std::uint64_t seed) { return make_scurve(n, seed, nullptr); }

PointCloud make_scurve(Index n, std::uint64_t seed, Vector* t_out) {
  if (n < 1) throw InvalidInput("make_scurve needs n >= 1");
  std::mt19937_64 rng(seed);
  const double half = 1.5 * std::numbers::pi;
  std::uniform_real_distribution<double> ut(-half, half), uy(0.0, 2.0);
  Matrix pts(n, 3);
  Vector ts(n);
  for (Index i = 0; i < n; ++i) {
    const double t = ut(rng);
    const double y = uy(rng);
    const double sgn = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    ts[i] = t;
    pts(i, 0) = std::sin(t);
    pts(i, 1) = y;
    pts(i, 2) = sgn * (std::cos(t) - 1.0);
  }
  if (t_out) *t_out = ts;
  return PointCloud(std::move(pts));
}

std::vector<Index> community_labels(int communities, Index size) {
  std::vector<Index> labels;
  labels.reserve(static_cast<std::size_t>(communities * size));
  for (int c = 0; c < communities; ++c)
    for (Index i = 0; i < size; ++i) labels.push_back(c);
  return labels;
}

WeightedGraph make_community_graph(int communities, Index size, double p_in, double p_out,
                                   std::uint64_t seed) {
  if (communities < 1 || size < 1) throw InvalidInput("need at least one community of one node");
  if (!(p_in > 0.0 && p_in <= 1.0)) throw InvalidInput("p_in must lie in (0, 1]");
  if (!(p_out >= 0.0 && p_out <= 1.0)) throw InvalidInput("p_out must lie in [0, 1]");
  if (communities > 1 && !(p_in > p_out)) throw InvalidInput("p_in must exceed p_out");

  const auto labels = community_labels(communities, size);
  const Index n = static_cast<Index>(labels.size());
  constexpr int kAttempts = 10;
  std::size_t components = 0;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    WeightedGraph g;
    g.node_count = n;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double p = labels[i] == labels[j] ? p_in : p_out;
        if (u01(rng) < p) g.edges.push_back({i, j, 1.0});
      }
    components = g.component_count();
    if (components == 1) return g;
  }
  throw DisconnectedGraph("community graph stayed disconnected after " + std::to_string(kAttempts) +
                              " draws",
                          components);
}

Matrix make_glyphs(Index n, std::uint64_t seed) {
  if (n < 0) throw InvalidInput("glyph count must be nonnegative");
  constexpr Index s = kGlyphSide;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kind(0, 4);
  Matrix out = Matrix::Zero(n, s * s);
  for (Index b = 0; b < n; ++b) {
    auto set = [&](Index r, Index c) { out(b, r * s + c) = 1.0; };
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    switch (kind(rng)) {
      case 0: {  // horizontal bar
        const int r = uniform(1, 6), len = uniform(4, 6), c0 = uniform(1, 7 - len);
        for (int c = c0; c < c0 + len; ++c) set(r, c);
        break;
      }
      case 1: {  // vertical bar
        const int c = uniform(1, 6), len = uniform(4, 6), r0 = uniform(1, 7 - len);
        for (int r = r0; r < r0 + len; ++r) set(r, c);
        break;
      }
      case 2: {  // diagonal, either direction
        const int len = uniform(4, 6), o = uniform(1, 7 - len);
        const bool anti = uniform(0, 1) == 1;
        for (int k = 0; k < len; ++k) set(o + k, anti ? 7 - (o + k) : o + k);
        break;
      }
      case 3: {  // box outline
        const int side = uniform(3, 5), r0 = uniform(1, 7 - side), c0 = uniform(1, 7 - side);
        for (int k = 0; k < side; ++k) {
          set(r0, c0 + k);
          set(r0 + side - 1, c0 + k);
          set(r0 + k, c0);
          set(r0 + k, c0 + side - 1);
        }
        break;
      }
      default: {  // plus sign
        const int r = uniform(2, 5), c = uniform(2, 5);
        for (int k = -2; k <= 2; ++k) {
          if (c + k >= 0 && c + k < s) set(r, c + k);
          if (r + k >= 0 && r + k < s) set(r + k, c);
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace gwgen
