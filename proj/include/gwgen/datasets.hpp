#pragma once

// Synthetic reference distributions: Gaussian mixtures, the S-curve, community
// graphs and small glyph images.

#include <cstdint>
#include <random>
#include <vector>

#include "gwgen/metric_spaces.hpp"
#include "gwgen/types.hpp"

namespace gwgen {

struct GaussianMode {
  Vector center;
  double sigma = 0.1;
};

/// Validates a mode list: at least one mode, equal dimensions, sigma > 0.
void validate_modes(const std::vector<GaussianMode>& modes);

/// n samples; each picks a mode uniformly and adds isotropic N(0, sigma^2) noise.
PointCloud make_gaussian_mixture(const std::vector<GaussianMode>& modes, Index n, std::uint64_t seed);
/// Same distribution drawn from a caller-owned engine, optionally reporting labels.
Matrix draw_gaussian_mixture(const std::vector<GaussianMode>& modes, Index n, std::mt19937_64& rng,
                             std::vector<Index>* labels = nullptr);

Matrix mode_centers(const std::vector<GaussianMode>& modes);

/// t ~ U[-3pi/2, 3pi/2], y ~ U[0, 2], point (sin t, y, sign(t) (cos t - 1)).
PointCloud make_scurve(Index n, std::uint64_t seed);
/// As make_scurve, also returning the curve parameter t of every row.
PointCloud make_scurve(Index n, std::uint64_t seed, Vector* t);

/// Unit-weight stochastic block graph of `communities` blocks of `size`
/// nodes. Redraws up to 10 times until connected, then throws DisconnectedGraph.
WeightedGraph make_community_graph(int communities, Index size, double p_in, double p_out,
                                   std::uint64_t seed);
/// Block index of every node of make_community_graph.
std::vector<Index> community_labels(int communities, Index size);

/// 8x8 stroke glyphs (bars, diagonals, boxes, crosses) with intensities in
/// [0, 1], flattened row-major into 64 columns.
Matrix make_glyphs(Index n, std::uint64_t seed);
inline constexpr Index kGlyphSide = 8;

}  // namespace gwgen
