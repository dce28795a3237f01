#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gwgen/datasets.hpp"
#include "gwgen/error.hpp"
#include "gwgen/evaluation.hpp"

using namespace gwgen;

namespace {

std::vector<GaussianMode> square_modes(double sigma) {
  std::vector<GaussianMode> modes;
  for (int k = 0; k < 4; ++k) {
    Vector c(2);
    c << (k % 2 == 0 ? -2.0 : 2.0), (k < 2 ? -2.0 : 2.0);
    modes.push_back({c, sigma});
  }
  return modes;
}

}  // namespace

TEST_CASE("single narrow mode concentrates at its center") {
  const PointCloud pc = make_gaussian_mixture({{Vector::Zero(2), 0.01}}, 1000, 3);
  CHECK(pc.size() == 1000);
  CHECK(pc.dim() == 2);
  CHECK(pc.points.colwise().mean().norm() < 0.01);
}

TEST_CASE("mixture modes are chosen uniformly") {
  std::mt19937_64 rng(4);
  std::vector<Index> labels;
  const Index n = 4000;
  const Matrix x = draw_gaussian_mixture(square_modes(0.2), n, rng, &labels);
  std::vector<double> counts(4, 0.0);
  for (Index l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (double c : counts) CHECK(std::abs(c - n / 4.0) < 3.0 * sd);
  // Every sample sits near the mode it was drawn from.
  const Matrix centers = mode_centers(square_modes(0.2));
  for (Index i = 0; i < n; ++i) CHECK((x.row(i) - centers.row(labels[i])).norm() < 1.6);
}

TEST_CASE("mixtures are deterministic per seed") {
  const auto modes = square_modes(0.1);
  CHECK(make_gaussian_mixture(modes, 50, 9).points == make_gaussian_mixture(modes, 50, 9).points);
  CHECK(make_gaussian_mixture(modes, 50, 9).points != make_gaussian_mixture(modes, 50, 10).points);
}

TEST_CASE("mode validation") {
  CHECK_THROWS_AS(validate_modes({}), InvalidInput);
  CHECK_THROWS_AS(validate_modes({{Vector::Zero(2), 0.0}}), InvalidInput);
  CHECK_THROWS_AS(validate_modes({{Vector::Zero(2), 0.1}, {Vector::Zero(3), 0.1}}), ShapeMismatch);
  CHECK_THROWS_AS(make_gaussian_mixture({{Vector::Zero(2), -1.0}}, 5, 0), InvalidInput);
}

TEST_CASE("s-curve points lie on the generating surface") {
  Vector t;
  const PointCloud pc = make_scurve(500, 11, &t);
  CHECK(pc.size() == 500);
  CHECK(pc.dim() == 3);
  const Matrix& x = pc.points;
  for (Index i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(x(i, 0) * x(i, 0) + (std::abs(x(i, 2)) - 1.0) * (std::abs(x(i, 2)) - 1.0) - 1.0) <
          1e-12);
    CHECK(x(i, 0) == doctest::Approx(std::sin(t[i])));
    CHECK(x(i, 1) >= 0.0);
    CHECK(x(i, 1) <= 2.0);
    CHECK(std::abs(t[i]) <= 1.5 * M_PI);
  }
  CHECK(make_scurve(20, 11).points == make_scurve(20, 11).points);
  CHECK_THROWS_AS(make_scurve(0, 1), InvalidInput);
}

TEST_CASE("s-curve geodesics grow with the curve parameter") {
  Vector t;
  const PointCloud pc = make_scurve(500, 12, &t);
  const DistanceMatrix geo = floyd_warshall(knn_graph(pc.points, 10));
  const Index n = pc.size();
  Matrix dt(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) dt(i, j) = std::abs(t[i] - t[j]);
  CHECK(distance_correlation(geo.values(), dt) > 0.95);
}

TEST_CASE("community graphs") {
  SUBCASE("one dense community is complete") {
    const WeightedGraph g = make_community_graph(1, 9, 1.0, 0.0, 5);
    CHECK(g.node_count == 9);
    CHECK(g.edges.size() == 36);
  }
  SUBCASE("two blocks are closer inside than across") {
    const WeightedGraph g = make_community_graph(2, 30, 0.8, 0.05, 6);
    const DistanceMatrix d = floyd_warshall(g);
    const auto labels = community_labels(2, 30);
    double intra = 0, inter = 0;
    int ni = 0, nx = 0;
    for (Index i = 0; i < 60; ++i)
      for (Index j = i + 1; j < 60; ++j) {
        if (labels[i] == labels[j]) {
          intra += d(i, j);
          ++ni;
        } else {
          inter += d(i, j);
          ++nx;
        }
      }
    CHECK(intra / ni < inter / nx);
  }
  SUBCASE("same seed gives the same edges") {
    CHECK(make_community_graph(2, 20, 0.5, 0.05, 7).edges ==
          make_community_graph(2, 20, 0.5, 0.05, 7).edges);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(make_community_graph(2, 10, 0.1, 0.2, 1), InvalidInput);
    CHECK_THROWS_AS(make_community_graph(2, 10, 0.0, 0.0, 1), InvalidInput);
    CHECK_THROWS_AS(make_community_graph(0, 10, 0.5, 0.1, 1), InvalidInput);
    // No cross edges can ever appear, so every redraw stays split in two.
    try {
      make_community_graph(2, 5, 1.0, 0.0, 1);
      FAIL("expected DisconnectedGraph");
    } catch (const DisconnectedGraph& e) {
      CHECK(e.component_count() == 2);
    }
  }
  CHECK(community_labels(3, 2) == std::vector<Index>{0, 0, 1, 1, 2, 2});
}

TEST_CASE("glyphs are binary 8x8 strokes") {
  const Matrix g = make_glyphs(200, 13);
  CHECK(g.rows() == 200);
  CHECK(g.cols() == kGlyphSide * kGlyphSide);
  for (Index b = 0; b < g.rows(); ++b) {
    const double lit = g.row(b).sum();
    CHECK(lit >= 4.0);
    CHECK(lit <= 16.0);
    for (Index c = 0; c < g.cols(); ++c) CHECK((g(b, c) == 0.0 || g(b, c) == 1.0));
  }
  CHECK(make_glyphs(10, 13) == make_glyphs(10, 13));
  CHECK(make_glyphs(0, 1).rows() == 0);
}
