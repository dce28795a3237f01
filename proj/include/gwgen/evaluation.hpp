#pragma once

// Numeric summaries of a generated cloud against its reference: mode coverage,
// centroid-distance agreement, neighborhood overlap and community separation.
// All of them are invariant to rigid motions of the generated samples.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gwgen/gw_core.hpp"
#include "gwgen/metric_spaces.hpp"
#include "gwgen/types.hpp"

namespace gwgen {

struct KMeansResult {
  Matrix centroids;             // k x d; rows of empty clusters are NaN
  std::vector<Index> labels;    // per sample
  std::vector<Index> counts;    // per cluster
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds; the best of `restarts` runs wins.
KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, int restarts = 8,
                    int max_iters = 100);

/// Orthogonal Q (reflections allowed) and translation t minimizing
/// sum_i w_i ||Q s_i + t - r_i||^2 over paired rows of equal dimension.
struct RigidTransform {
  Matrix rotation;
  Vector translation;
  Matrix apply(const Matrix& points) const;
};
RigidTransform fit_rigid(const Matrix& source, const Matrix& target, const Vector& weights);

struct MixtureEvaluation {
  std::vector<double> coverage;  // per reference mode
  double centroid_distance_correlation = 0.0;
};

/// k-means at the reference mode count, clusters matched to modes and, when
/// dimensions agree, the cloud rigidly aligned onto the centers. A mode's
/// coverage is the fraction of samples that land within `radius` of it
/// (after alignment) or of its matched centroid (across dimensions).
MixtureEvaluation evaluate_mixture(const Matrix& generated, const Matrix& centers, double radius,
                                   std::uint64_t seed = 0);

/// Pearson correlation of the upper triangles; 0 if either side is constant.
double distance_correlation(const Matrix& a, const Matrix& b);

/// Row argmax of a coupling.
std::vector<Index> match_rows(const Matrix& plan);

/// Mean Jaccard overlap of the k-neighborhoods of every reference point under
/// the reference distances and under the generated Euclidean distances of
/// the points matched to them.
double knn_overlap(const DistanceMatrix& reference, const Matrix& generated,
                   const std::vector<Index>& match, Index k = 10);

/// Chance level of knn_overlap: the same statistic for uniformly random
/// neighborhoods, averaged over `trials` shuffles.
double knn_overlap_random_baseline(Index n, Index k, int trials, std::uint64_t seed);

struct CommunitySeparation {
  double intra = 0.0;  // mean distance between matched points of the same block
  double inter = 0.0;
};
CommunitySeparation community_separation(const Matrix& generated, const std::vector<Index>& match,
                                         const std::vector<Index>& labels);

enum class Task { mixture2d, mixture3d_to_2d, mixture2d_to_3d, scurve, graph, style };
std::string to_string(Task t);
Task task_from_string(const std::string& s);
bool is_mixture(Task t);

/// What the generated cloud is compared against.
struct ReferenceSpec {
  Task task = Task::mixture2d;
  Matrix centers;                       // mixtures
  double radius = 0.0;                  // mixtures; <= 0 picks half the smallest center gap
  Matrix samples;                       // reference draws with features, if any
  std::optional<DistanceMatrix> distances;  // reference metric for geodesic and graph tasks
  std::vector<Index> labels;            // graph communities
  Index knn_k = 10;
  GwConfig gw;
  Index gw_batch = 256;                 // subsample for final_gw on feature tasks
  std::uint64_t seed = 0;
};

struct EvalReport {
  std::vector<double> mode_coverage;
  double centroid_distance_correlation = 0.0;
  std::optional<double> knn_overlap;
  double final_gw = 0.0;
  std::optional<CommunitySeparation> separation;
  std::optional<double> mean_style_score;
};

EvalReport evaluate(const Matrix& generated, const ReferenceSpec& ref);

std::string eval_report_json(const EvalReport& r);

/// Half of the smallest distance between two distinct centers.
double default_coverage_radius(const Matrix& centers);

}  // namespace gwgen
