#include "gwgen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gwgen/error.hpp"
#include "json.hpp"

namespace gwgen {

namespace {

constexpr Index kMaxPermutedModes = 8;

double squared_distance(const Matrix& a, Index i, const Matrix& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Lloyd's algorithm from one k-means++ seeding.
KMeansResult kmeans_once(const Matrix& x, Index k, std::mt19937_64& rng, int max_iters) {
  const Index n = x.rows(), d = x.cols();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Index> seeds;
  seeds.push_back(std::uniform_int_distribution<Index>(0, n - 1)(rng));
  Vector nearest(n);
  for (Index i = 0; i < n; ++i) nearest[i] = squared_distance(x, i, x, seeds[0]);
  while (static_cast<Index>(seeds.size()) < k) {
    const double total = nearest.sum();
    if (!(total > 0.0)) break;  // every point coincides with a seed
    double target = u01(rng) * total;
    Index pick = n - 1;
    for (Index i = 0; i < n; ++i) {
      target -= nearest[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    seeds.push_back(pick);
    for (Index i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(x, i, x, pick));
  }

  KMeansResult r;
  r.centroids = Matrix::Constant(k, d, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < seeds.size(); ++c) r.centroids.row(static_cast<Index>(c)) = x.row(seeds[c]);
  r.labels.assign(static_cast<std::size_t>(n), -1);
  r.counts.assign(static_cast<std::size_t>(k), 0);

  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    r.inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      Index best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        if (std::isnan(r.centroids(c, 0))) continue;
        const double dc = squared_distance(x, i, r.centroids, c);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      r.inertia += best_d;
      if (r.labels[i] != best) {
        r.labels[i] = best;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(k, d);
    std::fill(r.counts.begin(), r.counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(r.labels[i]) += x.row(i);
      ++r.counts[r.labels[i]];
    }
    for (Index c = 0; c < k; ++c) {
      if (r.counts[c] > 0) r.centroids.row(c) = sums.row(c) / static_cast<double>(r.counts[c]);
      else r.centroids.row(c).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    if (!changed) break;
  }
  return r;
}

Matrix pairwise(const Matrix& pts) {
  const Index n = pts.rows();
  Matrix d(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  return d;
}

std::vector<Index> identity_order(Index k) {
  std::vector<Index> v(static_cast<std::size_t>(k));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

// Indices of the k smallest entries of `dist` other than `self`, ties by index.
std::vector<Index> nearest_k(const Vector& dist, Index self, Index k) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(dist.size()));
  for (Index j = 0; j < dist.size(); ++j)
    if (j != self) idx.push_back(j);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Index a, Index b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double jaccard(const std::vector<Index>& a, const std::vector<Index>& b) {
  std::vector<Index> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  const double inter = static_cast<double>(both.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

}  // namespace

KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, int restarts, int max_iters) {
  if (k < 1) throw InvalidInput("kmeans needs k >= 1");
  if (points.rows() < 1) throw InvalidInput("kmeans needs at least one point");
  if (!points.allFinite()) throw InvalidInput("kmeans: non-finite points");
  if (restarts < 1 || max_iters < 1) throw InvalidInput("kmeans: restarts and max_iters must be >= 1");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    KMeansResult cand = kmeans_once(points, k, rng, max_iters);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

Matrix RigidTransform::apply(const Matrix& points) const {
  return (points * rotation.transpose()).rowwise() + translation.transpose();
}

RigidTransform fit_rigid(const Matrix& source, const Matrix& target, const Vector& weights) {
  if (source.rows() != target.rows() || source.cols() != target.cols() ||
      weights.size() != source.rows())
    throw ShapeMismatch("fit_rigid: paired rows of equal dimension required");
  const double total = weights.sum();
  if (!(total > 0.0)) throw InvalidInput("fit_rigid: weights must have positive sum");
  const Vector w = weights / total;
  const Vector sc = source.transpose() * w;
  const Vector tc = target.transpose() * w;
  const Matrix s0 = source.rowwise() - sc.transpose();
  const Matrix t0 = target.rowwise() - tc.transpose();
  const Matrix h = s0.transpose() * w.asDiagonal() * t0;
  Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  RigidTransform out;
  out.rotation = svd.matrixV() * svd.matrixU().transpose();
  out.translation = tc - out.rotation * sc;
  return out;
}

double distance_correlation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw ShapeMismatch("distance_correlation: square matrices of equal size required");
  const Index n = a.rows();
  std::vector<double> xs, ys;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      xs.push_back(a(i, j));
      ys.push_back(b(i, j));
    }
  if (xs.size() < 2) return 0.0;
  const double cnt = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / cnt;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / cnt;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    sxy += (xs[t] - mx) * (ys[t] - my);
    sxx += (xs[t] - mx) * (xs[t] - mx);
    syy += (ys[t] - my) * (ys[t] - my);
  }
  const double scale_x = std::max(std::abs(mx), 1e-300), scale_y = std::max(std::abs(my), 1e-300);
  if (sxx <= 1e-20 * scale_x * scale_x * cnt || syy <= 1e-20 * scale_y * scale_y * cnt) return 0.0;
  if (!std::isfinite(sxy / std::sqrt(sxx * syy))) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double default_coverage_radius(const Matrix& centers) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < centers.rows(); ++i)
    for (Index j = i + 1; j < centers.rows(); ++j)
      best = std::min(best, (centers.row(i) - centers.row(j)).norm());
  if (!std::isfinite(best) || !(best > 0.0)) throw InvalidInput("need at least two distinct centers");
  return 0.5 * best;
}

MixtureEvaluation evaluate_mixture(const Matrix& generated, const Matrix& centers, double radius,
                                   std::uint64_t seed) {
  const Index k = centers.rows();
  if (k < 1) throw InvalidInput("evaluate_mixture needs at least one center");
  if (k > kMaxPermutedModes) throw InvalidInput("evaluate_mixture supports at most 8 modes");
  if (!(radius > 0.0)) throw InvalidInput("coverage radius must be positive");
  if (generated.rows() < k) throw InvalidInput("fewer generated samples than modes");
  const double n = static_cast<double>(generated.rows());

  const KMeansResult km = kmeans(generated, k, seed);
  std::vector<Index> valid;
  for (Index c = 0; c < k; ++c)
    if (km.counts[c] > 0) valid.push_back(c);
  const bool all_valid = static_cast<Index>(valid.size()) == k;
  const Matrix ref_dist = pairwise(centers);

  MixtureEvaluation out;
  out.coverage.assign(static_cast<std::size_t>(k), 0.0);

  // Best correlation over assignments of clusters to modes.
  std::vector<Index> perm = identity_order(k), best_corr_perm = perm;
  double best_corr = -std::numeric_limits<double>::infinity();
  if (all_valid) {
    const Matrix gen_dist = pairwise(km.centroids);
    do {
      Matrix permuted(k, k);
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) permuted(perm[i], perm[j]) = gen_dist(i, j);
      const double c = distance_correlation(permuted, ref_dist);
      if (c > best_corr) {
        best_corr = c;
        best_corr_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.centroid_distance_correlation = best_corr;
  }

  if (generated.cols() == centers.cols()) {
    Matrix src(static_cast<Index>(valid.size()), centers.cols());
    Vector w(static_cast<Index>(valid.size()));
    for (std::size_t v = 0; v < valid.size(); ++v) {
      src.row(static_cast<Index>(v)) = km.centroids.row(valid[v]);
      w[static_cast<Index>(v)] = static_cast<double>(km.counts[valid[v]]);
    }
    perm = identity_order(k);
    double best_res = std::numeric_limits<double>::infinity();
    RigidTransform best_tf;
    std::vector<Index> best_perm = perm;
    do {
      Matrix dst(src.rows(), centers.cols());
      for (std::size_t v = 0; v < valid.size(); ++v) dst.row(static_cast<Index>(v)) = centers.row(perm[valid[v]]);
      const RigidTransform tf = fit_rigid(src, dst, w);
      const double res = (w.asDiagonal() * (tf.apply(src) - dst).rowwise().squaredNorm()).sum();
      if (res < best_res) {
        best_res = res;
        best_tf = tf;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));

    const Matrix aligned = best_tf.apply(generated);
    for (Index i = 0; i < aligned.rows(); ++i) {
      Index nearest = 0;
      double nd = std::numeric_limits<double>::infinity();
      for (Index c = 0; c < k; ++c) {
        const double dc = (aligned.row(i) - centers.row(c)).norm();
        if (dc < nd) {
          nd = dc;
          nearest = c;
        }
      }
      if (nd <= radius) out.coverage[nearest] += 1.0 / n;
    }
    // Modes whose matched cluster came out empty count as uncovered.
    for (Index c = 0; c < k; ++c)
      if (km.counts[c] == 0) out.coverage[best_perm[c]] = 0.0;
  } else if (all_valid) {
    for (Index i = 0; i < generated.rows(); ++i) {
      const Index c = km.labels[i];
      if ((generated.row(i) - km.centroids.row(c)).norm() <= radius)
        out.coverage[best_corr_perm[c]] += 1.0 / n;
    }
  }
  return out;
}

std::vector<Index> match_rows(const Matrix& plan) {
  std::vector<Index> out(static_cast<std::size_t>(plan.rows()));
  for (Index i = 0; i < plan.rows(); ++i) plan.row(i).maxCoeff(&out[static_cast<std::size_t>(i)]);
  return out;
}

double knn_overlap(const DistanceMatrix& reference, const Matrix& generated,
                   const std::vector<Index>& match, Index k) {
  const Index n = reference.size();
  if (static_cast<Index>(match.size()) != n) throw ShapeMismatch("one match per reference point required");
  if (k < 1 || k >= n) throw InvalidInput("knn_overlap needs 1 <= k < n");
  for (Index j : match)
    if (j < 0 || j >= generated.rows()) throw InvalidInput("match index out of range");
  double total = 0.0;
  Vector gd(n);
  for (Index i = 0; i < n; ++i) {
    const auto ref_nbrs = nearest_k(reference.values().row(i).transpose(), i, k);
    for (Index j = 0; j < n; ++j) gd[j] = (generated.row(match[i]) - generated.row(match[j])).norm();
    total += jaccard(ref_nbrs, nearest_k(gd, i, k));
  }
  return total / static_cast<double>(n);
}

double knn_overlap_random_baseline(Index n, Index k, int trials, std::uint64_t seed) {
  if (k < 1 || k >= n || trials < 1) throw InvalidInput("invalid random-baseline parameters");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  std::vector<Index> pool;
  for (int t = 0; t < trials; ++t) {
    for (Index i = 0; i < n; ++i) {
      auto draw = [&] {
        pool.clear();
        for (Index j = 0; j < n; ++j)
          if (j != i) pool.push_back(j);
        for (Index a = 0; a < k; ++a) {
          std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(a), pool.size() - 1);
          std::swap(pool[static_cast<std::size_t>(a)], pool[pick(rng)]);
        }
        std::vector<Index> s(pool.begin(), pool.begin() + k);
        std::sort(s.begin(), s.end());
        return s;
      };
      const auto a = draw();
      total += jaccard(a, draw());
    }
  }
  return total / (static_cast<double>(n) * trials);
}

CommunitySeparation community_separation(const Matrix& generated, const std::vector<Index>& match,
                                         const std::vector<Index>& labels) {
  if (match.size() != labels.size()) throw ShapeMismatch("one label per matched point required");
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < match.size(); ++i)
    for (std::size_t j = i + 1; j < match.size(); ++j) {
      const double d = (generated.row(match[i]) - generated.row(match[j])).norm();
      if (labels[i] == labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  if (n_intra == 0 || n_inter == 0) throw InvalidInput("need both intra- and inter-community pairs");
  return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

std::string to_string(Task t) {
  switch (t) {
    case Task::mixture2d: return "mixture2d";
    case Task::mixture3d_to_2d: return "mixture3d_to_2d";
    case Task::mixture2d_to_3d: return "mixture2d_to_3d";
    case Task::scurve: return "scurve";
    case Task::graph: return "graph";
    case Task::style: return "style";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  for (Task t : {Task::mixture2d, Task::mixture3d_to_2d, Task::mixture2d_to_3d, Task::scurve,
                 Task::graph, Task::style})
    if (to_string(t) == s) return t;
  throw InvalidInput("unknown task: " + s);
}

bool is_mixture(Task t) {
  return t == Task::mixture2d || t == Task::mixture3d_to_2d || t == Task::mixture2d_to_3d;
}

EvalReport evaluate(const Matrix& generated, const ReferenceSpec& ref) {
  if (!generated.allFinite()) throw InvalidInput("generated samples are not finite");
  EvalReport rep;
  auto subsample_gw = [&](const Matrix& a, const Matrix& b) {
    const Index m = std::min({ref.gw_batch, a.rows(), b.rows()});
    if (m < 2) throw InvalidInput("need at least two samples on both sides for final_gw");
    const auto p = ProbabilityVector::uniform(m);
    return normalized_gw(pairwise_euclidean(a.topRows(m)), pairwise_euclidean(b.topRows(m)), p, p,
                         ref.gw)
        .raw_loss;
  };

  if (is_mixture(ref.task)) {
    if (generated.rows() < 1000) throw InvalidInput("mixture evaluation needs >= 1000 samples");
    const double radius = ref.radius > 0.0 ? ref.radius : default_coverage_radius(ref.centers);
    const MixtureEvaluation me = evaluate_mixture(generated, ref.centers, radius, ref.seed);
    rep.mode_coverage = me.coverage;
    rep.centroid_distance_correlation = me.centroid_distance_correlation;
    if (ref.samples.rows() > 0) rep.final_gw = subsample_gw(ref.samples, generated);
    return rep;
  }

  if (ref.task == Task::style) {
    if (ref.samples.rows() == 0) throw InvalidInput("style evaluation needs reference glyphs");
    rep.final_gw = subsample_gw(ref.samples, generated);
    return rep;
  }

  if (!ref.distances) throw InvalidInput("geodesic and graph evaluation need reference distances");
  const DistanceMatrix& dref = *ref.distances;
  const auto p = ProbabilityVector::uniform(dref.size());
  const auto q = ProbabilityVector::uniform(generated.rows());
  const NormalizedGw solved = normalized_gw(dref, pairwise_euclidean(generated), p, q, ref.gw);
  rep.final_gw = solved.raw_loss;
  const auto match = match_rows(solved.cross.coupling.plan);
  rep.knn_overlap = knn_overlap(dref, generated, match, ref.knn_k);
  if (ref.task == Task::graph && !ref.labels.empty()) {
    if (ref.labels.size() != static_cast<std::size_t>(dref.size()))
      throw ShapeMismatch("graph evaluation needs one community label per node");
    rep.separation = community_separation(generated, match, ref.labels);
  }
  return rep;
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::json j;
  j["mode_coverage"] = r.mode_coverage;
  j["centroid_distance_correlation"] = r.centroid_distance_correlation;
  j["knn_overlap"] = r.knn_overlap ? nlohmann::json(*r.knn_overlap) : nlohmann::json(nullptr);
  j["final_gw"] = r.final_gw;
  if (r.separation) {
    j["intra_community_distance"] = r.separation->intra;
    j["inter_community_distance"] = r.separation->inter;
  }
  if (r.mean_style_score) j["mean_style_score"] = *r.mean_style_score;
  return j.dump(2);
}

}  // namespace gwgen
