#include "gwgen/gw_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwgen/error.hpp"
#include "gwgen/kernels.hpp"

namespace gwgen {

namespace {

namespace par = kernels::parallel;

void check_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeMismatch(std::string(what) + " must be square");
}

void check_plan_shape(const Matrix& d, const Matrix& dbar, const Matrix& plan) {
  check_square(d, "D");
  check_square(dbar, "Dbar");
  if (plan.rows() != d.rows() || plan.cols() != dbar.rows())
    throw ShapeMismatch("coupling shape " + std::to_string(plan.rows()) + "x" +
                        std::to_string(plan.cols()) + " incompatible with distance sizes " +
                        std::to_string(d.rows()) + " and " + std::to_string(dbar.rows()));
}

// splitmix64 finalizer; deterministic hash used for the initial perturbation.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Symmetric in (i, j) so that transposing the problem transposes the start.
double pair_noise(std::uint64_t seed, Index i, Index j) {
  const auto lo = static_cast<std::uint64_t>(std::min(i, j));
  const auto hi = static_cast<std::uint64_t>(std::max(i, j));
  const std::uint64_t h = mix(mix(seed ^ mix(lo)) ^ hi);
  return 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
}

Matrix jittered_independence(const Vector& p, const Vector& q, double jitter,
                             std::uint64_t seed) {
  Matrix t = p * q.transpose();
  if (jitter == 0.0) return t;
  for (Index j = 0; j < t.cols(); ++j)
    for (Index i = 0; i < t.rows(); ++i) t(i, j) *= 1.0 + jitter * pair_noise(seed, i, j);
  return t;
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Kernel scaled by u on the left and v on the right.
Matrix scaled_plan(const Matrix& k, const Vector& u, const Vector& v) {
  return u.asDiagonal() * k * v.asDiagonal();
}

// Lexicographic ordering of metric-measure pairs, used to orient the cross
// term of the normalized loss so that swapping the arguments is exact.
bool canonical_before(const DistanceMatrix& a, const ProbabilityVector& pa,
                      const DistanceMatrix& b, const ProbabilityVector& pb) {
  if (a.size() != b.size()) return a.size() < b.size();
  const Matrix na = normalize_distances(a).values();
  const Matrix nb = normalize_distances(b).values();
  for (Index k = 0; k < na.size(); ++k)
    if (na.data()[k] != nb.data()[k]) return na.data()[k] < nb.data()[k];
  for (Index k = 0; k < pa.size(); ++k)
    if (pa[k] != pb[k]) return pa[k] < pb[k];
  if (a.scale() != b.scale()) return a.scale() < b.scale();
  for (Index k = 0; k < a.values().size(); ++k)
    if (a.values().data()[k] != b.values().data()[k])
      return a.values().data()[k] < b.values().data()[k];
  return true;
}

GwResult transpose_result(GwResult r) {
  r.coupling = r.coupling.transposed();
  return r;
}

// Gradient of E_{A,A}(T) with respect to A appearing in both slots.
Matrix self_term_grad(const Matrix& a, const Matrix& plan) {
  return gw_grad_dbar(a, a, plan) + gw_grad_d(a, a, plan);
}

}  // namespace

double Coupling::max_marginal_violation() const {
  const double rows = max_abs(plan.rowwise().sum() - row_marginal.entries());
  const double cols = max_abs(plan.colwise().sum().transpose() - col_marginal.entries());
  return std::max(rows, cols);
}

Coupling Coupling::transposed() const { return Coupling{plan.transpose(), col_marginal, row_marginal}; }

void GwConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("epsilon must be positive");
  if (outer_iters < 1 || sinkhorn_iters < 1) throw InvalidInput("iteration counts must be >= 1");
  if (!(sinkhorn_tol > 0.0)) throw InvalidInput("sinkhorn_tol must be positive");
  if (!(absorption_threshold > 1.0)) throw InvalidInput("absorption_threshold must exceed 1");
  if (outer_tol < 0.0) throw InvalidInput("outer_tol must be nonnegative");
  if (init_jitter < 0.0 || init_jitter >= 1.0) throw InvalidInput("init_jitter must lie in [0, 1)");
}

SinkhornResult sinkhorn_log(const Matrix& cost, const ProbabilityVector& p,
                            const ProbabilityVector& q, double epsilon, int iters, double tol,
                            double absorption_threshold, const DualPotentials* warm) {
  const Index n = cost.rows(), m = cost.cols();
  if (n != p.size() || m != q.size()) throw ShapeMismatch("cost shape does not match marginals");
  if (!cost.allFinite()) throw InvalidInput("sinkhorn_log: non-finite cost");
  if (!(epsilon > 0.0)) throw InvalidInput("sinkhorn_log: epsilon must be positive");
  if (iters < 1) throw InvalidInput("sinkhorn_log: iters must be >= 1");

  const Vector& a = p.entries();
  const Vector& b = q.entries();
  const Vector log_a = a.array().log().matrix();
  const Vector log_b = b.array().log().matrix();

  Vector f = Vector::Zero(n), g = Vector::Zero(m);
  const bool warm_start = warm != nullptr && warm->f.size() == n && warm->g.size() == m &&
                          warm->f.allFinite() && warm->g.allFinite();
  if (warm_start) {
    f = warm->f;
    g = warm->g;
  }

  // One exact log-domain sweep: afterwards every row and column of the
  // absorbed kernel has mass, whatever the magnitude of cost / epsilon.
  auto log_sweep = [&] {
    f += epsilon * log_a - par::row_lse(cost, f, g, epsilon);
    g += epsilon * log_b - par::col_lse(cost, f, g, epsilon);
  };
  Matrix k;
  if (warm_start) {
    k = par::gibbs_kernel(cost, f, g, epsilon);
    const Vector row_mass = k.rowwise().sum();
    const Vector col_mass = k.colwise().sum().transpose();
    if ((row_mass.array() == 0.0).any() || (col_mass.array() == 0.0).any() ||
        !row_mass.allFinite() || !col_mass.allFinite()) {
      log_sweep();
      k = par::gibbs_kernel(cost, f, g, epsilon);
    }
  } else {
    log_sweep();
    k = par::gibbs_kernel(cost, f, g, epsilon);
  }
  kernels::RowMatrix k_rows = k;
  Vector u = Vector::Ones(n), v = Vector::Ones(m);

  SinkhornResult out;
  double violation = 0.0;
  // A reused warm kernel has unchecked columns until the first v update.
  bool columns_exact = !warm_start;
  int it = 0;
  for (; it < iters; ++it) {
    const Vector kv = par::matvec(k_rows, v);
    // Columns are exact after the v update; the row error is the marginal gap.
    violation = max_abs(u.cwiseProduct(kv) - a);
    if (!columns_exact && violation < tol)
      violation = std::max(violation, max_abs(v.cwiseProduct(par::matvec_transposed(k, u)) - b));
    if (violation < tol) {
      out.converged = true;
      break;
    }
    u = a.cwiseQuotient(kv);
    v = b.cwiseQuotient(par::matvec_transposed(k, u));
    columns_exact = true;

    const bool degenerate = !u.allFinite() || !v.allFinite() || (u.array() == 0.0).any() ||
                            (v.array() == 0.0).any();
    if (degenerate) {
      // Underflowed rows: fall back to a log-domain sweep from the last potentials.
      log_sweep();
    } else if (u.maxCoeff() > absorption_threshold || u.minCoeff() < 1.0 / absorption_threshold ||
               v.maxCoeff() > absorption_threshold || v.minCoeff() < 1.0 / absorption_threshold) {
      f += epsilon * u.array().log().matrix();
      g += epsilon * v.array().log().matrix();
    } else {
      continue;
    }
    k = par::gibbs_kernel(cost, f, g, epsilon);
    k_rows = k;
    u.setOnes();
    v.setOnes();
  }

  out.iterations = it;
  out.coupling = Coupling{scaled_plan(k, u, v), p, q};
  if (!out.coupling.plan.allFinite()) throw NumericalError("sinkhorn_log produced a non-finite plan", it);
  out.f = f + epsilon * u.array().log().matrix();
  out.g = g + epsilon * v.array().log().matrix();
  out.marginal_violation = out.coupling.max_marginal_violation();
  if (!out.converged) out.converged = out.marginal_violation < tol;
  return out;
}

Matrix round_to_marginals(const Matrix& plan, const ProbabilityVector& p, const ProbabilityVector& q) {
  if (plan.rows() != p.size() || plan.cols() != q.size())
    throw ShapeMismatch("plan shape does not match marginals");
  if (!plan.allFinite() || (plan.array() < 0.0).any())
    throw InvalidInput("round_to_marginals: plan must be finite and nonnegative");
  const Vector& a = p.entries();
  const Vector& b = q.entries();
  auto shrink = [](const Vector& target, const Vector& mass) {
    Vector s(target.size());
    for (Index i = 0; i < target.size(); ++i) s[i] = mass[i] > target[i] ? target[i] / mass[i] : 1.0;
    return s;
  };
  Matrix out = shrink(a, plan.rowwise().sum()).asDiagonal() * plan;
  out = out * shrink(b, out.colwise().sum().transpose()).asDiagonal();
  const Vector row_gap = a - out.rowwise().sum();
  const Vector col_gap = b - out.colwise().sum().transpose();
  const double missing = row_gap.sum();
  if (missing > 0.0) out.noalias() += row_gap * col_gap.transpose() / missing;
  return out;
}

double gw_cost(const Matrix& d, const Matrix& dbar, const Matrix& plan) {
  check_plan_shape(d, dbar, plan);
  const Vector p = plan.rowwise().sum();
  const Vector q = plan.colwise().sum().transpose();
  const double first = 0.5 * p.dot(d.cwiseAbs2() * p);
  const double second = 0.5 * q.dot(dbar.cwiseAbs2() * q);
  const double cross = plan.cwiseProduct(d * plan * dbar.transpose()).sum();
  return first + second - cross;
}

double gw_cost(const DistanceMatrix& d, const DistanceMatrix& dbar, const Coupling& t) {
  return gw_cost(d.original(), dbar.original(), t.plan);
}

Matrix gw_local_cost(const Matrix& d, const Matrix& dbar, const Vector& p, const Vector& q,
                     const Matrix& plan) {
  check_plan_shape(d, dbar, plan);
  const Vector row_term = 0.5 * (d.cwiseAbs2() * p);
  const Vector col_term = 0.5 * (dbar.cwiseAbs2() * q);
  Matrix c = -(d * plan * dbar.transpose());
  c.colwise() += row_term;
  c.rowwise() += col_term.transpose();
  return c;
}

double entropy(const Matrix& plan) {
  double h = 0.0;
  for (Index k = 0; k < plan.size(); ++k) {
    const double t = plan.data()[k];
    if (t > 0.0) h -= t * (std::log(t) - 1.0);
  }
  return h;
}

double entropy(const Coupling& t) { return entropy(t.plan); }

GwResult solve_entropic_gw(const DistanceMatrix& d, const DistanceMatrix& dbar,
                           const ProbabilityVector& p, const ProbabilityVector& q,
                           const GwConfig& cfg) {
  cfg.validate();
  if (d.size() != p.size() || dbar.size() != q.size())
    throw ShapeMismatch("distance matrix sizes must match their marginals");

  const Matrix dn = normalize_distances(d).values();
  const Matrix dbn = normalize_distances(dbar).values();
  const Vector& a = p.entries();
  const Vector& b = q.entries();

  Matrix plan = jittered_independence(a, b, cfg.init_jitter, cfg.seed);
  DualPotentials duals{Vector::Zero(a.size()), Vector::Zero(b.size())};

  GwResult result;
  bool projected = false;
  for (int it = 1; it <= cfg.outer_iters; ++it) {
    // Gradient of E at the current plan is twice the local cost.
    const Matrix grad = 2.0 * gw_local_cost(dn, dbn, a, b, plan);
    if (!grad.allFinite()) throw NumericalError("entropic GW: non-finite local cost", it);

    SinkhornResult sk = sinkhorn_log(grad, p, q, cfg.epsilon, cfg.sinkhorn_iters, cfg.sinkhorn_tol,
                                     cfg.absorption_threshold, &duals);
    if (!sk.coupling.plan.allFinite()) throw NumericalError("entropic GW: NaN in coupling", it);

    const double change = (sk.coupling.plan - plan).cwiseAbs().sum();
    plan = std::move(sk.coupling.plan);
    duals.f = std::move(sk.f);
    duals.g = std::move(sk.g);
    result.trace.push_back({it, sk.marginal_violation, change, sk.iterations});
    result.outer_iters_used = it;
    projected = sk.converged;
    if (change < cfg.outer_tol && sk.converged) {
      result.converged = true;
      break;
    }
  }

  // The outer budget can run out mid-projection; the returned plan must still
  // be a coupling.
  if (!projected) plan = round_to_marginals(plan, p, q);

  result.coupling = Coupling{std::move(plan), p, q};
  result.loss = gw_cost(d, dbar, result.coupling);
  if (!std::isfinite(result.loss))
    throw NumericalError("entropic GW: non-finite loss", result.outer_iters_used);
  result.entropy = entropy(result.coupling);
  result.entropic_value = result.loss - cfg.epsilon * result.entropy;
  return result;
}

double NormalizedGw::max_marginal_violation() const {
  return std::max({cross.coupling.max_marginal_violation(),
                   self_first.coupling.max_marginal_violation(),
                   self_second.coupling.max_marginal_violation()});
}

NormalizedGw normalized_gw(const DistanceMatrix& d, const DistanceMatrix& dbar,
                           const ProbabilityVector& p, const ProbabilityVector& q,
                           const GwConfig& cfg) {
  NormalizedGw out;
  if (canonical_before(d, p, dbar, q)) {
    out.cross = solve_entropic_gw(d, dbar, p, q, cfg);
  } else {
    out.cross = transpose_result(solve_entropic_gw(dbar, d, q, p, cfg));
  }
  out.self_first = solve_entropic_gw(d, d, p, p, cfg);
  out.self_second = solve_entropic_gw(dbar, dbar, q, q, cfg);
  out.loss = 2.0 * out.cross.entropic_value - out.self_first.entropic_value -
             out.self_second.entropic_value;
  out.raw_loss = 2.0 * out.cross.loss - out.self_first.loss - out.self_second.loss;
  return out;
}

Matrix gw_grad_dbar(const Matrix& d, const Matrix& dbar, const Matrix& plan) {
  check_plan_shape(d, dbar, plan);
  const Vector q = plan.colwise().sum().transpose();
  Matrix g = dbar.cwiseProduct(q * q.transpose());
  g.noalias() -= plan.transpose() * d * plan;
  return g;
}

Matrix gw_grad_dbar(const DistanceMatrix& d, const DistanceMatrix& dbar, const Coupling& t) {
  return gw_grad_dbar(d.original(), dbar.original(), t.plan);
}

Matrix gw_grad_d(const Matrix& d, const Matrix& dbar, const Matrix& plan) {
  check_plan_shape(d, dbar, plan);
  const Vector p = plan.rowwise().sum();
  Matrix g = d.cwiseProduct(p * p.transpose());
  g.noalias() -= plan * dbar * plan.transpose();
  return g;
}

Matrix gw_grad_d(const DistanceMatrix& d, const DistanceMatrix& dbar, const Coupling& t) {
  return gw_grad_d(d.original(), dbar.original(), t.plan);
}

Matrix normalized_gw_grad_dbar(const DistanceMatrix& d, const DistanceMatrix& dbar,
                               const NormalizedGw& solved) {
  const Matrix dd = d.original(), db = dbar.original();
  return 2.0 * gw_grad_dbar(dd, db, solved.cross.coupling.plan) -
         self_term_grad(db, solved.self_second.coupling.plan);
}

Matrix normalized_gw_grad_d(const DistanceMatrix& d, const DistanceMatrix& dbar,
                            const NormalizedGw& solved) {
  const Matrix dd = d.original(), db = dbar.original();
  return 2.0 * gw_grad_d(dd, db, solved.cross.coupling.plan) -
         self_term_grad(dd, solved.self_first.coupling.plan);
}

Matrix normalized_gw_grad_dbar(const DistanceMatrix& d, const DistanceMatrix& dbar,
                               const ProbabilityVector& p, const ProbabilityVector& q,
                               const GwConfig& cfg) {
  return normalized_gw_grad_dbar(d, dbar, normalized_gw(d, dbar, p, q, cfg));
}

double normalized_gw_frozen(const DistanceMatrix& d, const DistanceMatrix& dbar,
                            const NormalizedGw& solved, double epsilon) {
  const Matrix dd = d.original(), db = dbar.original();
  auto value = [&](const Matrix& a, const Matrix& b, const GwResult& r) {
    return gw_cost(a, b, r.coupling.plan) - epsilon * r.entropy;
  };
  return 2.0 * value(dd, db, solved.cross) - value(dd, dd, solved.self_first) -
         value(db, db, solved.self_second);
}

}  // namespace gwgen
