#pragma once

// Entropy-regularized Gromov-Wasserstein discrepancy with the L2 loss
// L(a, b) = (a - b)^2 / 2, its normalized (debiased) form, and gradients with
// respect to the distance matrices at a frozen coupling.

#include <cstdint>
#include <vector>

#include "gwgen/metric_spaces.hpp"
#include "gwgen/types.hpp"

namespace gwgen {

/// Transport plan together with the marginals it was solved for.
struct Coupling {
  Matrix plan;  // n x m
  ProbabilityVector row_marginal;
  ProbabilityVector col_marginal;

  /// max over rows and columns of |plan sum - marginal|.
  double max_marginal_violation() const;
  Coupling transposed() const;
};

struct GwConfig {
  double epsilon = 0.005;
  int outer_iters = 50;
  int sinkhorn_iters = 500;
  double sinkhorn_tol = 1e-6;
  // Scalings beyond [1/threshold, threshold] are folded into the dual potentials.
  double absorption_threshold = 1e3;
  // Outer loop stops once the plan moves less than this in L1 norm.
  double outer_tol = 1e-5;
  // Relative perturbation of the independence coupling, so that symmetric
  // instances do not sit on the saddle point p q^T forever.
  double init_jitter = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SinkhornResult {
  Coupling coupling;
  Vector f;  // dual potentials, T_ij = exp((f_i + g_j - C_ij) / eps)
  Vector g;
  bool converged = false;
  int iterations = 0;
  double marginal_violation = 0.0;
};

/// Optional warm start for the dual potentials.
struct DualPotentials {
  Vector f;
  Vector g;
};

/// Stabilized Sinkhorn scaling for min <C, T> - eps H(T) over couplings of p, q.
/// The kernel is only ever formed relative to absorbed dual potentials.
SinkhornResult sinkhorn_log(const Matrix& cost, const ProbabilityVector& p,
                            const ProbabilityVector& q, double epsilon, int iters, double tol,
                            double absorption_threshold = 1e3,
                            const DualPotentials* warm = nullptr);

struct OuterIterate {
  int iteration;
  double marginal_violation;
  double plan_change;
  int sinkhorn_iterations;
};

struct GwResult {
  double loss = 0.0;          // E_{D, Dbar}(T) on original-scale distances
  double entropy = 0.0;       // H(T)
  double entropic_value = 0.0;  // loss - epsilon * entropy
  Coupling coupling;
  bool converged = false;
  int outer_iters_used = 0;
  std::vector<OuterIterate> trace;
};

/// Nearest-feasible repair of an approximate plan: rows and columns carrying
/// too much mass are scaled down, then the deficit is added back as the
/// rank-one product of the row and column gaps. The output has marginals p, q
/// up to rounding and differs from `plan` by at most twice its L1 violation.
Matrix round_to_marginals(const Matrix& plan, const ProbabilityVector& p, const ProbabilityVector& q);

/// sum_ijkl (D_ik - Dbar_jl)^2 / 2 * T_ij T_kl, via the quadratic-form split.
double gw_cost(const Matrix& d, const Matrix& dbar, const Matrix& plan);
double gw_cost(const DistanceMatrix& d, const DistanceMatrix& dbar, const Coupling& t);

/// Local cost C(T)_ij = sum_kl L(D_ik, Dbar_jl) T_kl for a plan with marginals p, q.
Matrix gw_local_cost(const Matrix& d, const Matrix& dbar, const Vector& p, const Vector& q,
                     const Matrix& plan);

/// H(T) = -sum T_ij (log T_ij - 1), with 0 log 0 = 0.
double entropy(const Matrix& plan);
double entropy(const Coupling& t);

/// Projected (mirror-descent) solve of min_T E(T) - eps H(T). Distances are
/// normalized for the iterations; the reported loss uses the original ones.
/// If the last projection is unconverged, its plan is rounded onto the marginals.
GwResult solve_entropic_gw(const DistanceMatrix& d, const DistanceMatrix& dbar,
                           const ProbabilityVector& p, const ProbabilityVector& q,
                           const GwConfig& cfg);

struct NormalizedGw {
  // 2 GW_eps(D, Dbar) - GW_eps(D, D) - GW_eps(Dbar, Dbar) using entropic values.
  double loss = 0.0;
  // Same combination of the raw costs E(T) only.
  double raw_loss = 0.0;
  GwResult cross;
  GwResult self_first;   // (D, D, p, p)
  GwResult self_second;  // (Dbar, Dbar, q, q)

  double max_marginal_violation() const;
};

NormalizedGw normalized_gw(const DistanceMatrix& d, const DistanceMatrix& dbar,
                           const ProbabilityVector& p, const ProbabilityVector& q,
                           const GwConfig& cfg);

/// dE_{D,Dbar}(T)/dDbar = Dbar .* (q q^T) - T^T D T with q = T^T 1.
Matrix gw_grad_dbar(const Matrix& d, const Matrix& dbar, const Matrix& plan);
Matrix gw_grad_dbar(const DistanceMatrix& d, const DistanceMatrix& dbar, const Coupling& t);
/// dE_{D,Dbar}(T)/dD = D .* (p p^T) - T Dbar T^T with p = T 1.
Matrix gw_grad_d(const Matrix& d, const Matrix& dbar, const Matrix& plan);
Matrix gw_grad_d(const DistanceMatrix& d, const DistanceMatrix& dbar, const Coupling& t);

/// Gradient of the normalized loss with all three couplings frozen.
Matrix normalized_gw_grad_dbar(const DistanceMatrix& d, const DistanceMatrix& dbar,
                               const NormalizedGw& solved);
Matrix normalized_gw_grad_d(const DistanceMatrix& d, const DistanceMatrix& dbar,
                            const NormalizedGw& solved);
Matrix normalized_gw_grad_dbar(const DistanceMatrix& d, const DistanceMatrix& dbar,
                               const ProbabilityVector& p, const ProbabilityVector& q,
                               const GwConfig& cfg);

/// Normalized loss re-evaluated at new distances with the couplings of `solved`.
double normalized_gw_frozen(const DistanceMatrix& d, const DistanceMatrix& dbar,
                            const NormalizedGw& solved, double epsilon);

}  // namespace gwgen
