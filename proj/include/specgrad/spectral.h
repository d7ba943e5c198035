/*
 * Rank-tau spectral approximation of the Hessian: hot-started orthogonal
 * power iterations, the projector onto the basis, and dense reference paths
 * for exact eigenpairs and approximation-error norms.
 */
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "specgrad/dense.h"
#include "specgrad/oracle.h"
#include "specgrad/rng.h"

namespace specgrad {

/* H = V diag(a) V^T with orthonormal V (n x tau) and a >= 0.  Negative
 * Rayleigh quotients are clipped to zero in `a`; the unclipped values stay
 * in `a_raw` for diagnostics, as do the power-iteration residual norms
 * ||Hess v_i - a_raw_i v_i|| from the last Rayleigh pass. */
struct LowRankPreconditioner {
  std::size_t n = 0;
  std::size_t tau = 0;
  std::vector<double> a;
  std::vector<double> a_raw;
  std::vector<double> residuals;
  DenseMatrix V;

  double amax() const;  /* max_i a_i, 0 when tau = 0 */

  /* out = V diag(a) V^T d (the represented H applied to d). */
  void apply(std::span<const double> d, std::span<double> out) const;
};

/* P = V V^T, sharing the preconditioner's basis. */
class ProjectorP {
 public:
  explicit ProjectorP(const LowRankPreconditioner& h) : h_(&h) {}
  std::size_t dim() const { return h_->n; }
  void apply(std::span<const double> d, std::span<double> out) const;
  std::vector<double> apply(const std::vector<double>& d) const;

 private:
  const LowRankPreconditioner* h_;
};

struct ApproxErrorReport {
  enum class Method { DenseExact, ResidualEstimate };
  double delta = 0.0;        /* estimate of ||H - Hess_tau|| */
  double delta_minus = 0.0;  /* estimate of ||Hess_minus * P|| */
  Method method = Method::ResidualEstimate;
  /* Populated by the dense path only (used for sigma estimation). */
  double lambda_tau_plus_1 = 0.0;
  double lambda_n = 0.0;
};

/* T rounds of V <- QR(Hess(x) V) from the previous basis (hot start) or a
 * seeded random one, then a Rayleigh pass a_i = <Hess v_i, v_i>.  Exactly
 * tau * (T + 1) hvp calls.  T = 0 requires prev (reuses its basis and only
 * refreshes the Rayleigh quotients).  Columns are sorted by raw Rayleigh
 * value, non-ascending. */
LowRankPreconditioner power_update(const ObjectiveOracle& oracle,
                                   const std::vector<double>& x,
                                   const LowRankPreconditioner* prev, std::size_t tau,
                                   std::size_t T, SplitMix64& rng);

/* Modified Gram-Schmidt with re-orthogonalization.  Numerically dependent
 * columns (projected norm <= 1e-12 relative) are re-randomized from rng, at
 * most 3 attempts each; std::runtime_error past that. */
DenseMatrix qr_orthonormalize(const DenseMatrix& w, SplitMix64& rng);

/* Exact top-tau eigenpairs from the dense Hessian, eigenvalues sorted
 * non-ascending and clipped as usual.  The report is dense-exact: delta and
 * delta_minus are true spectral norms, lambda_{tau+1} and lambda_n filled. */
std::pair<LowRankPreconditioner, ApproxErrorReport> dense_spectral_order(
    const ObjectiveOracle& oracle, const std::vector<double>& x, std::size_t tau);

/* delta = ||H - Hess_tau f(x)|| and delta_minus = ||Hess_minus f(x) P||.
 * Dense-exact when the dense Hessian is available; otherwise falls back to
 * the stored power residuals aggregated as sqrt(sum r_i^2) — a heuristic,
 * for diagnostics only. */
ApproxErrorReport estimate_errors(const ObjectiveOracle& oracle, const std::vector<double>& x,
                                  const LowRankPreconditioner& h, const ProjectorP& p);

}  // namespace specgrad
