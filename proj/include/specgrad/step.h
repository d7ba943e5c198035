/*
 * One preconditioned (composite) gradient step: Woodbury solve in
 * O(tau^2 n + tau^3), post-step subgradient, and the auxiliary test point
 * y = x + P(x_next - x).
 */
#pragma once

#include <optional>
#include <vector>

#include "specgrad/composite.h"
#include "specgrad/oracle.h"
#include "specgrad/spectral.h"

namespace specgrad {

struct StepResult {
  std::vector<double> x_next;
  /* x - x_next as the solve produced it.  Recomputing the difference from the
   * stored iterates quantizes each component to the ulp of the corresponding
   * coordinate of x, which destroys the step once it shrinks toward the
   * rounding floor; invariants about the step must be checked against this
   * vector, not against x_next - x. */
  std::vector<double> d;
  double r = 0.0;                    /* ||d|| */
  std::vector<double> grad_next;     /* gradient of f at x_next */
  std::vector<double> F_prime_next;  /* grad_next + psi'(x_next); = grad_next when psi = 0 */
  std::optional<std::vector<double>> y_next;
  int inner_iterations = 0;
};

/* (H + alpha I)^{-1} g without materializing any n x n matrix, evaluated as
 * (1/alpha)(g - V V^T g) + V diag(1/(a_i + alpha)) V^T g, the numerically
 * stable regrouping of (1/alpha) [g - V (I + alpha diag(a)^{-1})^{-1} V^T g].
 * Basis columns with a_i = 0 contribute nothing beyond the 1/alpha term and
 * are skipped.  Requires alpha > 0. */
std::vector<double> woodbury_apply(const LowRankPreconditioner& h, double alpha,
                                   const std::vector<double>& g);

/* x_next = x - (H + alpha I)^{-1} g, fresh gradient at x_next.  alpha = 0 is
 * allowed only for full-rank H (tau = n, all a_i > 0), solved by a dense
 * factorization guarded by dense_limit().  Passing p computes y_next. */
StepResult grad_step(const ObjectiveOracle& oracle, const std::vector<double>& x,
                     const std::vector<double>& g, const LowRankPreconditioner& h,
                     double alpha, const ProjectorP* p = nullptr);

/* Composite step: approximately minimizes
 *   <g, y - x> + 1/2 <(H + alpha I)(y - x), y - x> + psi(y)
 * by proximal gradient iterations with step 1/(max_i a_i + alpha), stopping
 * when 2 (max_i a_i + alpha) ||y_new - y|| <= inner_tol.  psi'(x_next) is
 * defined as -g - (H + alpha I)(x_next - x).  inner_tol <= 0 selects the
 * default 1e-10 max(1, ||g||).  Throws when the iteration cap
 * 10 ceil((max_i a_i / alpha + 1) ln(1/inner_tol)) is exceeded. */
StepResult composite_step(const ObjectiveOracle& oracle, const std::vector<double>& x,
                          const std::vector<double>& g, const LowRankPreconditioner& h,
                          double alpha, const Regularizer& psi, double inner_tol = 0.0,
                          const ProjectorP* p = nullptr);

/* y = x + V V^T (x_next - x). */
std::vector<double> auxiliary_point(const std::vector<double>& x,
                                    const std::vector<double>& x_next, const ProjectorP& p);

}  // namespace specgrad
