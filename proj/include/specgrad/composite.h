/*
 * Simple closed convex terms psi for the composite problem f + psi, with
 * exact proximal maps.  Box bounds are uniform scalars and may be infinite
 * on either side.
 */
#pragma once

#include <limits>
#include <vector>

#include "specgrad/oracle.h"

namespace specgrad {

enum class RegKind { Zero, SquaredL2, L1, Box };

struct Regularizer {
  RegKind kind = RegKind::Zero;
  double coeff = 0.0;  /* mu_reg for SquaredL2, lambda for L1 */
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  double value(const std::vector<double>& x) const;

  /* prox_{scale * psi}(v): argmin_y psi(y) + ||y - v||^2 / (2 scale). */
  void prox(const std::vector<double>& v, double scale, std::vector<double>& out) const;

  /* Minimum-norm element of the subdifferential at x (initial subgradient of
   * the composite solver).  For the box, x must lie inside; then 0 is always
   * a normal-cone element.  Throws std::domain_error for infeasible x. */
  std::vector<double> min_norm_subgradient(const std::vector<double>& x) const;

  /* True when psi is identically zero (no box constraint, zero coefficient). */
  bool is_zero() const;
};

struct CompositeOracle {
  const ObjectiveOracle* smooth = nullptr;
  Regularizer psi;
};

}  // namespace specgrad
