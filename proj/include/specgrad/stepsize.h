/*
 * Regularization parameter alpha_k: the three analysed rules plus an
 * adaptive doubling search for unknown L.
 */
#pragma once

#include <functional>
#include <optional>

#include "specgrad/spectral.h"

namespace specgrad {

enum class StepRule { Lipschitz, CubicCut, Qsc, Fixed };

struct StepRuleConfig {
  StepRule rule = StepRule::Lipschitz;

  double L = 0.0;
  double sigma_tau = 0.0;
  double sigma_tau_plus = 0.0;
  double M = 0.0;
  double fixed_alpha = 0.0;

  /* Approximation errors.  Unset means: use the per-iteration dense-exact
   * estimate when a dense reference is active, else 0 (with one warning). */
  std::optional<double> delta;
  std::optional<double> delta_minus;

  /* Balancing term of the cubic-cut rule; defaults to
   * sigma_tau_plus + delta + delta_minus. */
  std::optional<double> eta;

  bool adaptive = false;
  double initial_L = 1.0;
  double growth = 2.0;
  double shrink = 0.5;

  double eta_value(double delta_eff, double delta_minus_eff) const {
    return eta ? *eta : sigma_tau_plus + delta_eff + delta_minus_eff;
  }
};

/* alpha = sqrt(L ||g|| / 2) + sigma_tau + delta. */
double alpha_lipschitz(double grad_norm, double L, double sigma_tau, double delta);

/* alpha = M ||g|| + sigma_tau + delta. */
double alpha_qsc(double grad_norm, double M, double sigma_tau, double delta);

/* The positive fixed point of alpha = (L/2) ||(H + (alpha + eta) I)^{-1} g||,
 * located by bisection-safeguarded Newton on
 *   phi(alpha) = alpha - (L/2) ||(H + (alpha + eta) I)^{-1} g||,
 * which is strictly increasing with phi(0+) < 0 <= phi(sqrt(L||g||/2)).
 * Requires L > 0 and g != 0.  The result satisfies
 * |alpha - (L/2)||...||| <= tol * alpha. */
double alpha_cubic_star(const LowRankPreconditioner& h, const std::vector<double>& g,
                        double L, double eta, double tol = 1e-10);

/* Adaptive search over the Hessian-Lipschitz estimate.  alpha_for_L maps a
 * trial L to alpha under the active rule; accept_trial performs the step and
 * evaluates the rule's progress inequality.  On acceptance the stored
 * l_estimate is halved (floored at 1e-20) for the next iteration.  Throws
 * std::runtime_error after max_doublings failed trials. */
struct AdaptiveOutcome {
  double alpha = 0.0;
  double accepted_L = 0.0;
  int doublings = 0;
};

AdaptiveOutcome alpha_adaptive(double& l_estimate,
                               const std::function<double(double)>& alpha_for_L,
                               const std::function<bool(double)>& accept_trial,
                               double growth = 2.0, double shrink = 0.5,
                               int max_doublings = 60);

}  // namespace specgrad
