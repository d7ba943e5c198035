/*
 * Empirical grade-of-non-convexity certification and class-parameter
 * estimation from sampled Hessian spectra, plus the sum / soft-max oracles
 * used by the grading-rule property test.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "specgrad/oracle.h"

namespace specgrad {

class SplitMix64;

struct BallSampler {
  std::vector<double> center;
  double radius = 0.0;  /* <= 0: default 2 ||center|| + 1 */
  std::size_t count = 20;
  std::uint64_t seed = 0;
};

struct SpectrumReport {
  std::vector<std::vector<double>> points;
  std::vector<std::vector<double>> eigenvalues;  /* per point, non-ascending */
  std::size_t certified_grade = 0;  /* largest tau with lambda_tau >= -tol_eig at every point */
  double tol_eig = 0.0;
  /* Indexed by tau in [0, n].  sigma_tau[t] = max over samples of
   * max{lambda_{t+1}, -lambda_n} (lambda_{n+1} := -inf); sigma_tau_plus[t] =
   * max over samples of max{lambda_{t+1}, 0}, and exactly 0 at t = n. */
  std::vector<double> sigma_tau;
  std::vector<double> sigma_tau_plus;
};

/* Full eigendecomposition of the dense Hessian at each sample point.
 * tol_eig <= 0 selects the default 1e-9 (1 + max |lambda| over all samples).
 * Requires dim <= dense_limit(). */
SpectrumReport sample_spectrum(const ObjectiveOracle& oracle,
                               const std::vector<std::vector<double>>& points,
                               double tol_eig = 0.0);
SpectrumReport sample_spectrum(const ObjectiveOracle& oracle, const BallSampler& sampler,
                               double tol_eig = 0.0);

/* Uniform draws from the ball (gaussian direction, radius ~ R u^{1/n}). */
std::vector<std::vector<double>> sample_ball(const BallSampler& sampler, std::size_t dim);

/* f + g and smax(f, g) = ln(e^f + e^g), for the grading-rule tests.  The
 * returned oracle borrows f and g; keep them alive. */
std::unique_ptr<ObjectiveOracle> make_sum_oracle(const ObjectiveOracle& f,
                                                 const ObjectiveOracle& g);
std::unique_ptr<ObjectiveOracle> make_smax_oracle(const ObjectiveOracle& f,
                                                  const ObjectiveOracle& g);

struct GradingRuleResult {
  std::size_t grade_f = 0, grade_g = 0, grade_sum = 0;
  bool pass = false;  /* grade_sum >= grade_f + grade_g - n */
};

/* Empirical check of the summation grading rule at the given samples.
 * Requires grade_f + grade_g >= n (the rule's hypothesis). */
GradingRuleResult check_grading_rule(const ObjectiveOracle& f, const ObjectiveOracle& g,
                                     const std::vector<std::vector<double>>& samples);

/* Empirical lower bound on the quasi-self-concordance constant M:
 * max over samples and random (u, v) of
 *   |d^3 f(x)[u, u, v]| / (<Hess(x) u, u> ||v||),
 * third derivative by central differences of the hvp along v with step
 * 1e-5 (1 + ||x||), skipping pairs with <Hess u, u> < 1e-12. */
double estimate_qsc_constant(const ObjectiveOracle& oracle,
                             const std::vector<std::vector<double>>& samples,
                             std::size_t directions, SplitMix64& rng);

}  // namespace specgrad
