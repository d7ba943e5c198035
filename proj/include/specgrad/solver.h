/*
 * Main iteration loop: refresh the rank-tau preconditioner, pick alpha by
 * the configured rule, step, trace, and (in check mode) assert the per-step
 * inequalities the analysis guarantees.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specgrad/composite.h"
#include "specgrad/oracle.h"
#include "specgrad/stepsize.h"

namespace specgrad {

enum class CheckMode { Off, Warn, Strict };
enum class SolverMode { Plain, CutNegative, Composite };
enum class TerminationReason { Converged, MaxIters, Budget, Stalled };

const char* to_string(TerminationReason r);
const char* to_string(CheckMode m);
const char* to_string(SolverMode m);

struct PowerSchedule {
  std::size_t warmup_T = 20;  /* rounds at k = 0 */
  std::size_t hot_T = 1;      /* rounds at k >= 1 (hot start) */
  std::uint64_t seed = 0;
};

struct Termination {
  double eps = 1e-8;             /* target stopping norm */
  std::size_t max_iters = 1000;
  long long max_hvp_calls = 0;   /* 0 = unlimited */
  std::optional<double> target_f;
};

struct SolverConfig {
  std::size_t tau = 0;
  StepRuleConfig rule;
  PowerSchedule power;
  Termination term;
  CheckMode check_mode = CheckMode::Warn;
  SolverMode mode = SolverMode::Plain;
  bool use_dense_reference = false;  /* exact eigenpairs + exact deltas each iteration */
  double inner_tol = 0.0;            /* composite subproblem; <= 0 = default */
};

/* One row per iteration k: the state on arrival at x_k plus the step taken
 * from it.  The final row describes the terminal state and leaves the step
 * fields empty.  y_grad_norm on row k belongs to y_k, the test point reached
 * together with x_k (so it is empty at k = 0).  Counters are cumulative. */
struct TraceRecord {
  std::size_t k = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  std::optional<double> fprime_norm;  /* composite mode */
  std::optional<double> y_grad_norm;  /* cut-negative mode */
  std::optional<double> alpha;
  std::optional<double> step_norm;
  std::size_t tau = 0;
  std::optional<std::size_t> T;
  std::optional<double> delta_est;
  long long grad_evals = 0;
  long long hvp_calls = 0;
  long long inner_iters = 0;
  double wall_ms = 0.0;
};

struct CheckViolation {
  std::size_t iter = 0;
  std::string inequality;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct SolveResult {
  std::vector<double> x_final;
  double f_final = 0.0;
  std::vector<double> x_best;  /* iterate attaining the smallest stopping norm */
  double f_best = 0.0;
  double best_stopping_norm = 0.0;
  std::size_t best_iter = 0;
  double f_min = 0.0;  /* smallest objective observed */
  TerminationReason reason = TerminationReason::MaxIters;
  std::size_t iterations = 0;
  std::vector<TraceRecord> trace;
  std::vector<CheckViolation> violations;
  long long grad_evals = 0, hvp_calls = 0, f_evals = 0, inner_iters = 0;
  double final_L_estimate = 0.0;
};

SolveResult minimize(const ObjectiveOracle& oracle, const std::vector<double>& x0,
                     const SolverConfig& cfg);
SolveResult minimize(const CompositeOracle& oracle, const std::vector<double>& x0,
                     const SolverConfig& cfg);

/* Per-step inequality checks.  Each returns pass/fail only; the solver's
 * check mode decides whether a failure warns or aborts. */

/* f_prev - f_next >= F_prime_next_norm^2 / (8 alpha) - tol max(1, |f_prev|). */
bool check_step_lipschitz(double f_prev, double f_next, double alpha,
                          double F_prime_next_norm, double tol);

/* Cut-negative step: with slack tol max(1, |f_prev|) on each inequality,
 *   f_prev - f_next >= (L/3) r^3 + (eta/2) r^2,
 *   ||grad f(y_next)|| <= 2 eta r + L r^2,
 *   f_prev - f_next >= min{ ||grad f(y_next)||^{3/2} / (6 sqrt(2L)),
 *                           ||grad f(y_next)||^2 / (32 eta) }
 * (the eta = 0 branch drops the 1/(32 eta) term). */
bool check_step_cubic(double f_prev, double f_next, double r, double L, double eta,
                      double grad_y_norm, double tol);

/* <F'(x_next), x_prev - x_next> >= ||F'(x_next)||^2 / (2 alpha) - tol
 * with tol an absolute slack (callers scale it by max(1, |f|)). */
bool check_step_qsc(const std::vector<double>& F_prime_next,
                    const std::vector<double>& x_prev, const std::vector<double>& x_next,
                    double alpha, double tol);

}  // namespace specgrad
