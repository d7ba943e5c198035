#include "specgrad/solver.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "specgrad/kernels.h"
#include "specgrad/spectral.h"
#include "specgrad/step.h"

namespace specgrad {

namespace {

/* Slack scale of the per-step inequality checks. */
constexpr double kCheckTol = 1e-9;
/* Slack of the adaptive progress test, in units of max(1, |f|).  It must
 * cover the rounding error of f - f_next (a difference of nearly equal
 * values near convergence, so a few dozen ulps of f), and nothing more:
 * once the slack exceeds the required progress ||grad f(x+)||^2 / (8 alpha)
 * the estimator starts accepting zero-progress trials at step sizes below
 * the stability threshold, L leaks back down through the accept-side
 * halving, and the iterate locks into a cycle that never converges. */
constexpr double kAdaptiveTol = 32.0 * std::numeric_limits<double>::epsilon();
constexpr double kStallScale = 1e-15;
constexpr int kStallLimit = 5;

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

[[noreturn]] void fail_nonfinite(std::size_t k, const std::vector<double>& x) {
  std::ostringstream msg;
  msg << "minimize: non-finite objective or gradient at iteration " << k
      << " (||x|| = " << kernels::nrm2(x.data(), x.size()) << ")";
  throw std::runtime_error(msg.str());
}

double residual_aggregate(const LowRankPreconditioner& h) {
  double sq = 0.0;
  for (double r : h.residuals) sq += r * r;
  return std::sqrt(sq);
}

struct StepChecks {
  CheckMode mode;
  std::vector<CheckViolation>* sink;

  void report(std::size_t k, const char* name, double lhs, double rhs, bool pass) const {
    if (pass || mode == CheckMode::Off) return;
    sink->push_back({k, name, lhs, rhs});
    std::fprintf(stderr, "specgrad: check %s failed at iteration %zu (lhs=%.6e rhs=%.6e)\n",
                 name, k, lhs, rhs);
    if (mode == CheckMode::Strict) {
      std::ostringstream msg;
      msg << "check " << name << " failed at iteration " << k << " (strict mode)";
      throw std::runtime_error(msg.str());
    }
  }
};

}  // namespace

const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::Converged: return "converged";
    case TerminationReason::MaxIters: return "max_iters";
    case TerminationReason::Budget: return "budget";
    case TerminationReason::Stalled: return "stalled";
  }
  return "?";
}

const char* to_string(CheckMode m) {
  switch (m) {
    case CheckMode::Off: return "off";
    case CheckMode::Warn: return "warn";
    case CheckMode::Strict: return "strict";
  }
  return "?";
}

const char* to_string(SolverMode m) {
  switch (m) {
    case SolverMode::Plain: return "plain";
    case SolverMode::CutNegative: return "cut-negative";
    case SolverMode::Composite: return "composite";
  }
  return "?";
}

bool check_step_lipschitz(double f_prev, double f_next, double alpha,
                          double F_prime_next_norm, double tol) {
  const double slack = tol * std::max(1.0, std::fabs(f_prev));
  if (alpha <= 0.0) return F_prime_next_norm == 0.0;
  return f_prev - f_next >=
         F_prime_next_norm * F_prime_next_norm / (8.0 * alpha) - slack;
}

bool check_step_cubic(double f_prev, double f_next, double r, double L, double eta,
                      double grad_y_norm, double tol) {
  const double slack = tol * std::max(1.0, std::fabs(f_prev));
  const double decrease = f_prev - f_next;
  if (decrease < (L / 3.0) * r * r * r + (eta / 2.0) * r * r - slack) return false;
  if (grad_y_norm > 2.0 * eta * r + L * r * r + slack) return false;
  double bound = std::pow(grad_y_norm, 1.5) / (6.0 * std::sqrt(2.0 * L));
  if (eta > 0.0) bound = std::min(bound, grad_y_norm * grad_y_norm / (32.0 * eta));
  return decrease >= bound - slack;
}

bool check_step_qsc(const std::vector<double>& F_prime_next,
                    const std::vector<double>& x_prev, const std::vector<double>& x_next,
                    double alpha, double tol) {
  const std::size_t n = F_prime_next.size();
  double inner = 0.0;
  for (std::size_t i = 0; i < n; ++i) inner += F_prime_next[i] * (x_prev[i] - x_next[i]);
  const double fn = kernels::nrm2(F_prime_next.data(), n);
  if (alpha <= 0.0) return fn == 0.0;
  return inner >= fn * fn / (2.0 * alpha) - tol;
}

namespace {

void validate(const SolverConfig& cfg, const Regularizer* psi, std::size_t n,
              const std::vector<double>& x0) {
  if (x0.size() != n) throw std::invalid_argument("minimize: x0 dimension mismatch");
  if (!all_finite(x0)) throw std::invalid_argument("minimize: x0 has non-finite entries");
  if (cfg.term.eps <= 0.0) throw std::invalid_argument("minimize: eps must be positive");
  if (cfg.term.max_iters < 1) throw std::invalid_argument("minimize: max_iters must be >= 1");
  if (cfg.tau > n) throw std::invalid_argument("minimize: tau > n");
  if (cfg.mode == SolverMode::CutNegative && cfg.rule.rule != StepRule::CubicCut)
    throw std::invalid_argument("minimize: cut-negative mode requires the cubic-cut rule");
  if (cfg.mode == SolverMode::CutNegative && psi != nullptr && !psi->is_zero())
    throw std::invalid_argument("minimize: cut-negative mode is for smooth problems");
  if (psi != nullptr && !psi->is_zero() && cfg.mode != SolverMode::Composite)
    throw std::invalid_argument("minimize: a composite term requires composite mode");
  if (cfg.rule.rule == StepRule::Fixed && cfg.rule.fixed_alpha <= 0.0)
    throw std::invalid_argument("minimize: fixed rule requires fixed_alpha > 0");
  if (cfg.rule.adaptive && cfg.rule.rule != StepRule::Lipschitz &&
      cfg.rule.rule != StepRule::CubicCut)
    throw std::invalid_argument("minimize: adaptive search supports lipschitz and cubic-cut");
  if (!cfg.rule.adaptive && cfg.rule.rule == StepRule::CubicCut && cfg.rule.L <= 0.0)
    throw std::invalid_argument("minimize: cubic-cut rule requires L > 0");
  if (!cfg.use_dense_reference && cfg.tau > 0 && cfg.power.warmup_T == 0)
    throw std::invalid_argument("minimize: power.warmup_T must be >= 1 when tau > 0");
}

SolveResult run_loop(const ObjectiveOracle& user_oracle, const Regularizer* psi,
                     const std::vector<double>& x0, const SolverConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  const std::size_t n = user_oracle.dim();
  validate(cfg, psi, n, x0);
  const bool composite = cfg.mode == SolverMode::Composite;
  const bool cutneg = cfg.mode == SolverMode::CutNegative;
  static const Regularizer kZeroPsi{};
  const Regularizer& reg = (psi != nullptr) ? *psi : kZeroPsi;

  CountingOracle oracle(user_oracle);
  SplitMix64 power_rng(cfg.power.seed);

  SolveResult res;
  StepChecks checks{cfg.check_mode, &res.violations};

  std::vector<double> x = x0;
  std::vector<double> g = oracle.grad(x);
  double f = oracle.value(x);
  if (!std::isfinite(f) || !all_finite(g)) fail_nonfinite(0, x);
  double gnorm = kernels::nrm2(g.data(), n);

  std::vector<double> fprime;
  double fprime_norm = 0.0;
  if (composite) {
    fprime = reg.min_norm_subgradient(x);
    kernels::axpy(1.0, g.data(), fprime.data(), n);
    fprime_norm = kernels::nrm2(fprime.data(), n);
  }

  /* Min-so-far stopping norm.  Cut-negative measures test points y, which
   * exist only after the first step; until then fall back to the entry
   * gradient so a stationary start still terminates. */
  double best_norm = composite ? fprime_norm : gnorm;
  res.x_best = x;
  res.f_best = f;
  res.best_stopping_norm = best_norm;
  res.best_iter = 0;
  res.f_min = f;

  double L_estimate = cfg.rule.initial_L;
  bool warned_delta_default = false;
  std::optional<double> carried_y_norm;  /* ||grad f(y_k)|| for the row of x_k */
  LowRankPreconditioner prev_h;
  bool have_prev = false;
  int stall_count = 0;
  std::size_t k = 0;
  res.reason = TerminationReason::MaxIters;

  auto push_state_row = [&](std::size_t iter) {
    TraceRecord row;
    row.k = iter;
    row.f = f;
    row.grad_norm = gnorm;
    if (composite) row.fprime_norm = fprime_norm;
    row.y_grad_norm = carried_y_norm;
    row.tau = cfg.tau;
    row.grad_evals = oracle.grad_evals();
    row.hvp_calls = oracle.hvp_calls();
    row.inner_iters = res.inner_iters;
    row.wall_ms = wall_ms();
    res.trace.push_back(std::move(row));
    return res.trace.size() - 1;
  };

  for (;;) {
    if (best_norm <= cfg.term.eps) {
      res.reason = TerminationReason::Converged;
      break;
    }
    if (cfg.term.target_f && f <= *cfg.term.target_f) {
      res.reason = TerminationReason::Converged;
      break;
    }
    if (cfg.term.max_hvp_calls > 0 && oracle.hvp_calls() >= cfg.term.max_hvp_calls) {
      res.reason = TerminationReason::Budget;
      break;
    }
    if (k >= cfg.term.max_iters) {
      res.reason = TerminationReason::MaxIters;
      break;
    }

    const double rule_norm = composite ? fprime_norm : gnorm;
    if (rule_norm == 0.0) {
      /* Exactly stationary for the active measure (cut-negative tracks y,
       * so the min-so-far check above may not have fired). */
      res.reason = TerminationReason::Converged;
      break;
    }

    /* Refresh the preconditioner. */
    LowRankPreconditioner h;
    std::optional<std::size_t> t_used;
    double delta_exact = 0.0, delta_minus_exact = 0.0;
    bool have_exact_errors = false;
    std::optional<double> delta_est;
    if (cfg.use_dense_reference) {
      auto [hd, rep] = dense_spectral_order(oracle, x, cfg.tau);
      h = std::move(hd);
      /* Exact sense: distance to the spectral-order-tau Hessian. */
      delta_exact = rep.delta;
      delta_minus_exact = rep.delta_minus;
      have_exact_errors = true;
      delta_est = rep.delta;
    } else {
      const std::size_t T = (k == 0) ? cfg.power.warmup_T : cfg.power.hot_T;
      h = power_update(oracle, x, have_prev ? &prev_h : nullptr, cfg.tau, T, power_rng);
      t_used = T;
      if (cfg.tau > 0) delta_est = residual_aggregate(h);
    }
    ProjectorP proj(h);

    double delta_eff = 0.0, delta_minus_eff = 0.0;
    if (cfg.rule.delta) {
      delta_eff = *cfg.rule.delta;
    } else if (have_exact_errors) {
      delta_eff = delta_exact;
    } else if (cfg.tau > 0 && !warned_delta_default && cfg.rule.rule != StepRule::Fixed &&
               !cfg.rule.adaptive) {
      std::fprintf(stderr,
                   "specgrad: delta not provided and no dense reference; using 0\n");
      warned_delta_default = true;
    }
    if (cfg.rule.delta_minus) {
      delta_minus_eff = *cfg.rule.delta_minus;
    } else if (have_exact_errors) {
      delta_minus_eff = delta_minus_exact;
    }
    const double eta = cfg.rule.eta_value(delta_eff, delta_minus_eff);

    /* Compute alpha and take the step (with trial loop when adaptive). */
    StepResult sr;
    double f_next = 0.0;
    double alpha = 0.0;
    double L_used = cfg.rule.L;
    const ProjectorP* proj_arg = cutneg ? &proj : nullptr;

    auto take_step = [&](double a) {
      if (composite)
        sr = composite_step(oracle, x, g, h, a, reg, cfg.inner_tol, proj_arg);
      else
        sr = grad_step(oracle, x, g, h, a, proj_arg);
      res.inner_iters += sr.inner_iterations;
      f_next = oracle.value(sr.x_next);
      if (!std::isfinite(f_next) || !all_finite(sr.grad_next)) fail_nonfinite(k, sr.x_next);
    };

    if (cfg.rule.adaptive) {
      double trial_L = L_estimate;
      auto alpha_for_L = [&](double L) {
        trial_L = L;
        if (cfg.rule.rule == StepRule::Lipschitz)
          return alpha_lipschitz(rule_norm, L, cfg.rule.sigma_tau, delta_eff);
        return alpha_cubic_star(h, g, L, eta) + eta;
      };
      auto accept = [&](double a) {
        take_step(a);
        const double slack = kAdaptiveTol * std::max(1.0, std::fabs(f));
        if (cfg.rule.rule == StepRule::Lipschitz) {
          const double fn = kernels::nrm2(sr.F_prime_next.data(), n);
          return f - f_next >= fn * fn / (8.0 * a) - slack;
        }
        return f - f_next >=
               (trial_L / 3.0) * sr.r * sr.r * sr.r + (eta / 2.0) * sr.r * sr.r - slack;
      };
      AdaptiveOutcome out = alpha_adaptive(L_estimate, alpha_for_L, accept,
                                           cfg.rule.growth, cfg.rule.shrink);
      alpha = out.alpha;
      L_used = out.accepted_L;
    } else {
      switch (cfg.rule.rule) {
        case StepRule::Lipschitz:
          alpha = alpha_lipschitz(rule_norm, cfg.rule.L, cfg.rule.sigma_tau, delta_eff);
          break;
        case StepRule::Qsc:
          alpha = alpha_qsc(rule_norm, cfg.rule.M, cfg.rule.sigma_tau, delta_eff);
          break;
        case StepRule::CubicCut:
          alpha = alpha_cubic_star(h, g, cfg.rule.L, eta) + eta;
          break;
        case StepRule::Fixed:
          alpha = cfg.rule.fixed_alpha;
          break;
      }
      if (alpha <= 0.0) {
        std::ostringstream msg;
        msg << "minimize: rule produced alpha = " << alpha << " at iteration " << k
            << " (all constants zero?)";
        throw std::invalid_argument(msg.str());
      }
      take_step(alpha);
    }

    /* Test point and its gradient (cut-negative). */
    double gy_norm = 0.0;
    if (cutneg) {
      const std::vector<double> gy = oracle.grad(*sr.y_next);
      gy_norm = kernels::nrm2(gy.data(), n);
    }

    /* Per-step inequality checks. */
    if (cfg.check_mode != CheckMode::Off) {
      const double fn_next = kernels::nrm2(sr.F_prime_next.data(), n);

      /* Step-length and curvature bounds; rule_norm is ||grad f(x) + s|| for
       * the subgradient the step used (s = 0 when smooth). */
      {
        /* sr.d, not x_next - x: the iterate difference is quantized to the
         * ulp of x and fakes violations once steps reach the rounding floor. */
        std::vector<double> hd(n);
        h.apply(sr.d, hd);
        const double hdd = kernels::dot(hd.data(), sr.d.data(), n);
        const double rel = 1.0 + kCheckTol;
        checks.report(k, "r-bound", sr.r * alpha, rule_norm,
                      sr.r * alpha <= rule_norm * rel);
        checks.report(k, "hess-bound", hdd, sr.r * rule_norm,
                      hdd <= sr.r * rule_norm * rel);
      }
      switch (cfg.rule.rule) {
        case StepRule::Lipschitz: {
          const bool ok = check_step_lipschitz(f, f_next, alpha, fn_next, kCheckTol);
          checks.report(k, "lipschitz-progress", f - f_next,
                        fn_next * fn_next / (8.0 * alpha), ok);
          break;
        }
        case StepRule::CubicCut: {
          if (cutneg) {
            const bool ok =
                check_step_cubic(f, f_next, sr.r, L_used, eta, gy_norm, kCheckTol);
            checks.report(k, "cubic-step", f - f_next,
                          (L_used / 3.0) * sr.r * sr.r * sr.r + (eta / 2.0) * sr.r * sr.r,
                          ok);
          } else {
            /* No test point in plain mode; the function-decrease part is
             * still well-defined. */
            const double rhs =
                (L_used / 3.0) * sr.r * sr.r * sr.r + (eta / 2.0) * sr.r * sr.r;
            const bool ok =
                f - f_next >= rhs - kCheckTol * std::max(1.0, std::fabs(f));
            checks.report(k, "cubic-funcres", f - f_next, rhs, ok);
          }
          break;
        }
        case StepRule::Qsc: {
          double inner = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            inner += sr.F_prime_next[i] * (x[i] - sr.x_next[i]);
          const bool ok = check_step_qsc(sr.F_prime_next, x, sr.x_next, alpha,
                                         kCheckTol * std::max(1.0, std::fabs(f)));
          checks.report(k, "qsc-onestep", inner, fn_next * fn_next / (2.0 * alpha), ok);
          break;
        }
        case StepRule::Fixed:
          break;  /* no inequality backs an arbitrary alpha */
      }
    }

    /* Row for iteration k (state on arrival plus this step). */
    {
      const std::size_t idx = push_state_row(k);
      TraceRecord& row = res.trace[idx];
      row.alpha = alpha;
      row.step_norm = sr.r;
      row.T = t_used;
      row.delta_est = delta_est;
    }

    /* Advance. */
    x = std::move(sr.x_next);
    f = f_next;
    g = std::move(sr.grad_next);
    gnorm = kernels::nrm2(g.data(), n);
    if (composite) {
      fprime = std::move(sr.F_prime_next);
      fprime_norm = kernels::nrm2(fprime.data(), n);
    }
    res.f_min = std::min(res.f_min, f);
    carried_y_norm = cutneg ? std::optional<double>(gy_norm) : std::nullopt;

    const double stop_candidate = cutneg ? gy_norm : (composite ? fprime_norm : gnorm);
    if (stop_candidate < best_norm) {
      best_norm = stop_candidate;
      res.best_stopping_norm = stop_candidate;
      res.best_iter = k + 1;
      if (cutneg) {
        res.x_best = *sr.y_next;
        res.f_best = oracle.value(res.x_best);
        res.f_min = std::min(res.f_min, res.f_best);
      } else {
        res.x_best = x;
        res.f_best = f;
      }
    }

    if (sr.r < kStallScale * (1.0 + kernels::nrm2(x.data(), n))) {
      if (++stall_count >= kStallLimit) {
        ++k;
        res.reason = TerminationReason::Stalled;
        break;
      }
    } else {
      stall_count = 0;
    }

    prev_h = std::move(h);
    have_prev = cfg.tau > 0;
    ++k;
  }

  res.iterations = k;
  push_state_row(k);  /* terminal state, step fields empty */
  res.x_final = std::move(x);
  res.f_final = f;
  res.grad_evals = oracle.grad_evals();
  res.hvp_calls = oracle.hvp_calls();
  res.f_evals = oracle.value_evals();
  res.final_L_estimate = L_estimate;
  return res;
}

}  // namespace

SolveResult minimize(const ObjectiveOracle& oracle, const std::vector<double>& x0,
                     const SolverConfig& cfg) {
  return run_loop(oracle, nullptr, x0, cfg);
}

SolveResult minimize(const CompositeOracle& oracle, const std::vector<double>& x0,
                     const SolverConfig& cfg) {
  if (oracle.smooth == nullptr)
    throw std::invalid_argument("minimize: composite oracle lacks a smooth part");
  return run_loop(*oracle.smooth, &oracle.psi, x0, cfg);
}

}  // namespace specgrad
