#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "specgrad/dense.h"
#include "specgrad/kernels.h"
#include "specgrad/problems.h"
#include "specgrad/rng.h"
#include "specgrad/solver.h"

using namespace specgrad;

namespace {

ProblemSpec quadratic_spec(std::vector<double> eigenvalues, std::vector<double> b = {}) {
  ProblemSpec ps;
  ps.kind = ProblemKind::Quadratic;
  ps.eigenvalues = std::move(eigenvalues);
  ps.b = std::move(b);
  ps.seed = 7;
  return ps;
}

SolverConfig base_config() {
  SolverConfig cfg;
  cfg.tau = 0;
  cfg.rule.rule = StepRule::Lipschitz;
  cfg.rule.L = 0.0;
  cfg.term.eps = 1e-8;
  cfg.term.max_iters = 5000;
  cfg.check_mode = CheckMode::Strict;
  return cfg;
}

/* Plain gradient descent with fixed step 1/alpha, for the tau = 0
 * equivalence oracle. */
std::vector<double> reference_gd(const ObjectiveOracle& oracle, std::vector<double> x,
                                 double alpha, std::size_t iters) {
  const std::size_t n = x.size();
  std::vector<double> g(n);
  for (std::size_t k = 0; k < iters; ++k) {
    oracle.gradient(x, g);
    for (std::size_t i = 0; i < n; ++i) x[i] -= g[i] / alpha;
  }
  return x;
}

}  // namespace

TEST_CASE("tau = 0 with a constant rule reproduces gradient descent bitwise") {
  const auto ps = quadratic_spec({4.0, 2.0, 1.0}, {1.0, 2.0, 0.5});
  const auto oracle = build_oracle(ps);
  const std::vector<double> x0 = {1.0, -1.0, 2.0};

  auto cfg = base_config();
  cfg.rule.rule = StepRule::Fixed;
  cfg.rule.fixed_alpha = 8.0;
  cfg.term.eps = 1e-300;       /* never converge by norm */
  cfg.term.max_iters = 40;
  cfg.check_mode = CheckMode::Off;

  const auto res = minimize(*oracle, x0, cfg);
  const auto ref = reference_gd(*oracle, x0, 8.0, 40);
  REQUIRE(res.iterations == 40);
  for (std::size_t i = 0; i < 3; ++i) CHECK(res.x_final[i] == ref[i]);
}

TEST_CASE("tau = 0 lipschitz rule on a quadratic equals sigma-step descent") {
  /* L = 0 for quadratics, so alpha = sigma_tau every iteration and the run
   * is plain gradient descent with step 1/sigma. */
  const auto ps = quadratic_spec({4.0, 2.0, 1.0}, {1.0, 2.0, 0.5});
  const auto oracle = build_oracle(ps);
  const std::vector<double> x0 = {1.0, -1.0, 2.0};

  auto cfg = base_config();
  cfg.rule.sigma_tau = 4.0;  /* = lambda_max = lambda_{tau+1} at tau = 0 */
  cfg.term.eps = 1e-300;
  cfg.term.max_iters = 25;

  const auto res = minimize(*oracle, x0, cfg);
  const auto ref = reference_gd(*oracle, x0, 4.0, 25);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(res.x_final[i] == doctest::Approx(ref[i]).epsilon(1e-13));
  CHECK(res.violations.empty());
}

TEST_CASE("a stationary start converges in zero iterations") {
  const auto ps = quadratic_spec({2.0, 5.0}, {2.0, 5.0});
  const auto oracle = build_oracle(ps);
  auto cfg = base_config();
  cfg.rule.sigma_tau = 5.0;
  const auto res = minimize(*oracle, {1.0, 1.0}, cfg);
  CHECK(res.iterations == 0);
  CHECK(res.reason == TerminationReason::Converged);
  CHECK(res.trace.size() == 1);  /* terminal row only */
  CHECK(res.best_stopping_norm <= 1e-14);
  CHECK(res.grad_evals == 1);
}

TEST_CASE("descent is monotone and the trace is consistent") {
  ProblemSpec ps;
  ps.kind = ProblemKind::DiagonalNN;
  ps.target_c = {1.0, -0.5, 0.25, 2.0};
  ps.seed = 3;
  const auto oracle = build_oracle(ps);
  auto x0 = default_x0(ps, *oracle);

  auto cfg = base_config();
  cfg.tau = 2;
  cfg.rule.rule = StepRule::Lipschitz;
  cfg.rule.L = 6.0;          /* diagonal NN Hessian is 6-Lipschitz per pair block */
  cfg.rule.sigma_tau = 8.0;  /* generous curvature cap near the start region */
  cfg.rule.delta = 0.5;
  cfg.term.max_iters = 120;
  cfg.term.eps = 1e-10;
  cfg.check_mode = CheckMode::Warn;

  const auto res = minimize(*oracle, x0, cfg);
  REQUIRE(res.trace.size() >= 2);
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].f <= res.trace[i - 1].f + 1e-12 * std::max(1.0, std::fabs(res.trace[i - 1].f)));
    CHECK(res.trace[i].k == i);
    CHECK(res.trace[i].grad_evals >= res.trace[i - 1].grad_evals);
    CHECK(res.trace[i].hvp_calls >= res.trace[i - 1].hvp_calls);
  }
  /* Terminal row carries no step fields. */
  CHECK(!res.trace.back().alpha.has_value());
  CHECK(!res.trace.back().step_norm.has_value());
  /* Non-terminal rows do. */
  CHECK(res.trace.front().alpha.has_value());

  /* best_stopping_norm is the min over recorded gradient norms. */
  double best = res.trace.front().grad_norm;
  for (const auto& row : res.trace) best = std::min(best, row.grad_norm);
  CHECK(res.best_stopping_norm == doctest::Approx(best));
  CHECK(res.f_min <= res.f_final + 1e-15);
}

TEST_CASE("same configuration and seed give a bit-identical trace") {
  ProblemSpec ps;
  ps.kind = ProblemKind::MatrixFactorization;
  ps.mf_n = 4;
  ps.mf_m = 3;
  ps.mf_r = 2;
  ps.seed = 21;
  const auto oracle = build_oracle(ps);
  const auto x0 = default_x0(ps, *oracle);

  auto cfg = base_config();
  cfg.tau = 3;
  cfg.rule.rule = StepRule::Lipschitz;
  cfg.rule.adaptive = true;
  cfg.rule.initial_L = 1.0;
  cfg.rule.delta = 0.0;
  cfg.power.seed = 99;
  cfg.term.max_iters = 30;
  cfg.term.eps = 1e-12;
  cfg.check_mode = CheckMode::Off;

  const auto r1 = minimize(*oracle, x0, cfg);
  const auto r2 = minimize(*oracle, x0, cfg);
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (std::size_t i = 0; i < r1.trace.size(); ++i) {
    CHECK(r1.trace[i].f == r2.trace[i].f);
    CHECK(r1.trace[i].grad_norm == r2.trace[i].grad_norm);
    CHECK(r1.trace[i].alpha.value_or(-1.0) == r2.trace[i].alpha.value_or(-1.0));
    CHECK(r1.trace[i].step_norm.value_or(-1.0) == r2.trace[i].step_norm.value_or(-1.0));
  }
  for (std::size_t i = 0; i < r1.x_final.size(); ++i) CHECK(r1.x_final[i] == r2.x_final[i]);
}

TEST_CASE("hvp budget terminates the run") {
  const auto ps = quadratic_spec({100.0, 1.0}, {1.0, 1.0});
  const auto oracle = build_oracle(ps);
  auto cfg = base_config();
  cfg.tau = 1;
  cfg.rule.sigma_tau = 1.0;
  cfg.rule.delta = 0.0;
  cfg.power.warmup_T = 5;
  cfg.term.eps = 1e-300;
  cfg.term.max_iters = 100000;
  /* Small enough to bind before the iterates hit the exact minimizer (the
   * un-rotated problem reaches gradient 0 in a dozen iterations, satisfying
   * even eps = 1e-300). */
  cfg.term.max_hvp_calls = 19;
  const auto res = minimize(*oracle, {3.0, -4.0}, cfg);
  CHECK(res.reason == TerminationReason::Budget);
  /* The budget may overshoot by at most one refresh batch. */
  CHECK(res.hvp_calls >= 19);
  CHECK(res.hvp_calls <= 19 + static_cast<long long>(cfg.power.warmup_T + 1));
}

TEST_CASE("target_f stops the run as converged") {
  const auto ps = quadratic_spec({2.0, 1.0}, {0.0, 0.0});
  const auto oracle = build_oracle(ps);
  auto cfg = base_config();
  cfg.rule.sigma_tau = 2.0;
  cfg.term.eps = 1e-300;
  cfg.term.max_iters = 1000;
  cfg.term.target_f = 1e-3;
  const auto res = minimize(*oracle, {2.0, 2.0}, cfg);
  CHECK(res.reason == TerminationReason::Converged);
  CHECK(res.f_final <= 1e-3);
  CHECK(res.iterations < 1000);
}

TEST_CASE("an inflated alpha never trips checks; a deflated L does") {
  const auto ps = quadratic_spec({10.0, 3.0, 1.0}, {1.0, -2.0, 0.5});
  const auto oracle = build_oracle(ps);
  const std::vector<double> x0 = {5.0, 5.0, 5.0};

  SUBCASE("honest constants pass in strict mode") {
    auto cfg = base_config();
    cfg.rule.sigma_tau = 10.0;
    cfg.term.max_iters = 200;
    cfg.check_mode = CheckMode::Strict;
    const auto res = minimize(*oracle, x0, cfg);
    CHECK(res.violations.empty());
    CHECK(res.reason == TerminationReason::Converged);
  }

  SUBCASE("sigma understated by 10x violates the progress bound in warn mode") {
    auto cfg = base_config();
    cfg.rule.sigma_tau = 1.0;  /* true lambda_max is 10 */
    cfg.term.max_iters = 60;
    cfg.term.eps = 1e-300;
    cfg.check_mode = CheckMode::Warn;
    const auto res = minimize(*oracle, x0, cfg);
    CHECK(!res.violations.empty());
    CHECK(res.violations.front().inequality == "lipschitz-progress");
  }

  SUBCASE("strict mode aborts on the same violation") {
    auto cfg = base_config();
    cfg.rule.sigma_tau = 1.0;
    cfg.term.max_iters = 60;
    cfg.term.eps = 1e-300;
    cfg.check_mode = CheckMode::Strict;
    CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::runtime_error);
  }

  SUBCASE("check mode off records nothing") {
    auto cfg = base_config();
    cfg.rule.sigma_tau = 1.0;
    cfg.term.max_iters = 60;
    cfg.term.eps = 1e-300;
    cfg.check_mode = CheckMode::Off;
    const auto res = minimize(*oracle, x0, cfg);
    CHECK(res.violations.empty());
  }
}

TEST_CASE("dense reference cut-negative run matches the cubic analysis") {
  /* One diagonal NN pair: f = (xy - 1)^2 / 2, non-convex of grade 1 in 2
   * dimensions, bounded below.  On the descent region from (2, 1) the
   * Hessian is 20-Lipschitz and lambda_2 <= 5 with lots of room, so the
   * per-step cubic inequalities must hold in strict mode with exact
   * eigenpairs and deltas. */
  ProblemSpec ps;
  ps.kind = ProblemKind::DiagonalNN;
  ps.target_c = {1.0};
  const auto oracle = build_oracle(ps);
  auto cfg = base_config();
  cfg.tau = 1;
  cfg.mode = SolverMode::CutNegative;
  cfg.rule.rule = StepRule::CubicCut;
  cfg.rule.L = 20.0;
  cfg.rule.sigma_tau_plus = 5.0;
  cfg.use_dense_reference = true;
  cfg.term.max_iters = 4000;
  cfg.term.eps = 1e-9;
  cfg.check_mode = CheckMode::Strict;

  const auto res = minimize(*oracle, {2.0, 1.0}, cfg);
  CHECK(res.violations.empty());
  /* Every non-initial row reports the test point's gradient norm. */
  for (std::size_t i = 1; i < res.trace.size(); ++i)
    CHECK(res.trace[i].y_grad_norm.has_value());
  /* The cut-negative stopping norm is ||grad f(y)||, driven below eps. */
  CHECK(res.reason == TerminationReason::Converged);
  CHECK(res.best_stopping_norm <= 1e-9);
}

TEST_CASE("composite l1 solve reaches the subdifferential optimality") {
  /* min 0.5 x^T diag(2,1) x - b^T x + 0.4 ||x||_1. */
  const auto ps = quadratic_spec({2.0, 1.0}, {3.0, 0.2});
  const auto smooth = build_oracle(ps);
  CompositeOracle co;
  co.smooth = smooth.get();
  co.psi.kind = RegKind::L1;
  co.psi.coeff = 0.4;

  auto cfg = base_config();
  cfg.mode = SolverMode::Composite;
  cfg.rule.rule = StepRule::Qsc;
  cfg.rule.M = 0.0;
  cfg.rule.sigma_tau = 2.0;
  cfg.term.eps = 1e-10;
  cfg.term.max_iters = 2000;
  cfg.inner_tol = 1e-13;

  const auto res = minimize(co, {5.0, 5.0}, cfg);
  CHECK(res.reason == TerminationReason::Converged);
  /* Optimality: x1 = (3 - 0.4)/2 = 1.3; |grad_2| = 0.2 < 0.4 pins x2 = 0. */
  CHECK(res.x_final[0] == doctest::Approx(1.3).epsilon(1e-7));
  CHECK(res.x_final[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  for (std::size_t i = 1; i + 1 < res.trace.size(); ++i)
    CHECK(res.trace[i].fprime_norm.has_value());
  CHECK(res.inner_iters > 0);
  CHECK(res.violations.empty());
}

TEST_CASE("composite box solve stays feasible and stops at the wall") {
  const auto ps = quadratic_spec({1.0, 1.0}, {4.0, -4.0});  /* minimizer (4, -4) */
  const auto smooth = build_oracle(ps);
  CompositeOracle co;
  co.smooth = smooth.get();
  co.psi.kind = RegKind::Box;
  co.psi.lo = 0.0;
  co.psi.hi = 1.0;

  auto cfg = base_config();
  cfg.mode = SolverMode::Composite;
  cfg.rule.rule = StepRule::Qsc;
  cfg.rule.sigma_tau = 1.0;
  cfg.term.eps = 1e-9;
  cfg.term.max_iters = 500;
  cfg.inner_tol = 1e-13;

  const auto res = minimize(co, {0.5, 0.5}, cfg);
  CHECK(res.reason == TerminationReason::Converged);
  CHECK(res.x_final[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(res.x_final[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
}

TEST_CASE("adaptive lipschitz solves without a supplied L") {
  ProblemSpec ps;
  ps.kind = ProblemKind::RegQuadratic;
  ps.eigenvalues = {3.0, 1.0};
  ps.b = {1.0, 2.0};
  ps.p = 3.0;
  ps.sigma_reg = 0.5;
  const auto oracle = build_oracle(ps);

  auto cfg = base_config();
  cfg.rule.adaptive = true;
  cfg.rule.initial_L = 1e-3;
  /* The acceptance test reads progress off f - f_next, so the reachable
   * accuracy is bounded by the rounding noise of f; 1e-6 sits safely above
   * that floor for |f*| ~ 1.5. */
  cfg.term.eps = 1e-6;
  cfg.term.max_iters = 4000;
  cfg.check_mode = CheckMode::Strict;

  const auto res = minimize(*oracle, {2.0, -2.0}, cfg);
  CHECK(res.reason == TerminationReason::Converged);
  CHECK(res.final_L_estimate > 0.0);
  CHECK(res.violations.empty());
}

TEST_CASE("stall detection fires when alpha is absurdly large") {
  const auto ps = quadratic_spec({1.0, 1.0}, {10.0, 10.0});
  const auto oracle = build_oracle(ps);
  auto cfg = base_config();
  cfg.rule.rule = StepRule::Fixed;
  cfg.rule.fixed_alpha = 1e300;  /* steps shrink to numerical zero */
  cfg.term.eps = 1e-15;
  cfg.term.max_iters = 100000;
  cfg.check_mode = CheckMode::Off;
  const auto res = minimize(*oracle, {0.0, 0.0}, cfg);
  CHECK(res.reason == TerminationReason::Stalled);
  CHECK(res.iterations < 100);
}

TEST_CASE("configuration validation rejects inconsistent setups") {
  const auto ps = quadratic_spec({1.0, 1.0});
  const auto oracle = build_oracle(ps);
  const std::vector<double> x0 = {1.0, 1.0};

  auto cfg = base_config();
  cfg.tau = 5;  /* > n */
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.term.eps = -1.0;
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.term.max_iters = 0;
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.mode = SolverMode::CutNegative;  /* requires the cubic-cut rule */
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.rule.rule = StepRule::Qsc;
  cfg.rule.adaptive = true;  /* adaptive covers lipschitz and cubic-cut only */
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.rule.rule = StepRule::Fixed;  /* fixed_alpha unset */
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.rule.rule = StepRule::CubicCut;  /* non-adaptive cubic needs L > 0 */
  cfg.rule.L = 0.0;
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  cfg.tau = 1;
  cfg.power.warmup_T = 0;  /* no basis to hot start from at k = 0 */
  CHECK_THROWS_AS(minimize(*oracle, x0, cfg), std::invalid_argument);

  cfg = base_config();
  CHECK_THROWS_AS(minimize(*oracle, {1.0, 2.0, 3.0}, cfg), std::invalid_argument);

  /* Composite entry point requires a smooth part. */
  CompositeOracle co;
  co.psi.kind = RegKind::L1;
  co.psi.coeff = 1.0;
  cfg = base_config();
  cfg.mode = SolverMode::Composite;
  CHECK_THROWS_AS(minimize(co, x0, cfg), std::invalid_argument);

  /* Non-zero psi demands composite mode. */
  CompositeOracle co2;
  co2.smooth = oracle.get();
  co2.psi.kind = RegKind::L1;
  co2.psi.coeff = 1.0;
  cfg = base_config();
  cfg.mode = SolverMode::Plain;
  CHECK_THROWS_AS(minimize(co2, x0, cfg), std::invalid_argument);
}

TEST_CASE("preconditioning with tau = 1 beats tau = 0 on an ill-conditioned quadratic") {
  std::vector<double> eig(20, 1.0);
  eig[0] = 500.0;
  const auto ps = quadratic_spec(eig);
  const auto oracle = build_oracle(ps);
  SplitMix64 rng(77);
  std::vector<double> x0(20);
  rng.fill_gaussian(x0);

  auto gd = base_config();
  gd.rule.sigma_tau = 500.0;
  gd.term.eps = 1e-8;
  gd.term.max_iters = 100000;
  gd.check_mode = CheckMode::Off;
  const auto res_gd = minimize(*oracle, x0, gd);

  auto pre = base_config();
  pre.tau = 1;
  pre.rule.sigma_tau = 1.0;  /* lambda_2 */
  pre.rule.delta = 1e-6;
  pre.power.warmup_T = 60;
  pre.term.eps = 1e-8;
  pre.term.max_iters = 100000;
  pre.check_mode = CheckMode::Off;
  const auto res_pre = minimize(*oracle, x0, pre);

  CHECK(res_gd.reason == TerminationReason::Converged);
  CHECK(res_pre.reason == TerminationReason::Converged);
  CHECK(res_pre.iterations * 20 <= res_gd.iterations);
}

TEST_CASE("per-step check predicates evaluate their formulas") {
  /* check_step_lipschitz: 1 - 0 >= 1/(8*2) = 0.0625. */
  CHECK(check_step_lipschitz(1.0, 0.0, 2.0, 1.0, 1e-9));
  CHECK(!check_step_lipschitz(0.05, 0.0, 2.0, 1.0, 1e-9));
  /* Slack scales with |f_prev|. */
  CHECK(check_step_lipschitz(1e6, 1e6 - 0.05, 2.0, 1.0, 1e-6));

  /* check_step_cubic at eta = 0 drops the 1/(32 eta) branch. */
  const double L = 2.0, r = 1.0;
  const double drop = (L / 3.0) * r * r * r;
  CHECK(check_step_cubic(drop + 1.0, 1.0, r, L, 0.0, 0.0, 1e-9));
  CHECK(!check_step_cubic(drop - 0.1, 0.0, r, L, 0.0, 0.0, 1e-9));
  /* Gradient bound at y: ||g_y|| <= 2 eta r + L r^2. */
  CHECK(!check_step_cubic(10.0, 0.0, r, L, 0.5, 4.0, 1e-9));
  CHECK(check_step_cubic(10.0, 0.0, r, L, 0.5, 2.9, 1e-9));

  /* check_step_qsc on a hand example: F' = (1, 0), x - x_next = (1, 0),
   * alpha = 1: 1 >= 0.5. */
  CHECK(check_step_qsc({1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}, 1.0, 1e-12));
  CHECK(!check_step_qsc({1.0, 0.0}, {1.2, 0.0}, {1.0, 0.0}, 1.0, 1e-12));
}
