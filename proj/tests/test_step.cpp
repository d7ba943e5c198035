#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "specgrad/composite.h"
#include "specgrad/dense.h"
#include "specgrad/kernels.h"
#include "specgrad/oracle.h"
#include "specgrad/problems.h"
#include "specgrad/rng.h"
#include "specgrad/spectral.h"
#include "specgrad/step.h"

using namespace specgrad;

namespace {

/* Hand-assembled rank-tau preconditioner with an orthonormal basis drawn
 * from a seeded QR. */
LowRankPreconditioner make_preconditioner(std::size_t n, std::vector<double> a, SplitMix64& rng) {
  LowRankPreconditioner h;
  h.n = n;
  h.tau = a.size();
  h.a_raw = a;
  h.a = std::move(a);
  h.residuals.assign(h.tau, 0.0);
  if (h.tau > 0) {
    DenseMatrix w(n, h.tau);
    for (std::size_t j = 0; j < h.tau; ++j) rng.fill_gaussian({w.col(j), n});
    h.V = qr_orthonormalize(w, rng);
  }
  return h;
}

/* Dense (H + alpha I)^{-1} g for cross-checking the Woodbury identity. */
std::vector<double> dense_shifted_solve(const LowRankPreconditioner& h, double alpha,
                                        const std::vector<double>& g) {
  const std::size_t n = h.n;
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = alpha;
  for (std::size_t k = 0; k < h.tau; ++k)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) m(i, j) += h.a[k] * h.V(i, k) * h.V(j, k);
  return solve_shifted_spd(m, 0.0, g);
}

std::unique_ptr<ObjectiveOracle> diag_quadratic(std::vector<double> eigenvalues,
                                                std::vector<double> b = {}) {
  const std::size_t n = eigenvalues.size();
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = eigenvalues[i];
  return std::make_unique<QuadraticOracle>(std::move(a), std::move(b));
}

}  // namespace

TEST_CASE("woodbury with tau = 0 is exactly g / alpha") {
  LowRankPreconditioner h;
  h.n = 3;
  h.tau = 0;
  const std::vector<double> g = {0.1, -2.0, 7.5};
  const auto s = woodbury_apply(h, 4.0, g);
  /* Bitwise: the identity degenerates to a single division. */
  CHECK(s[0] == g[0] / 4.0);
  CHECK(s[1] == g[1] / 4.0);
  CHECK(s[2] == g[2] / 4.0);
}

TEST_CASE("woodbury rank-1 fixture: a = (3), v = e1, alpha = 1") {
  LowRankPreconditioner h;
  h.n = 2;
  h.tau = 1;
  h.a = {3.0};
  h.a_raw = {3.0};
  h.V = DenseMatrix(2, 1);
  h.V(0, 0) = 1.0;
  const auto s = woodbury_apply(h, 1.0, {1.0, 2.0});
  /* (H + I) = diag(4, 1), so the solve is (1/4, 2). */
  CHECK(s[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("woodbury agrees with a dense solve on random problems") {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + (rng.next_u64() % 9);
    const std::size_t tau = rng.next_u64() % (n + 1);
    std::vector<double> a(tau);
    for (double& v : a) a[&v - a.data()] = std::exp(2.0 * rng.next_gaussian());
    auto h = make_preconditioner(n, a, rng);
    const double alpha = std::exp(rng.next_gaussian());
    std::vector<double> g(n);
    rng.fill_gaussian(g);

    const auto fast = woodbury_apply(h, alpha, g);
    const auto slow = dense_shifted_solve(h, alpha, g);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err = std::max(err, std::fabs(fast[i] - slow[i]));
      scale = std::max(scale, std::fabs(slow[i]));
    }
    CHECK(err <= 1e-11 * std::max(1.0, scale));
  }
}

TEST_CASE("woodbury skips zero-clipped values and validates alpha") {
  SplitMix64 rng(42);
  auto h = make_preconditioner(4, {2.5, 0.0}, rng);
  const std::vector<double> g = {1.0, -1.0, 0.5, 2.0};
  const auto with_zero = woodbury_apply(h, 1.5, g);

  /* Dropping the zero column entirely must give the same solve. */
  LowRankPreconditioner h1;
  h1.n = 4;
  h1.tau = 1;
  h1.a = {2.5};
  h1.a_raw = {2.5};
  h1.V = DenseMatrix(4, 1);
  for (std::size_t i = 0; i < 4; ++i) h1.V(i, 0) = h.V(i, 0);
  const auto without = woodbury_apply(h1, 1.5, g);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(with_zero[i] == doctest::Approx(without[i]).epsilon(1e-14));

  CHECK_THROWS_AS(woodbury_apply(h, 0.0, g), std::invalid_argument);
  CHECK_THROWS_AS(woodbury_apply(h, -1.0, g), std::invalid_argument);
}

TEST_CASE("grad_step fixture: H = 0, alpha = 2 halves the gradient") {
  const auto oracle = diag_quadratic({1.0, 1.0}, {0.0, 0.0});
  LowRankPreconditioner h;
  h.n = 2;
  h.tau = 0;
  const std::vector<double> x = {0.0, 0.0};
  const std::vector<double> g = {2.0, 4.0};
  const auto st = grad_step(*oracle, x, g, h, 2.0);
  CHECK(st.x_next[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(st.x_next[1] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(st.r == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
  /* Plain step: F' is the fresh gradient and y is absent. */
  CHECK(st.F_prime_next == st.grad_next);
  CHECK(!st.y_next.has_value());
  CHECK(st.inner_iterations == 0);
}

TEST_CASE("a stationary point is a fixed point of the step") {
  /* Minimizer of 0.5 x^T diag(2,5) x - (2,5)^T x is (1,1). */
  const auto oracle = diag_quadratic({2.0, 5.0}, {2.0, 5.0});
  const std::vector<double> x = {1.0, 1.0};
  std::vector<double> g(2);
  oracle->gradient(x, g);
  REQUIRE(kernels::nrm2(g.data(), 2) <= 1e-14);
  SplitMix64 rng(43);
  const auto h = make_preconditioner(2, {1.0}, rng);
  const auto st = grad_step(*oracle, x, g, h, 3.0);
  CHECK(st.r <= 1e-15);
  CHECK(st.x_next[0] == doctest::Approx(1.0));
  CHECK(st.x_next[1] == doctest::Approx(1.0));
}

TEST_CASE("full-rank H with tiny alpha approaches the Newton step") {
  const auto oracle = diag_quadratic({10.0, 4.0, 1.0}, {10.0, 8.0, 3.0});
  const std::vector<double> x = {0.0, 0.0, 0.0};
  std::vector<double> g(3);
  oracle->gradient(x, g);
  const auto [h, rep] = dense_spectral_order(*oracle, x, 3);
  const auto st = grad_step(*oracle, x, g, h, 1e-8);
  /* Newton from 0 lands at the minimizer (1, 2, 3). */
  CHECK(st.x_next[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(st.x_next[1] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(st.x_next[2] == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("alpha = 0 takes the dense Newton path only for full-rank H") {
  const auto oracle = diag_quadratic({10.0, 4.0, 1.0}, {10.0, 8.0, 3.0});
  const std::vector<double> x = {0.0, 0.0, 0.0};
  std::vector<double> g(3);
  oracle->gradient(x, g);

  const auto [full, rep3] = dense_spectral_order(*oracle, x, 3);
  const auto st = grad_step(*oracle, x, g, full, 0.0);
  CHECK(st.x_next[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.x_next[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(st.x_next[2] == doctest::Approx(3.0).epsilon(1e-12));

  const auto [partial, rep2] = dense_spectral_order(*oracle, x, 2);
  CHECK_THROWS_AS(grad_step(*oracle, x, g, partial, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(grad_step(*oracle, x, g, full, -0.5), std::invalid_argument);
}

TEST_CASE("grad_step costs exactly one gradient and no hvp") {
  const auto oracle = diag_quadratic({3.0, 1.0}, {1.0, 1.0});
  CountingOracle counting(*oracle);
  const std::vector<double> x = {4.0, -2.0};
  std::vector<double> g(2);
  counting.gradient(x, g);
  counting.reset_counters();
  SplitMix64 rng(44);
  const auto h = make_preconditioner(2, {2.0}, rng);
  const auto st = grad_step(counting, x, g, h, 1.0);
  CHECK(counting.grad_evals() == 1);
  CHECK(counting.hvp_calls() == 0);
  CHECK(counting.value_evals() == 0);
  CHECK(st.grad_next.size() == 2);
}

TEST_CASE("step displacement and curvature bounds hold on random problems") {
  SplitMix64 rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + (rng.next_u64() % 7);
    const std::size_t tau = rng.next_u64() % (n + 1);
    std::vector<double> a(tau);
    for (std::size_t i = 0; i < tau; ++i) a[i] = std::exp(rng.next_gaussian());
    auto h = make_preconditioner(n, a, rng);
    const double alpha = 0.1 + std::exp(rng.next_gaussian());
    std::vector<double> eig(n), g(n), x(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = 1.0 + i;
    rng.fill_gaussian(g);
    rng.fill_gaussian(x);
    const auto oracle = diag_quadratic(eig);

    const auto st = grad_step(*oracle, x, g, h, alpha);
    const double gnorm = kernels::nrm2(g.data(), n);

    /* ||x_next - x|| <= ||g|| / alpha. */
    CHECK(st.r <= gnorm / alpha * (1.0 + 1e-12));

    /* <H d, d> <= r ||g||. */
    std::vector<double> d(n), hd(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = st.x_next[i] - x[i];
    h.apply(d, hd);
    CHECK(kernels::dot(hd.data(), d.data(), n) <= st.r * gnorm * (1.0 + 1e-12) + 1e-300);
  }
}

TEST_CASE("composite step with psi = 0 matches grad_step") {
  const auto oracle = diag_quadratic({2.0, 0.5, 1.0}, {1.0, -1.0, 0.5});
  SplitMix64 rng(46);
  const auto h = make_preconditioner(3, {4.0, 1.5}, rng);
  std::vector<double> x = {0.3, -0.7, 1.1};
  std::vector<double> g(3);
  oracle->gradient(x, g);

  const Regularizer psi;  /* RegKind::Zero */
  const auto plain = grad_step(*oracle, x, g, h, 2.0);
  const auto prox = composite_step(*oracle, x, g, h, 2.0, psi, 1e-13);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(prox.x_next[i] == doctest::Approx(plain.x_next[i]).epsilon(1e-10));
  CHECK(prox.inner_iterations >= 1);

  /* psi'(x_next) := -g - (H + alpha I)(x_next - x) must vanish with psi. */
  const double fp = kernels::nrm2(prox.F_prime_next.data(), 3);
  const double gn = kernels::nrm2(prox.grad_next.data(), 3);
  CHECK(fp == doctest::Approx(gn).epsilon(1e-8));
}

TEST_CASE("l1 fixture: prox shrinkage with H = 0") {
  /* min <g, y> + (alpha/2)||y||^2 + 0.5||y||_1 from x = 0, g = (2, 0.3),
   * alpha = 1: soft-threshold(-g, 0.5) = (-1.5, 0). */
  const auto oracle = diag_quadratic({1.0, 1.0});
  LowRankPreconditioner h;
  h.n = 2;
  h.tau = 0;
  Regularizer psi;
  psi.kind = RegKind::L1;
  psi.coeff = 0.5;
  const std::vector<double> x = {0.0, 0.0};
  const std::vector<double> g = {2.0, 0.3};
  const auto st = composite_step(*oracle, x, g, h, 1.0, psi, 1e-13);
  CHECK(st.x_next[0] == doctest::Approx(-1.5).epsilon(1e-10));
  CHECK(st.x_next[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));

  /* Subgradient consistency: F' = g(x_next) + psi'(x_next) with the
   * implicit subgradient; at x_next the first coordinate is smooth. */
  CHECK(st.F_prime_next[0] ==
        doctest::Approx(st.grad_next[0] + 0.5 * (st.x_next[0] > 0 ? 1.0 : -1.0)).epsilon(1e-8));
}

TEST_CASE("box fixture: projection onto [0, 1]^2") {
  const auto oracle = diag_quadratic({1.0, 1.0});
  LowRankPreconditioner h;
  h.n = 2;
  h.tau = 0;
  Regularizer psi;
  psi.kind = RegKind::Box;
  psi.lo = 0.0;
  psi.hi = 1.0;
  const std::vector<double> x = {0.0, 0.0};
  const std::vector<double> g = {1.0, -1.0};
  const auto st = composite_step(*oracle, x, g, h, 1.0, psi, 1e-13);
  /* Unconstrained target is (-1, 1); clamping gives (0, 1). */
  CHECK(st.x_next[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(st.x_next[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("composite inner loop satisfies the one-step stationarity bound") {
  /* <F'(x_next), x - x_next> >= (1/(2 alpha)) ||F'(x_next)||^2 whenever
   * alpha >= ||H - A||; for a quadratic the gradient is exact so the bound
   * reduces to a spectral condition on H + alpha I - A.  Checked on random
   * l1 problems with alpha set just above the approximation error. */
  SplitMix64 rng(47);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 3 + (rng.next_u64() % 5);
    std::vector<double> eig(n), x(n), g(n), a(2);
    for (std::size_t i = 0; i < n; ++i) eig[i] = 0.5 + i;
    rng.fill_gaussian(x);
    a[0] = std::exp(rng.next_gaussian());
    a[1] = 0.5 * a[0];
    const auto oracle = diag_quadratic(eig);
    oracle->gradient(x, g);  /* the bound needs the true gradient at x */
    auto h = make_preconditioner(n, a, rng);

    /* delta = ||H - A|| via a dense difference. */
    DenseMatrix diff(n, n);
    for (std::size_t i = 0; i < n; ++i) diff(i, i) = -eig[i];
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t jj = 0; jj < n; ++jj)
        for (std::size_t ii = 0; ii < n; ++ii) diff(ii, jj) += a[k] * h.V(ii, k) * h.V(jj, k);
    const double alpha = spectral_norm_sym(diff) + 0.1 + std::exp(rng.next_gaussian());
    Regularizer psi;
    psi.kind = RegKind::L1;
    psi.coeff = 0.3;

    const auto st = composite_step(*oracle, x, g, h, alpha, psi, 1e-13);
    /* Rebuild psi'(x_next) from the definition and measure the bound. */
    std::vector<double> d(n), hd(n), fprime(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = st.x_next[i] - x[i];
    h.apply(d, hd);
    for (std::size_t i = 0; i < n; ++i) fprime[i] = -g[i] - hd[i] - alpha * d[i] + st.grad_next[i];
    const double fp2 = kernels::dot(fprime.data(), fprime.data(), n);
    double lhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) lhs += fprime[i] * (x[i] - st.x_next[i]);
    CHECK(lhs >= fp2 / (2.0 * alpha) - 1e-9 * std::max(1.0, fp2));
  }
}

TEST_CASE("composite step validates alpha and enforces the iteration cap") {
  const auto oracle = diag_quadratic({1.0, 1.0});
  LowRankPreconditioner h;
  h.n = 2;
  h.tau = 0;
  Regularizer psi;
  psi.kind = RegKind::L1;
  psi.coeff = 0.1;
  CHECK_THROWS_AS(composite_step(*oracle, {0.0, 0.0}, {1.0, 1.0}, h, 0.0, psi),
                  std::invalid_argument);
  CHECK_THROWS_AS(composite_step(*oracle, {0.0, 0.0}, {1.0, 1.0}, h, -2.0, psi),
                  std::invalid_argument);
}

TEST_CASE("auxiliary point projects the displacement onto span(V)") {
  const std::vector<double> x = {1.0, 1.0};
  const std::vector<double> x_next = {2.0, 3.0};

  SUBCASE("tau = 0: P = 0 keeps y = x") {
    LowRankPreconditioner h;
    h.n = 2;
    h.tau = 0;
    const ProjectorP p(h);
    const auto y = auxiliary_point(x, x_next, p);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(1.0));
  }

  SUBCASE("V = e1 keeps only the first displacement component") {
    LowRankPreconditioner h;
    h.n = 2;
    h.tau = 1;
    h.a = {1.0};
    h.a_raw = {1.0};
    h.V = DenseMatrix(2, 1);
    h.V(0, 0) = 1.0;
    const ProjectorP p(h);
    const auto y = auxiliary_point(x, x_next, p);
    CHECK(y[0] == doctest::Approx(2.0));
    CHECK(y[1] == doctest::Approx(1.0));
  }

  SUBCASE("tau = n: P = I gives y = x_next") {
    SplitMix64 rng(48);
    const auto h = make_preconditioner(2, {3.0, 1.0}, rng);
    const ProjectorP p(h);
    const auto y = auxiliary_point(x, x_next, p);
    CHECK(y[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("dimension mismatch throws") {
    LowRankPreconditioner h;
    h.n = 2;
    h.tau = 0;
    const ProjectorP p(h);
    CHECK_THROWS_AS(auxiliary_point(x, {1.0, 2.0, 3.0}, p), std::invalid_argument);
  }
}

TEST_CASE("grad_step with a projector fills y_next") {
  const auto oracle = diag_quadratic({5.0, 1.0}, {1.0, 1.0});
  const std::vector<double> x = {2.0, 2.0};
  std::vector<double> g(2);
  oracle->gradient(x, g);
  const auto [h, rep] = dense_spectral_order(*oracle, x, 1);
  const ProjectorP p(h);
  const auto st = grad_step(*oracle, x, g, h, 1.0, &p);
  REQUIRE(st.y_next.has_value());
  const auto manual = auxiliary_point(x, st.x_next, p);
  CHECK((*st.y_next)[0] == doctest::Approx(manual[0]).epsilon(1e-14));
  CHECK((*st.y_next)[1] == doctest::Approx(manual[1]).epsilon(1e-14));
}
