#include "specgrad/step.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "specgrad/kernels.h"

namespace specgrad {

std::vector<double> woodbury_apply(const LowRankPreconditioner& h, double alpha,
                                   const std::vector<double>& g) {
  if (alpha <= 0.0) throw std::invalid_argument("woodbury_apply: alpha must be positive");
  const std::size_t n = h.n;
  std::vector<double> out = g;
  /* Orthonormal V diagonalizes H + alpha I, so the identity splits into the
   * complement part (g - sum u_i v_i) / alpha plus u_i / (a_i + alpha) along
   * each kept column.  Folding the column part into the 1/alpha factor (the
   * textbook grouping) subtracts nearly equal numbers when alpha << a_i and
   * loses every significant digit; this split keeps full precision. */
  std::vector<double> u(h.tau, 0.0);
  for (std::size_t i = 0; i < h.tau; ++i) {
    /* a_i = 0 columns carry no rank: their coefficient stays 1/alpha. */
    if (h.a[i] <= 0.0) continue;
    u[i] = kernels::dot(h.V.col(i), g.data(), n);
    kernels::axpy(-u[i], h.V.col(i), out.data(), n);
  }
  /* Division (not reciprocal multiply) so the tau = 0 path is bit-equal to
   * explicit gradient descent x - g/alpha. */
  for (std::size_t i = 0; i < n; ++i) out[i] /= alpha;
  for (std::size_t i = 0; i < h.tau; ++i) {
    if (h.a[i] <= 0.0) continue;
    kernels::axpy(u[i] / (h.a[i] + alpha), h.V.col(i), out.data(), n);
  }
  return out;
}

namespace {

/* alpha = 0 reference path: requires an invertible full-rank H. */
std::vector<double> full_rank_solve(const LowRankPreconditioner& h,
                                    const std::vector<double>& g) {
  if (h.tau != h.n)
    throw std::invalid_argument("grad_step: alpha = 0 requires full rank tau = n");
  for (double a : h.a)
    if (a <= 0.0)
      throw std::invalid_argument("grad_step: alpha = 0 requires positive definite H");
  const std::size_t n = h.n;
  if (n > dense_limit())
    throw std::runtime_error("grad_step: alpha = 0 dense path exceeds dense_limit");
  DenseMatrix hd(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* v = h.V.col(i);
    for (std::size_t j = 0; j < n; ++j) kernels::axpy(h.a[i] * v[j], v, hd.col(j), n);
  }
  return solve_shifted_spd(hd, 0.0, g);
}

void finish_step(const ObjectiveOracle& oracle, const std::vector<double>& x,
                 const std::vector<double>& d, const ProjectorP* p, StepResult& sr) {
  const std::size_t n = x.size();
  sr.x_next.resize(n);
  for (std::size_t i = 0; i < n; ++i) sr.x_next[i] = x[i] - d[i];
  sr.r = kernels::nrm2(d.data(), n);
  sr.grad_next = oracle.grad(sr.x_next);
  if (p != nullptr) {
    /* y = x + P (x_next - x) = x - P d */
    std::vector<double> pd(n);
    p->apply(std::span<const double>(d), std::span<double>(pd));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - pd[i];
    sr.y_next = std::move(y);
  }
  sr.d = d;
}

}  // namespace

StepResult grad_step(const ObjectiveOracle& oracle, const std::vector<double>& x,
                     const std::vector<double>& g, const LowRankPreconditioner& h,
                     double alpha, const ProjectorP* p) {
  if (alpha < 0.0) throw std::invalid_argument("grad_step: alpha must be nonnegative");
  StepResult sr;
  const std::vector<double> d = (alpha == 0.0) ? full_rank_solve(h, g)
                                               : woodbury_apply(h, alpha, g);
  finish_step(oracle, x, d, p, sr);
  sr.F_prime_next = sr.grad_next;
  return sr;
}

StepResult composite_step(const ObjectiveOracle& oracle, const std::vector<double>& x,
                          const std::vector<double>& g, const LowRankPreconditioner& h,
                          double alpha, const Regularizer& psi, double inner_tol,
                          const ProjectorP* p) {
  if (alpha <= 0.0) throw std::invalid_argument("composite_step: alpha must be positive");
  const std::size_t n = x.size();
  const double gnorm = kernels::nrm2(g.data(), n);
  if (inner_tol <= 0.0) inner_tol = 1e-10 * std::max(1.0, gnorm);

  const double top = h.amax() + alpha;  /* curvature bound of the model */
  const double step = 1.0 / top;
  const long long cap = std::max<long long>(
      1, 10 * static_cast<long long>(
                 std::ceil((h.amax() / alpha + 1.0) * std::log(1.0 / inner_tol))));

  /* Proximal gradient on m(y) = <g, y-x> + 1/2 <(H+alpha I)(y-x), y-x> + psi(y),
   * strongly convex with modulus alpha. */
  std::vector<double> y = x, ynew(n), trial(n), hd(n), d(n);
  int iters = 0;
  for (;;) {
    if (iters >= cap) {
      std::ostringstream msg;
      msg << "composite_step: inner cap " << cap << " exceeded (alpha=" << alpha << ")";
      throw std::runtime_error(msg.str());
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = y[i] - x[i];
    h.apply(d, hd);
    /* model gradient: g + H d + alpha d */
    for (std::size_t i = 0; i < n; ++i)
      trial[i] = y[i] - step * (g[i] + hd[i] + alpha * d[i]);
    psi.prox(trial, step, ynew);
    ++iters;
    double move = 0.0;
    for (std::size_t i = 0; i < n; ++i) move += (ynew[i] - y[i]) * (ynew[i] - y[i]);
    move = std::sqrt(move);
    y.swap(ynew);
    if (2.0 * top * move <= inner_tol) break;
  }

  StepResult sr;
  std::vector<double> dstep(n);
  for (std::size_t i = 0; i < n; ++i) dstep[i] = x[i] - y[i];
  finish_step(oracle, x, dstep, p, sr);
  sr.inner_iterations = iters;

  /* psi'(x_next) := -g - (H + alpha I)(x_next - x); subgradient up to the
   * inner tolerance. */
  for (std::size_t i = 0; i < n; ++i) d[i] = sr.x_next[i] - x[i];
  h.apply(d, hd);
  sr.F_prime_next.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    sr.F_prime_next[i] = sr.grad_next[i] - g[i] - hd[i] - alpha * d[i];
  return sr;
}

std::vector<double> auxiliary_point(const std::vector<double>& x,
                                    const std::vector<double>& x_next, const ProjectorP& p) {
  const std::size_t n = x.size();
  if (x_next.size() != n) throw std::invalid_argument("auxiliary_point: dimension mismatch");
  std::vector<double> d(n), pd(n), y(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x_next[i] - x[i];
  p.apply(std::span<const double>(d), std::span<double>(pd));
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + pd[i];
  return y;
}

}  // namespace specgrad
