#include "specgrad/oracle.h"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "specgrad/kernels.h"
#include "specgrad/rng.h"

namespace specgrad {

std::size_t dense_limit() {
  if (const char* env = std::getenv("SPECGRAD_DENSE_LIMIT")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 512;
}

void ObjectiveOracle::require_dense_allowed(std::size_t n) {
  const std::size_t limit = dense_limit();
  if (n > limit) {
    std::ostringstream msg;
    msg << "dense_hessian: n = " << n << " exceeds dense_limit = " << limit;
    throw std::runtime_error(msg.str());
  }
}

DenseMatrix ObjectiveOracle::dense_hessian(const std::vector<double>& x) const {
  const std::size_t n = dim();
  require_dense_allowed(n);
  DenseMatrix h(n, n);
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    hessian_vec(x, e, col);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) h(i, j) = col[i];
  }
  /* Symmetrize: the column-by-column assembly inherits hvp roundoff. */
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double s = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = s;
      h(j, i) = s;
    }
  return h;
}

std::vector<double> ObjectiveOracle::grad(const std::vector<double>& x) const {
  std::vector<double> g(dim());
  gradient(x, g);
  return g;
}

std::vector<double> ObjectiveOracle::hvp(const std::vector<double>& x,
                                         const std::vector<double>& v) const {
  std::vector<double> out(dim());
  hessian_vec(x, v, out);
  return out;
}

namespace {

double rel_err(double err, double scale) { return err / std::max(1.0, scale); }

}  // namespace

OracleCheckReport check_oracle(const ObjectiveOracle& oracle, const std::vector<double>& x,
                               SplitMix64& rng, bool with_dense, double fd_tol,
                               double exact_tol) {
  const std::size_t n = oracle.dim();
  OracleCheckReport rep;

  /* Gradient vs central differences along a few random directions. */
  std::vector<double> g = oracle.grad(x);
  const double gnorm = kernels::nrm2(g.data(), n);
  std::vector<double> u(n), xp(n), xm(n);
  const double fd_h = 1e-6 * (1.0 + kernels::nrm2(x.data(), n));
  for (int trial = 0; trial < 3; ++trial) {
    rng.fill_gaussian(u);
    const double un = kernels::nrm2(u.data(), n);
    if (un == 0.0) continue;
    kernels::scal(1.0 / un, u.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      xp[i] = x[i] + fd_h * u[i];
      xm[i] = x[i] - fd_h * u[i];
    }
    const double fd = (oracle.value(xp) - oracle.value(xm)) / (2.0 * fd_h);
    const double exact = kernels::dot(g.data(), u.data(), n);
    rep.grad_fd_err = std::max(rep.grad_fd_err, rel_err(std::fabs(fd - exact), gnorm));
  }

  /* hvp symmetry and linearity. */
  std::vector<double> v(n), w(n);
  rng.fill_gaussian(u);
  rng.fill_gaussian(v);
  std::vector<double> hu = oracle.hvp(x, u);
  std::vector<double> hv = oracle.hvp(x, v);
  const double hscale =
      std::max(kernels::nrm2(hu.data(), n) * kernels::nrm2(v.data(), n),
               kernels::nrm2(hv.data(), n) * kernels::nrm2(u.data(), n));
  rep.hvp_sym_err = rel_err(std::fabs(kernels::dot(hu.data(), v.data(), n) -
                                      kernels::dot(hv.data(), u.data(), n)),
                            hscale);

  const double ca = 0.37, cb = -1.25;
  for (std::size_t i = 0; i < n; ++i) w[i] = ca * u[i] + cb * v[i];
  std::vector<double> hw = oracle.hvp(x, w);
  double lin_err = 0.0, lin_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double want = ca * hu[i] + cb * hv[i];
    lin_err = std::max(lin_err, std::fabs(hw[i] - want));
    lin_scale = std::max(lin_scale, std::fabs(want));
  }
  rep.hvp_lin_err = rel_err(lin_err, lin_scale);

  /* Dense Hessian consistency, when permitted. */
  if (with_dense && n <= dense_limit()) {
    rep.dense_checked = true;
    DenseMatrix hmat = oracle.dense_hessian(x);
    std::vector<double> dv = matvec(hmat, u);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::fabs(dv[i] - hu[i]));
    rep.dense_err = rel_err(err, kernels::nrm2(hu.data(), n));
  }

  rep.pass = rep.grad_fd_err <= fd_tol && rep.hvp_sym_err <= exact_tol &&
             rep.hvp_lin_err <= exact_tol && (!rep.dense_checked || rep.dense_err <= exact_tol);
  return rep;
}

}  // namespace specgrad
