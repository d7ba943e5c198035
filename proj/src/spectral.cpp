#include "specgrad/spectral.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "specgrad/kernels.h"

namespace specgrad {

namespace {

constexpr double kRankTol = 1e-12;
constexpr int kRerandomAttempts = 3;

std::vector<double> column_copy(const DenseMatrix& m, std::size_t j) {
  return std::vector<double>(m.col(j), m.col(j) + m.rows());
}

}  // namespace

double LowRankPreconditioner::amax() const {
  double m = 0.0;
  for (double v : a) m = std::max(m, v);
  return m;
}

void LowRankPreconditioner::apply(std::span<const double> d, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < tau; ++i) {
    if (a[i] == 0.0) continue;
    const double c = a[i] * kernels::dot(V.col(i), d.data(), n);
    kernels::axpy(c, V.col(i), out.data(), n);
  }
}

void ProjectorP::apply(std::span<const double> d, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < h_->tau; ++i) {
    const double c = kernels::dot(h_->V.col(i), d.data(), h_->n);
    kernels::axpy(c, h_->V.col(i), out.data(), h_->n);
  }
}

std::vector<double> ProjectorP::apply(const std::vector<double>& d) const {
  std::vector<double> out(h_->n);
  apply(std::span<const double>(d), std::span<double>(out));
  return out;
}

DenseMatrix qr_orthonormalize(const DenseMatrix& w, SplitMix64& rng) {
  const std::size_t n = w.rows(), tau = w.cols();
  if (tau > n) throw std::invalid_argument("qr_orthonormalize: more columns than rows");
  DenseMatrix q = w;
  std::vector<double> fresh(n);
  for (std::size_t j = 0; j < tau; ++j) {
    const double orig_norm = kernels::nrm2(q.col(j), n);
    int attempts = 0;
    for (;;) {
      /* Two projection passes; a single MGS sweep can leave O(eps*cond)
       * components in ill-scaled inputs. */
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < j; ++i) {
          const double c = kernels::dot(q.col(i), q.col(j), n);
          kernels::axpy(-c, q.col(i), q.col(j), n);
        }
      const double nrm = kernels::nrm2(q.col(j), n);
      if (nrm > kRankTol * std::max(1.0, orig_norm)) {
        kernels::scal(1.0 / nrm, q.col(j), n);
        break;
      }
      if (++attempts > kRerandomAttempts)
        throw std::runtime_error("qr_orthonormalize: rank deficiency persists after re-randomization");
      rng.fill_gaussian(fresh);
      std::copy(fresh.begin(), fresh.end(), q.col(j));
    }
  }
  return q;
}

LowRankPreconditioner power_update(const ObjectiveOracle& oracle, const std::vector<double>& x,
                                   const LowRankPreconditioner* prev, std::size_t tau,
                                   std::size_t T, SplitMix64& rng) {
  const std::size_t n = oracle.dim();
  if (tau > n) throw std::invalid_argument("power_update: tau > n");

  LowRankPreconditioner h;
  h.n = n;
  h.tau = tau;
  if (tau == 0) return h;

  if (prev != nullptr) {
    if (prev->tau != tau || prev->n != n)
      throw std::invalid_argument("power_update: previous basis dimensions do not match");
    h.V = prev->V;
  } else {
    if (T == 0)
      throw std::invalid_argument("power_update: T = 0 without a previous basis to reuse");
    DenseMatrix w(n, tau);
    for (std::size_t j = 0; j < tau; ++j) rng.fill_gaussian({w.col(j), n});
    h.V = qr_orthonormalize(w, rng);
  }

  std::vector<double> vcol(n), hv(n);
  for (std::size_t t = 0; t < T; ++t) {
    DenseMatrix w(n, tau);
    for (std::size_t j = 0; j < tau; ++j) {
      vcol = column_copy(h.V, j);
      oracle.hessian_vec(x, vcol, hv);
      std::copy(hv.begin(), hv.end(), w.col(j));
    }
    h.V = qr_orthonormalize(w, rng);
  }

  /* Rayleigh pass; the products double as residual diagnostics. */
  h.a_raw.resize(tau);
  h.residuals.resize(tau);
  for (std::size_t j = 0; j < tau; ++j) {
    vcol = column_copy(h.V, j);
    oracle.hessian_vec(x, vcol, hv);
    const double rq = kernels::dot(hv.data(), vcol.data(), n);
    h.a_raw[j] = rq;
    kernels::axpy(-rq, vcol.data(), hv.data(), n);
    h.residuals[j] = kernels::nrm2(hv.data(), n);
  }

  /* Order columns by raw Rayleigh value, non-ascending. */
  std::vector<std::size_t> perm(tau);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t i, std::size_t j) { return h.a_raw[i] > h.a_raw[j]; });
  DenseMatrix sorted(n, tau);
  std::vector<double> a_raw(tau), res(tau);
  for (std::size_t j = 0; j < tau; ++j) {
    std::copy(h.V.col(perm[j]), h.V.col(perm[j]) + n, sorted.col(j));
    a_raw[j] = h.a_raw[perm[j]];
    res[j] = h.residuals[perm[j]];
  }
  h.V = std::move(sorted);
  h.a_raw = std::move(a_raw);
  h.residuals = std::move(res);

  h.a.resize(tau);
  for (std::size_t j = 0; j < tau; ++j) h.a[j] = std::max(h.a_raw[j], 0.0);
  return h;
}

std::pair<LowRankPreconditioner, ApproxErrorReport> dense_spectral_order(
    const ObjectiveOracle& oracle, const std::vector<double>& x, std::size_t tau) {
  const std::size_t n = oracle.dim();
  if (tau > n) throw std::invalid_argument("dense_spectral_order: tau > n");
  const SymEigResult eig = sym_eig_desc(oracle.dense_hessian(x));

  LowRankPreconditioner h;
  h.n = n;
  h.tau = tau;
  h.V = DenseMatrix(n, tau);
  h.a.resize(tau);
  h.a_raw.resize(tau);
  h.residuals.assign(tau, 0.0);
  for (std::size_t j = 0; j < tau; ++j) {
    std::copy(eig.vectors.col(j), eig.vectors.col(j) + n, h.V.col(j));
    h.a_raw[j] = eig.values[j];
    h.a[j] = std::max(eig.values[j], 0.0);
  }

  ApproxErrorReport rep;
  rep.method = ApproxErrorReport::Method::DenseExact;
  /* The basis is exact here, so both norms reduce to eigenvalue arithmetic:
   * delta = max clip distance, delta_minus = largest |negative| eigenvalue
   * captured inside the basis. */
  for (std::size_t j = 0; j < tau; ++j) {
    rep.delta = std::max(rep.delta, h.a[j] - h.a_raw[j]);
    if (h.a_raw[j] < 0.0) rep.delta_minus = std::max(rep.delta_minus, -h.a_raw[j]);
  }
  rep.lambda_tau_plus_1 =
      tau < n ? eig.values[tau] : -std::numeric_limits<double>::infinity();
  rep.lambda_n = n > 0 ? eig.values[n - 1] : 0.0;
  return {std::move(h), rep};
}

ApproxErrorReport estimate_errors(const ObjectiveOracle& oracle, const std::vector<double>& x,
                                  const LowRankPreconditioner& h, const ProjectorP& p) {
  const std::size_t n = h.n;
  ApproxErrorReport rep;
  if (n <= dense_limit()) {
    rep.method = ApproxErrorReport::Method::DenseExact;
    const SymEigResult eig = sym_eig_desc(oracle.dense_hessian(x));

    /* D = V diag(a) V^T - sum_{i<=tau} lambda_i u_i u_i^T, materialized at
     * reference scale only. */
    DenseMatrix d(n, n);
    for (std::size_t i = 0; i < h.tau; ++i) {
      if (h.a[i] == 0.0) continue;
      const double* v = h.V.col(i);
      for (std::size_t cj = 0; cj < n; ++cj)
        kernels::axpy(h.a[i] * v[cj], v, d.col(cj), n);
    }
    for (std::size_t i = 0; i < h.tau; ++i) {
      const double* u = eig.vectors.col(i);
      for (std::size_t cj = 0; cj < n; ++cj)
        kernels::axpy(-eig.values[i] * u[cj], u, d.col(cj), n);
    }
    rep.delta = spectral_norm_sym(d);

    /* N P with N the negative spectral part; generally non-symmetric. */
    bool any_negative = false;
    DenseMatrix np(n, n);
    std::vector<double> pu(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (eig.values[i] >= 0.0) continue;
      any_negative = true;
      const double* u = eig.vectors.col(i);
      p.apply(std::span<const double>(u, n), std::span<double>(pu));
      for (std::size_t cj = 0; cj < n; ++cj)
        kernels::axpy(eig.values[i] * pu[cj], u, np.col(cj), n);
    }
    rep.delta_minus = any_negative ? spectral_norm(np) : 0.0;
    rep.lambda_tau_plus_1 =
        h.tau < n ? eig.values[h.tau] : -std::numeric_limits<double>::infinity();
    rep.lambda_n = n > 0 ? eig.values[n - 1] : 0.0;
    return rep;
  }

  /* No dense reference: aggregate the power residuals.  This is a heuristic
   * indicator, not a bound; documented for diagnostics only. */
  rep.method = ApproxErrorReport::Method::ResidualEstimate;
  double sq = 0.0;
  for (double r : h.residuals) sq += r * r;
  rep.delta = std::sqrt(sq);
  rep.delta_minus = rep.delta;
  return rep;
}

}  // namespace specgrad
