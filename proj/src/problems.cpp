#include "specgrad/problems.h"

#include <cmath>
#include <stdexcept>

#include "specgrad/kernels.h"
#include "specgrad/rng.h"
#include "specgrad/spectral.h"

namespace specgrad {

namespace {

constexpr double kInvSixSqrt3 = 0.096225044864937631;  /* 1/(6 sqrt(3)) */

DenseMatrix diag_matrix(const std::vector<double>& eig) {
  DenseMatrix a(eig.size(), eig.size());
  for (std::size_t i = 0; i < eig.size(); ++i) a(i, i) = eig[i];
  return a;
}

/* A = Q diag(eig) Q^T for a seeded random orthogonal Q. */
DenseMatrix rotated_matrix(const std::vector<double>& eig, SplitMix64& rng) {
  const std::size_t n = eig.size();
  DenseMatrix w(n, n);
  for (std::size_t j = 0; j < n; ++j) rng.fill_gaussian({w.col(j), n});
  DenseMatrix q = qr_orthonormalize(w, rng);
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q(i, k) * eig[k] * q(j, k);
      a(i, j) = s;
      a(j, i) = s;
    }
  return a;
}

}  // namespace

/* ---------------- quadratic ---------------- */

QuadraticOracle::QuadraticOracle(DenseMatrix a, std::vector<double> b)
    : n_(a.rows()), a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols()) throw std::invalid_argument("QuadraticOracle: A not square");
  if (b_.empty()) b_.assign(n_, 0.0);
  if (b_.size() != n_) throw std::invalid_argument("QuadraticOracle: b dimension mismatch");

  const SymEigResult eig = sym_eig_desc(a_);
  const double lmin = eig.values.back();
  if (lmin > 0.0) mu_ = lmin;
  if (lmin >= 0.0) {
    const double bnorm = kernels::nrm2(b_.data(), n_);
    if (bnorm == 0.0) {
      lower_bound_ = 0.0;
    } else if (lmin > 1e-12 * std::fabs(eig.values.front())) {
      const std::vector<double> xstar = solve_shifted_spd(a_, 0.0, b_);
      lower_bound_ = -0.5 * kernels::dot(b_.data(), xstar.data(), n_);
    }
  }
}

double QuadraticOracle::value(const std::vector<double>& x) const {
  const std::vector<double> ax = matvec(a_, x);
  return 0.5 * kernels::dot(ax.data(), x.data(), n_) - kernels::dot(b_.data(), x.data(), n_);
}

void QuadraticOracle::gradient(const std::vector<double>& x, std::vector<double>& g) const {
  g = matvec(a_, x);
  kernels::axpy(-1.0, b_.data(), g.data(), n_);
}

void QuadraticOracle::hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                                  std::vector<double>& out) const {
  (void)x;
  out = matvec(a_, v);
}

DenseMatrix QuadraticOracle::dense_hessian(const std::vector<double>& x) const {
  (void)x;
  require_dense_allowed(n_);
  return a_;
}

OracleConstants QuadraticOracle::constants() const {
  OracleConstants c;
  c.L = 0.0;
  c.M = 0.0;
  c.mu = mu_;
  return c;
}

std::optional<double> QuadraticOracle::lower_bound() const { return lower_bound_; }

/* ---------------- regularized quadratic ---------------- */

RegQuadraticOracle::RegQuadraticOracle(DenseMatrix a, std::vector<double> b, double p,
                                       double sigma)
    : n_(a.rows()), a_(std::move(a)), b_(std::move(b)), p_(p), sigma_(sigma) {
  if (a_.rows() != a_.cols()) throw std::invalid_argument("RegQuadraticOracle: A not square");
  if (p_ <= 2.0) throw std::invalid_argument("RegQuadraticOracle: requires p > 2");
  if (sigma_ <= 0.0) throw std::invalid_argument("RegQuadraticOracle: requires sigma > 0");
  if (b_.empty()) b_.assign(n_, 0.0);
  if (b_.size() != n_) throw std::invalid_argument("RegQuadraticOracle: b dimension mismatch");
}

double RegQuadraticOracle::value(const std::vector<double>& x) const {
  const std::vector<double> ax = matvec(a_, x);
  const double xnorm = kernels::nrm2(x.data(), n_);
  return 0.5 * kernels::dot(ax.data(), x.data(), n_) -
         kernels::dot(b_.data(), x.data(), n_) + (sigma_ / p_) * std::pow(xnorm, p_);
}

void RegQuadraticOracle::gradient(const std::vector<double>& x, std::vector<double>& g) const {
  g = matvec(a_, x);
  kernels::axpy(-1.0, b_.data(), g.data(), n_);
  const double xnorm = kernels::nrm2(x.data(), n_);
  if (xnorm > 0.0) kernels::axpy(sigma_ * std::pow(xnorm, p_ - 2.0), x.data(), g.data(), n_);
}

void RegQuadraticOracle::hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                                     std::vector<double>& out) const {
  out = matvec(a_, v);
  const double xnorm = kernels::nrm2(x.data(), n_);
  if (xnorm == 0.0) return;  /* regularizer Hessian vanishes at 0 for p > 2 */
  kernels::axpy(sigma_ * std::pow(xnorm, p_ - 2.0), v.data(), out.data(), n_);
  const double coef = sigma_ * (p_ - 2.0) * std::pow(xnorm, p_ - 4.0) *
                      kernels::dot(x.data(), v.data(), n_);
  kernels::axpy(coef, x.data(), out.data(), n_);
}

DenseMatrix RegQuadraticOracle::dense_hessian(const std::vector<double>& x) const {
  require_dense_allowed(n_);
  DenseMatrix h = a_;
  const double xnorm = kernels::nrm2(x.data(), n_);
  if (xnorm == 0.0) return h;
  const double c1 = sigma_ * std::pow(xnorm, p_ - 2.0);
  const double c2 = sigma_ * (p_ - 2.0) * std::pow(xnorm, p_ - 4.0);
  for (std::size_t j = 0; j < n_; ++j) {
    h(j, j) += c1;
    for (std::size_t i = 0; i < n_; ++i) h(i, j) += c2 * x[i] * x[j];
  }
  return h;
}

OracleConstants RegQuadraticOracle::constants() const {
  OracleConstants c;
  /* Hessian of (sigma/3)||x||^3 is sigma (||x|| I + x x^T/||x||), which is
   * 2 sigma Lipschitz.  No global constant for other powers. */
  if (p_ == 3.0) c.L = 2.0 * sigma_;
  return c;
}

/* ---------------- diagonal neural network ---------------- */

DiagonalNNOracle::DiagonalNNOracle(std::vector<double> c) : c_(std::move(c)) {
  if (c_.empty()) throw std::invalid_argument("DiagonalNNOracle: empty target");
}

double DiagonalNNOracle::value(const std::vector<double>& z) const {
  const std::size_t n = c_.size();
  if (z.size() != 2 * n) throw std::invalid_argument("DiagonalNNOracle: dimension mismatch");
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = z[i] * z[n + i] - c_[i];
    f += e * e;
  }
  return 0.5 * f;
}

void DiagonalNNOracle::gradient(const std::vector<double>& z, std::vector<double>& g) const {
  const std::size_t n = c_.size();
  g.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = z[i] * z[n + i] - c_[i];
    g[i] = e * z[n + i];
    g[n + i] = e * z[i];
  }
}

void DiagonalNNOracle::hessian_vec(const std::vector<double>& z, const std::vector<double>& v,
                                   std::vector<double>& out) const {
  const std::size_t n = c_.size();
  out.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = z[i], y = z[n + i];
    const double cross = 2.0 * x * y - c_[i];
    out[i] = y * y * v[i] + cross * v[n + i];
    out[n + i] = cross * v[i] + x * x * v[n + i];
  }
}

DenseMatrix DiagonalNNOracle::dense_hessian(const std::vector<double>& z) const {
  const std::size_t n = c_.size();
  require_dense_allowed(2 * n);
  DenseMatrix h(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = z[i], y = z[n + i];
    const double cross = 2.0 * x * y - c_[i];
    h(i, i) = y * y;
    h(n + i, n + i) = x * x;
    h(i, n + i) = cross;
    h(n + i, i) = cross;
  }
  return h;
}

std::vector<double> diagonal_nn_eigenpairs(const std::vector<double>& point,
                                           const std::vector<double>& c) {
  const std::size_t n = c.size();
  if (point.size() != 2 * n)
    throw std::invalid_argument("diagonal_nn_eigenpairs: point must have length 2n");
  std::vector<double> eig;
  eig.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x2 = point[i] * point[i];
    const double y2 = point[n + i] * point[n + i];
    const double cross = 2.0 * point[i] * point[n + i] - c[i];
    const double root = std::sqrt((x2 - y2) * (x2 - y2) + 4.0 * cross * cross);
    eig.push_back(0.5 * (x2 + y2 + root));
    eig.push_back(0.5 * (x2 + y2 - root));
  }
  return eig;
}

/* ---------------- matrix factorization ---------------- */

MatrixFactorizationOracle::MatrixFactorizationOracle(std::size_t n, std::size_t m,
                                                     std::size_t r, std::vector<double> c)
    : n_(n), m_(m), r_(r), c_(std::move(c)) {
  if (n_ == 0 || m_ == 0 || r_ == 0)
    throw std::invalid_argument("MatrixFactorizationOracle: n, m, r must be positive");
  if (c_.size() != n_ * m_)
    throw std::invalid_argument("MatrixFactorizationOracle: C must be n x m");
}

/* Variable layout: X (n x r) column-major at offset 0, Y (r x m) column-major
 * at offset n*r.  Residual R = X Y - C computed on the fly; all loops are
 * column-major friendly. */

double MatrixFactorizationOracle::value(const std::vector<double>& z) const {
  const double* X = z.data();
  const double* Y = z.data() + n_ * r_;
  double f = 0.0;
  for (std::size_t j = 0; j < m_; ++j) {
    for (std::size_t i = 0; i < n_; ++i) {
      double rij = -c_[j * n_ + i];
      for (std::size_t k = 0; k < r_; ++k) rij += X[k * n_ + i] * Y[j * r_ + k];
      f += rij * rij;
    }
  }
  return 0.5 * f;
}

void MatrixFactorizationOracle::gradient(const std::vector<double>& z,
                                         std::vector<double>& g) const {
  const double* X = z.data();
  const double* Y = z.data() + n_ * r_;
  g.assign(dim(), 0.0);
  double* GX = g.data();
  double* GY = g.data() + n_ * r_;
  std::vector<double> rcol(n_);
  for (std::size_t j = 0; j < m_; ++j) {
    for (std::size_t i = 0; i < n_; ++i) {
      double rij = -c_[j * n_ + i];
      for (std::size_t k = 0; k < r_; ++k) rij += X[k * n_ + i] * Y[j * r_ + k];
      rcol[i] = rij;
    }
    for (std::size_t k = 0; k < r_; ++k) {
      const double yk = Y[j * r_ + k];
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        GX[k * n_ + i] += rcol[i] * yk;      /* GX = R Y^T */
        s += X[k * n_ + i] * rcol[i];
      }
      GY[j * r_ + k] = s;                    /* GY = X^T R */
    }
  }
}

void MatrixFactorizationOracle::hessian_vec(const std::vector<double>& z,
                                            const std::vector<double>& v,
                                            std::vector<double>& out) const {
  const double* X = z.data();
  const double* Y = z.data() + n_ * r_;
  const double* U = v.data();
  const double* W = v.data() + n_ * r_;
  out.assign(dim(), 0.0);
  double* HX = out.data();
  double* HY = out.data() + n_ * r_;
  std::vector<double> rcol(n_), scol(n_);
  for (std::size_t j = 0; j < m_; ++j) {
    /* R_:j = X Y_:j - C_:j ; S_:j = U Y_:j + X W_:j */
    for (std::size_t i = 0; i < n_; ++i) {
      double rij = -c_[j * n_ + i];
      double sij = 0.0;
      for (std::size_t k = 0; k < r_; ++k) {
        rij += X[k * n_ + i] * Y[j * r_ + k];
        sij += U[k * n_ + i] * Y[j * r_ + k] + X[k * n_ + i] * W[j * r_ + k];
      }
      rcol[i] = rij;
      scol[i] = sij;
    }
    /* HX += S Y^T + R W^T ; HY_:j = X^T S_:j + U^T R_:j */
    for (std::size_t k = 0; k < r_; ++k) {
      const double yk = Y[j * r_ + k];
      const double wk = W[j * r_ + k];
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        HX[k * n_ + i] += scol[i] * yk + rcol[i] * wk;
        s += X[k * n_ + i] * scol[i] + U[k * n_ + i] * rcol[i];
      }
      HY[j * r_ + k] = s;
    }
  }
}

/* ---------------- logistic regression ---------------- */

namespace {

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/* sigma(-t) = 1/(1 + e^t), stable for both signs. */
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

LogisticOracle::LogisticOracle(Dataset data, double l2) : data_(std::move(data)), l2_(l2) {
  if (l2_ < 0.0) throw std::invalid_argument("LogisticOracle: l2 must be nonnegative");
  if (data_.m == 0 || data_.labels.size() != data_.m)
    throw std::invalid_argument("LogisticOracle: dataset rows/labels mismatch");
  for (double y : data_.labels)
    if (y != 1.0 && y != -1.0)
      throw std::invalid_argument("LogisticOracle: labels must be +-1");
  max_row_norm_ = 0.0;
  double sum_cubes = 0.0;
  for (std::size_t i = 0; i < data_.m; ++i) {
    const double rn = kernels::nrm2(data_.row(i), data_.d);
    max_row_norm_ = std::max(max_row_norm_, rn);
    sum_cubes += rn * rn * rn;
  }
  hessian_lipschitz_ = kInvSixSqrt3 * sum_cubes / static_cast<double>(data_.m);
}

double LogisticOracle::value(const std::vector<double>& x) const {
  double f = 0.0;
  for (std::size_t i = 0; i < data_.m; ++i) {
    const double z = kernels::dot(data_.row(i), x.data(), data_.d);
    f += softplus(-data_.labels[i] * z);
  }
  f /= static_cast<double>(data_.m);
  const double xnorm = kernels::nrm2(x.data(), data_.d);
  return f + 0.5 * l2_ * xnorm * xnorm;
}

void LogisticOracle::gradient(const std::vector<double>& x, std::vector<double>& g) const {
  g.assign(data_.d, 0.0);
  for (std::size_t i = 0; i < data_.m; ++i) {
    const double y = data_.labels[i];
    const double z = kernels::dot(data_.row(i), x.data(), data_.d);
    const double w = -y * sigmoid_neg(y * z);
    kernels::axpy(w, data_.row(i), g.data(), data_.d);
  }
  kernels::scal(1.0 / static_cast<double>(data_.m), g.data(), data_.d);
  kernels::axpy(l2_, x.data(), g.data(), data_.d);
}

void LogisticOracle::hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                                 std::vector<double>& out) const {
  out.assign(data_.d, 0.0);
  for (std::size_t i = 0; i < data_.m; ++i) {
    const double z = kernels::dot(data_.row(i), x.data(), data_.d);
    const double p = sigmoid_neg(data_.labels[i] * z);
    const double s = p * (1.0 - p);
    const double av = kernels::dot(data_.row(i), v.data(), data_.d);
    kernels::axpy(s * av, data_.row(i), out.data(), data_.d);
  }
  kernels::scal(1.0 / static_cast<double>(data_.m), out.data(), data_.d);
  kernels::axpy(l2_, v.data(), out.data(), data_.d);
}

DenseMatrix LogisticOracle::dense_hessian(const std::vector<double>& x) const {
  require_dense_allowed(data_.d);
  DenseMatrix h(data_.d, data_.d);
  for (std::size_t i = 0; i < data_.m; ++i) {
    const double z = kernels::dot(data_.row(i), x.data(), data_.d);
    const double p = sigmoid_neg(data_.labels[i] * z);
    const double s = p * (1.0 - p) / static_cast<double>(data_.m);
    const double* a = data_.row(i);
    for (std::size_t j = 0; j < data_.d; ++j) {
      const double sa = s * a[j];
      if (sa == 0.0) continue;
      kernels::axpy(sa, a, h.col(j), data_.d);
    }
  }
  for (std::size_t j = 0; j < data_.d; ++j) h(j, j) += l2_;
  return h;
}

OracleConstants LogisticOracle::constants() const {
  OracleConstants c;
  c.L = hessian_lipschitz_;
  c.M = max_row_norm_;
  if (l2_ > 0.0) c.mu = l2_;
  return c;
}

/* ---------------- factory ---------------- */

std::unique_ptr<ObjectiveOracle> build_oracle(const ProblemSpec& spec) {
  switch (spec.kind) {
    case ProblemKind::Quadratic:
    case ProblemKind::RegQuadratic: {
      if (spec.eigenvalues.empty())
        throw std::invalid_argument("quadratic: eigenvalues must be non-empty");
      SplitMix64 rng(spec.seed);
      DenseMatrix a =
          spec.rotate ? rotated_matrix(spec.eigenvalues, rng) : diag_matrix(spec.eigenvalues);
      if (spec.kind == ProblemKind::Quadratic)
        return std::make_unique<QuadraticOracle>(std::move(a), spec.b);
      return std::make_unique<RegQuadraticOracle>(std::move(a), spec.b, spec.p,
                                                  spec.sigma_reg);
    }
    case ProblemKind::DiagonalNN:
      return std::make_unique<DiagonalNNOracle>(spec.target_c);
    case ProblemKind::MatrixFactorization: {
      if (spec.mf_n == 0 || spec.mf_m == 0 || spec.mf_r == 0)
        throw std::invalid_argument("matrix-factorization: n, m, r must be positive");
      std::vector<double> c = spec.mf_c;
      if (c.empty()) {
        /* Exact rank-r target C = A B keeps f* = 0 attainable. */
        SplitMix64 rng(spec.seed);
        SplitMix64 a_rng = rng.split(), b_rng = rng.split();
        std::vector<double> a(spec.mf_n * spec.mf_r), b(spec.mf_r * spec.mf_m);
        a_rng.fill_gaussian(a);
        b_rng.fill_gaussian(b);
        c.assign(spec.mf_n * spec.mf_m, 0.0);
        for (std::size_t j = 0; j < spec.mf_m; ++j)
          for (std::size_t k = 0; k < spec.mf_r; ++k) {
            const double bkj = b[j * spec.mf_r + k] * spec.mf_c_scale;
            for (std::size_t i = 0; i < spec.mf_n; ++i)
              c[j * spec.mf_n + i] += a[k * spec.mf_n + i] * bkj;
          }
      }
      return std::make_unique<MatrixFactorizationOracle>(spec.mf_n, spec.mf_m, spec.mf_r,
                                                         std::move(c));
    }
    case ProblemKind::Logistic: {
      Dataset ds = spec.dataset_path.empty()
                       ? make_synthetic_dataset(spec.synth_m, spec.synth_d, spec.seed,
                                                spec.strong_dirs, spec.strong_scale)
                       : read_libsvm(spec.dataset_path);
      return std::make_unique<LogisticOracle>(std::move(ds), spec.l2);
    }
  }
  throw std::invalid_argument("build_oracle: unknown problem kind");
}

std::vector<double> default_x0(const ProblemSpec& spec, const ObjectiveOracle& oracle) {
  std::vector<double> x0(oracle.dim(), 0.0);
  if (spec.kind == ProblemKind::Logistic) return x0;  /* standard zero start */
  /* Stream distinct from the instance stream so the draw order of the
   * problem's own randomness cannot shift x0. */
  SplitMix64 rng(spec.seed ^ 0xA5F152E7D1B54A33ULL);
  rng.fill_gaussian(x0);
  return x0;
}

}  // namespace specgrad
