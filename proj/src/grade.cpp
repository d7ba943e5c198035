#include "specgrad/grade.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "specgrad/dense.h"
#include "specgrad/kernels.h"
#include "specgrad/rng.h"

namespace specgrad {

namespace {

constexpr double kDefaultTolScale = 1e-9;
constexpr double kRayleighFloor = 1e-12;  /* skip directions with tiny <Hu, u> */

std::vector<std::vector<double>> eig_at_points(const ObjectiveOracle& oracle,
                                               const std::vector<std::vector<double>>& pts) {
  const std::size_t n = oracle.dim();
  if (n > dense_limit())
    throw std::runtime_error("sample_spectrum: dim exceeds dense_limit");
  std::vector<std::vector<double>> out;
  out.reserve(pts.size());
  for (const auto& x : pts) {
    if (x.size() != n) throw std::invalid_argument("sample_spectrum: point dimension mismatch");
    out.push_back(sym_eig_desc(oracle.dense_hessian(x)).values);
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> sample_ball(const BallSampler& sampler, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("sample_ball: dim must be positive");
  if (!sampler.center.empty() && sampler.center.size() != dim)
    throw std::invalid_argument("sample_ball: center dimension mismatch");
  double radius = sampler.radius;
  if (radius <= 0.0) {
    const double cn = sampler.center.empty()
                          ? 0.0
                          : kernels::nrm2(sampler.center.data(), sampler.center.size());
    radius = 2.0 * cn + 1.0;
  }
  SplitMix64 rng(sampler.seed);
  std::vector<std::vector<double>> pts(sampler.count, std::vector<double>(dim, 0.0));
  std::vector<double> dir(dim);
  for (auto& p : pts) {
    double norm = 0.0;
    do {
      rng.fill_gaussian(dir);
      norm = kernels::nrm2(dir.data(), dim);
    } while (norm == 0.0);
    const double r = radius * std::pow(rng.next_double(), 1.0 / static_cast<double>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      p[i] = (sampler.center.empty() ? 0.0 : sampler.center[i]) + dir[i] * (r / norm);
    }
  }
  return pts;
}

SpectrumReport sample_spectrum(const ObjectiveOracle& oracle,
                               const std::vector<std::vector<double>>& points,
                               double tol_eig) {
  if (points.empty()) throw std::invalid_argument("sample_spectrum: no sample points");
  const std::size_t n = oracle.dim();

  SpectrumReport rep;
  rep.points = points;
  rep.eigenvalues = eig_at_points(oracle, points);

  if (tol_eig <= 0.0) {
    double amax = 0.0;
    for (const auto& ev : rep.eigenvalues)
      for (double l : ev) amax = std::max(amax, std::fabs(l));
    tol_eig = kDefaultTolScale * (1.0 + amax);
  }
  rep.tol_eig = tol_eig;

  /* Grade: smallest over samples of the count of eigenvalues above -tol. */
  rep.certified_grade = n;
  for (const auto& ev : rep.eigenvalues) {
    std::size_t nonneg = 0;
    while (nonneg < n && ev[nonneg] >= -tol_eig) ++nonneg;
    rep.certified_grade = std::min(rep.certified_grade, nonneg);
  }

  const double neg_inf = -std::numeric_limits<double>::infinity();
  rep.sigma_tau.assign(n + 1, neg_inf);
  rep.sigma_tau_plus.assign(n + 1, 0.0);
  for (const auto& ev : rep.eigenvalues) {
    const double neg_floor = -ev[n - 1];  /* -lambda_n */
    for (std::size_t t = 0; t <= n; ++t) {
      const double next = (t < n) ? ev[t] : neg_inf;  /* lambda_{t+1} */
      rep.sigma_tau[t] = std::max(rep.sigma_tau[t], std::max(next, neg_floor));
      if (t < n) rep.sigma_tau_plus[t] = std::max(rep.sigma_tau_plus[t], std::max(next, 0.0));
    }
  }
  return rep;
}

SpectrumReport sample_spectrum(const ObjectiveOracle& oracle, const BallSampler& sampler,
                               double tol_eig) {
  return sample_spectrum(oracle, sample_ball(sampler, oracle.dim()), tol_eig);
}

namespace {

class SumOracle final : public ObjectiveOracle {
 public:
  SumOracle(const ObjectiveOracle& f, const ObjectiveOracle& g) : f_(&f), g_(&g) {
    if (f.dim() != g.dim()) throw std::invalid_argument("sum oracle: dimension mismatch");
  }

  std::size_t dim() const override { return f_->dim(); }
  double value(const std::vector<double>& x) const override {
    return f_->value(x) + g_->value(x);
  }
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override {
    f_->gradient(x, g);
    std::vector<double> tmp;
    g_->gradient(x, tmp);
    kernels::axpy(1.0, tmp.data(), g.data(), g.size());
  }
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override {
    f_->hessian_vec(x, v, out);
    std::vector<double> tmp;
    g_->hessian_vec(x, v, tmp);
    kernels::axpy(1.0, tmp.data(), out.data(), out.size());
  }

 private:
  const ObjectiveOracle* f_;
  const ObjectiveOracle* g_;
};

/* smax(f, g) = ln(e^f + e^g), the mu = 1 soft maximum.  With
 * s1 = e^{f1 - smax}, s2 = e^{f2 - smax} (s1 + s2 = 1):
 *   grad = s1 grad f1 + s2 grad f2,
 *   <H h, h> = s1 s2 (<grad f1 - grad f2, h>)^2 + s1 <H1 h, h> + s2 <H2 h, h>.
 * All exponentials are shifted by max(f1, f2) for stability. */
class SmaxOracle final : public ObjectiveOracle {
 public:
  SmaxOracle(const ObjectiveOracle& f, const ObjectiveOracle& g) : f_(&f), g_(&g) {
    if (f.dim() != g.dim()) throw std::invalid_argument("smax oracle: dimension mismatch");
  }

  std::size_t dim() const override { return f_->dim(); }

  double value(const std::vector<double>& x) const override {
    const double a = f_->value(x), b = g_->value(x);
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  }

  void gradient(const std::vector<double>& x, std::vector<double>& g) const override {
    double s1, s2;
    weights(x, s1, s2);
    f_->gradient(x, g);
    kernels::scal(s1, g.data(), g.size());
    std::vector<double> tmp;
    g_->gradient(x, tmp);
    kernels::axpy(s2, tmp.data(), g.data(), g.size());
  }

  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override {
    double s1, s2;
    weights(x, s1, s2);
    std::vector<double> g1, g2;
    f_->gradient(x, g1);
    g_->gradient(x, g2);
    /* d = grad f1 - grad f2; rank-one term s1 s2 <d, v> d. */
    kernels::axpy(-1.0, g2.data(), g1.data(), g1.size());
    const double dv = kernels::dot(g1.data(), v.data(), v.size());
    f_->hessian_vec(x, v, out);
    kernels::scal(s1, out.data(), out.size());
    std::vector<double> tmp;
    g_->hessian_vec(x, v, tmp);
    kernels::axpy(s2, tmp.data(), out.data(), out.size());
    kernels::axpy(s1 * s2 * dv, g1.data(), out.data(), out.size());
  }

 private:
  void weights(const std::vector<double>& x, double& s1, double& s2) const {
    const double a = f_->value(x), b = g_->value(x);
    const double m = std::max(a, b);
    const double e1 = std::exp(a - m), e2 = std::exp(b - m);
    s1 = e1 / (e1 + e2);
    s2 = e2 / (e1 + e2);
  }

  const ObjectiveOracle* f_;
  const ObjectiveOracle* g_;
};

}  // namespace

std::unique_ptr<ObjectiveOracle> make_sum_oracle(const ObjectiveOracle& f,
                                                 const ObjectiveOracle& g) {
  return std::make_unique<SumOracle>(f, g);
}

std::unique_ptr<ObjectiveOracle> make_smax_oracle(const ObjectiveOracle& f,
                                                  const ObjectiveOracle& g) {
  return std::make_unique<SmaxOracle>(f, g);
}

GradingRuleResult check_grading_rule(const ObjectiveOracle& f, const ObjectiveOracle& g,
                                     const std::vector<std::vector<double>>& samples) {
  const std::size_t n = f.dim();
  GradingRuleResult res;
  res.grade_f = sample_spectrum(f, samples).certified_grade;
  res.grade_g = sample_spectrum(g, samples).certified_grade;
  if (res.grade_f + res.grade_g < n)
    throw std::invalid_argument(
        "check_grading_rule: grade(f) + grade(g) < n, rule hypothesis not met");
  const auto sum = make_sum_oracle(f, g);
  res.grade_sum = sample_spectrum(*sum, samples).certified_grade;
  res.pass = res.grade_sum + n >= res.grade_f + res.grade_g;
  return res;
}

double estimate_qsc_constant(const ObjectiveOracle& oracle,
                             const std::vector<std::vector<double>>& samples,
                             std::size_t directions, SplitMix64& rng) {
  const std::size_t n = oracle.dim();
  if (samples.empty() || directions == 0)
    throw std::invalid_argument("estimate_qsc_constant: need samples and directions");

  double best = 0.0;
  std::vector<double> u(n), v(n), xp(n), xm(n), hp(n), hm(n), hu(n);
  for (const auto& x : samples) {
    if (x.size() != n)
      throw std::invalid_argument("estimate_qsc_constant: sample dimension mismatch");
    const double step = 1e-5 * (1.0 + kernels::nrm2(x.data(), n));
    for (std::size_t d = 0; d < directions; ++d) {
      rng.fill_gaussian(u);
      rng.fill_gaussian(v);
      const double un = kernels::nrm2(u.data(), n);
      const double vn = kernels::nrm2(v.data(), n);
      if (un == 0.0 || vn == 0.0) continue;
      kernels::scal(1.0 / un, u.data(), n);
      kernels::scal(1.0 / vn, v.data(), n);

      oracle.hessian_vec(x, u, hu);
      const double huu = kernels::dot(hu.data(), u.data(), n);
      if (huu < kRayleighFloor) continue;  /* M bounds D3 against <Hu,u>; skip flat u */

      /* d^3 f(x)[u, u, v] by a central difference of <Hess u, u> along v. */
      for (std::size_t i = 0; i < n; ++i) {
        xp[i] = x[i] + step * v[i];
        xm[i] = x[i] - step * v[i];
      }
      oracle.hessian_vec(xp, u, hp);
      oracle.hessian_vec(xm, u, hm);
      const double d3 = (kernels::dot(hp.data(), u.data(), n) -
                         kernels::dot(hm.data(), u.data(), n)) /
                        (2.0 * step);
      best = std::max(best, std::fabs(d3) / huu);
    }
  }
  return best;
}

}  // namespace specgrad
