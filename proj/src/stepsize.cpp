#include "specgrad/stepsize.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "specgrad/kernels.h"
#include "specgrad/step.h"

namespace specgrad {

double alpha_lipschitz(double grad_norm, double L, double sigma_tau, double delta) {
  return std::sqrt(L * grad_norm / 2.0) + sigma_tau + delta;
}

double alpha_qsc(double grad_norm, double M, double sigma_tau, double delta) {
  return M * grad_norm + sigma_tau + delta;
}

namespace {

/* phi(alpha) = alpha - (L/2) ||(H + (alpha + eta) I)^{-1} g||, strictly
 * increasing on (0, inf).  Returns phi and the solve vector's norm. */
double phi_value(const LowRankPreconditioner& h, const std::vector<double>& g, double L,
                 double eta, double alpha, double* rho_out) {
  const std::vector<double> s = woodbury_apply(h, alpha + eta, g);
  const double rho = kernels::nrm2(s.data(), s.size());
  if (rho_out != nullptr) *rho_out = rho;
  return alpha - 0.5 * L * rho;
}

}  // namespace

double alpha_cubic_star(const LowRankPreconditioner& h, const std::vector<double>& g,
                        double L, double eta, double tol) {
  if (L <= 0.0) throw std::invalid_argument("alpha_cubic_star: L must be positive");
  if (eta < 0.0) throw std::invalid_argument("alpha_cubic_star: eta must be nonnegative");
  const double gnorm = kernels::nrm2(g.data(), g.size());
  if (gnorm == 0.0) throw std::invalid_argument("alpha_cubic_star: g must be nonzero");
  if (tol <= 0.0) tol = 1e-10;

  /* phi(sqrt(L ||g|| / 2)) >= 0 analytically; keep a doubling safeguard for
   * roundoff at extreme scales. */
  double hi = std::sqrt(L * gnorm / 2.0);
  int guard = 0;
  while (phi_value(h, g, L, eta, hi, nullptr) < 0.0) {
    hi *= 2.0;
    if (++guard > 200)
      throw std::runtime_error("alpha_cubic_star: no upper bracket after 200 doublings");
  }
  double lo = hi * 1e-18;
  guard = 0;
  while (phi_value(h, g, L, eta, lo, nullptr) > 0.0) {
    lo *= 0.5;
    if (++guard > 200)
      throw std::runtime_error("alpha_cubic_star: no lower bracket after 200 halvings");
  }

  /* Newton on phi with bisection fallback.  phi'(alpha) =
   * 1 + (L/2) <s, (H + (alpha+eta) I)^{-1} s> / ||s||  > 1.  Once inside the
   * tolerance, one more Newton step lands at machine accuracy (quadratic
   * convergence), so callers see essentially the exact fixed point. */
  double alpha = std::sqrt(lo * hi);
  bool polished = false;
  for (int it = 0; it < 200; ++it) {
    double rho = 0.0;
    const std::vector<double> s = woodbury_apply(h, alpha + eta, g);
    rho = kernels::nrm2(s.data(), s.size());
    const double phi = alpha - 0.5 * L * rho;
    if (std::fabs(phi) <= tol * alpha && (polished || phi == 0.0)) return alpha;
    if (std::fabs(phi) <= tol * alpha) polished = true;
    if (phi > 0.0)
      hi = alpha;
    else
      lo = alpha;
    /* Roundoff-width bracket: the midpoint is as good as it gets. */
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * lo) return 0.5 * (lo + hi);

    const std::vector<double> t = woodbury_apply(h, alpha + eta, s);
    const double dphi = 1.0 + 0.5 * L * kernels::dot(s.data(), t.data(), s.size()) / rho;
    double next = alpha - phi / dphi;
    if (next == alpha) return alpha;  /* numerical fixed point of the update */
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    alpha = next;
  }
  return alpha;
}

AdaptiveOutcome alpha_adaptive(double& l_estimate,
                               const std::function<double(double)>& alpha_for_L,
                               const std::function<bool(double)>& accept_trial,
                               double growth, double shrink, int max_doublings) {
  if (l_estimate <= 0.0) l_estimate = 1e-20;
  double L = l_estimate;
  AdaptiveOutcome out;
  for (int attempt = 0; attempt <= max_doublings; ++attempt) {
    const double alpha = alpha_for_L(L);
    if (accept_trial(alpha)) {
      out.alpha = alpha;
      out.accepted_L = L;
      out.doublings = attempt;
      l_estimate = std::max(L * shrink, 1e-20);
      return out;
    }
    L *= growth;
  }
  std::ostringstream msg;
  msg << "alpha_adaptive: progress test failed after " << max_doublings
      << " doublings (L reached " << L << ")";
  throw std::runtime_error(msg.str());
}

}  // namespace specgrad
