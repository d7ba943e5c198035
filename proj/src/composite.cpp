#include "specgrad/composite.h"

#include <cmath>
#include <stdexcept>

namespace specgrad {

bool Regularizer::is_zero() const {
  switch (kind) {
    case RegKind::Zero: return true;
    case RegKind::SquaredL2:
    case RegKind::L1: return coeff == 0.0;
    case RegKind::Box: return std::isinf(lo) && lo < 0.0 && std::isinf(hi) && hi > 0.0;
  }
  return false;
}

double Regularizer::value(const std::vector<double>& x) const {
  switch (kind) {
    case RegKind::Zero:
      return 0.0;
    case RegKind::SquaredL2: {
      double s = 0.0;
      for (double v : x) s += v * v;
      return 0.5 * coeff * s;
    }
    case RegKind::L1: {
      double s = 0.0;
      for (double v : x) s += std::fabs(v);
      return coeff * s;
    }
    case RegKind::Box:
      for (double v : x)
        if (v < lo || v > hi) return std::numeric_limits<double>::infinity();
      return 0.0;
  }
  return 0.0;
}

void Regularizer::prox(const std::vector<double>& v, double scale,
                       std::vector<double>& out) const {
  if (scale <= 0.0) throw std::invalid_argument("Regularizer::prox: scale must be positive");
  out.resize(v.size());
  switch (kind) {
    case RegKind::Zero:
      out = v;
      return;
    case RegKind::SquaredL2: {
      const double shrink = 1.0 / (1.0 + scale * coeff);
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = shrink * v[i];
      return;
    }
    case RegKind::L1: {
      const double t = scale * coeff;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > t)
          out[i] = v[i] - t;
        else if (v[i] < -t)
          out[i] = v[i] + t;
        else
          out[i] = 0.0;
      }
      return;
    }
    case RegKind::Box:
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::min(std::max(v[i], lo), hi);
      return;
  }
}

std::vector<double> Regularizer::min_norm_subgradient(const std::vector<double>& x) const {
  std::vector<double> s(x.size(), 0.0);
  switch (kind) {
    case RegKind::Zero:
      return s;
    case RegKind::SquaredL2:
      for (std::size_t i = 0; i < x.size(); ++i) s[i] = coeff * x[i];
      return s;
    case RegKind::L1:
      /* 0 is the minimum-norm choice on [-coeff, coeff] at x_i = 0. */
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] != 0.0) s[i] = (x[i] > 0.0) ? coeff : -coeff;
      return s;
    case RegKind::Box:
      for (double v : x)
        if (v < lo || v > hi)
          throw std::domain_error("Regularizer: point outside the box");
      /* 0 lies in the normal cone at every feasible point. */
      return s;
  }
  return s;
}

}  // namespace specgrad
