#include "specgrad/kernels.h"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace specgrad::kernels {

namespace scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double nrm2(const double* x, std::size_t n) {
  /* Two-pass scaled form; avoids overflow for ||x|| near DBL_MAX. */
  double amax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (v > amax) amax = v;
  }
  if (amax == 0.0 || !std::isfinite(amax)) return amax * std::sqrt(static_cast<double>(n > 0));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i] / amax;
    s += v * v;
  }
  return amax * std::sqrt(s);
}

}  // namespace scalar

#ifdef SPECGRAD_HAVE_AVX2_TU
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scal(double a, double* x, std::size_t n);
double nrm2(const double* x, std::size_t n);
}  // namespace avx2
#endif

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scal)(double, double*, std::size_t);
  double (*nrm2)(const double*, std::size_t);
};

constexpr Vtable kScalarVt = {scalar::dot, scalar::axpy, scalar::scal, scalar::nrm2};
#ifdef SPECGRAD_HAVE_AVX2_TU
constexpr Vtable kAvx2Vt = {avx2::dot, avx2::axpy, avx2::scal, avx2::nrm2};
#endif

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect_backend() {
  const char* env = std::getenv("SPECGRAD_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::Avx2))
      return Backend::Avx2;
    /* "auto" or anything unrecognized falls through to detection. */
  }
  return backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

Backend g_backend = Backend::Scalar;
const Vtable* g_vt = nullptr;

void apply_backend(Backend b) {
  g_backend = b;
#ifdef SPECGRAD_HAVE_AVX2_TU
  g_vt = (b == Backend::Avx2) ? &kAvx2Vt : &kScalarVt;
#else
  g_vt = &kScalarVt;
#endif
}

const Vtable* vt() {
  if (g_vt == nullptr) apply_backend(detect_backend());
  return g_vt;
}

}  // namespace

Backend active_backend() {
  (void)vt();
  return g_backend;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "?";
}

bool backend_available(Backend b) {
  if (b == Backend::Scalar) return true;
#ifdef SPECGRAD_HAVE_AVX2_TU
  return cpu_has_avx2_fma();
#else
  return false;
#endif
}

bool force_backend(Backend b) {
  if (!backend_available(b)) return false;
  apply_backend(b);
  return true;
}

void reset_backend() { apply_backend(detect_backend()); }

double dot(const double* x, const double* y, std::size_t n) { return vt()->dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { vt()->axpy(a, x, y, n); }
void scal(double a, double* x, std::size_t n) { vt()->scal(a, x, n); }
double nrm2(const double* x, std::size_t n) { return vt()->nrm2(x, n); }

}  // namespace specgrad::kernels
