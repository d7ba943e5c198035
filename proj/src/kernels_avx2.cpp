/*
 * AVX2+FMA kernel variants.  Compiled with -mavx2 -mfma for this one
 * translation unit only; dispatch in kernels.cpp guarantees these run only
 * on CPUs that support both.  Each routine mirrors the scalar algorithm,
 * including the overflow-safe two-pass nrm2, so results agree with the
 * scalar backend up to reassociation roundoff.
 */
#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace specgrad::kernels::avx2 {

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  acc0 = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc0);
  double s = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  /* mul + add, not fmadd: axpy is memory-bound, and separate rounding keeps
   * the result bitwise equal to the scalar backend. */
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

double nrm2(const double* x, std::size_t n) {
  const __m256d absmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
  __m256d amaxv = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    amaxv = _mm256_max_pd(amaxv, _mm256_and_pd(absmask, _mm256_loadu_pd(x + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, amaxv);
  double amax = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
  for (; i < n; ++i) {
    const double v = std::fabs(x[i]);
    if (v > amax) amax = v;
  }
  if (amax == 0.0 || !std::isfinite(amax)) return amax * std::sqrt(static_cast<double>(n > 0));

  const __m256d scale = _mm256_set1_pd(amax);
  __m256d acc = _mm256_setzero_pd();
  i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_div_pd(_mm256_loadu_pd(x + i), scale);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  _mm256_store_pd(lane, acc);
  double s = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    const double v = x[i] / amax;
    s += v * v;
  }
  return amax * std::sqrt(s);
}

}  // namespace specgrad::kernels::avx2
