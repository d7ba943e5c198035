/*
 * Vector kernels used by all hot loops (power iterations, Woodbury apply,
 * oracle inner products).  A scalar reference implementation is always
 * compiled; an AVX2+FMA variant is selected at runtime when the CPU supports
 * it.  The environment variable SPECGRAD_KERNELS ("scalar", "avx2", "auto")
 * overrides detection.  Within one process the backend is fixed after first
 * use, so repeated runs on the same machine produce identical arithmetic.
 */
#pragma once

#include <cstddef>
#include <span>

namespace specgrad::kernels {

enum class Backend { Scalar = 0, Avx2 = 1 };

/* Backend active for subsequent calls (resolved on first use). */
Backend active_backend();
const char* backend_name(Backend b);

/* True if this build + CPU can run the given backend. */
bool backend_available(Backend b);

/* Force a backend (used by the equivalence tests). Returns false and leaves
 * the state unchanged when the backend is unavailable. */
bool force_backend(Backend b);

/* Re-run detection, honoring SPECGRAD_KERNELS. */
void reset_backend();

double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);  /* y += a*x */
void scal(double a, double* x, std::size_t n);                   /* x *= a  */
double nrm2(const double* x, std::size_t n);

inline double dot(std::span<const double> x, std::span<const double> y) {
  return dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  axpy(a, x.data(), y.data(), x.size());
}
inline void scal(double a, std::span<double> x) { scal(a, x.data(), x.size()); }
inline double nrm2(std::span<const double> x) { return nrm2(x.data(), x.size()); }

}  // namespace specgrad::kernels
