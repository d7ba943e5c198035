/*
 * Dense linear algebra reference routines.  These back the exact (tau = n)
 * preconditioner, the oracle self-checks, and every test oracle that needs
 * true eigenvalues.  Implemented on top of Eigen in dense.cpp; this header
 * deliberately exposes only plain buffers so the rest of the code base does
 * not depend on Eigen types.
 */
#pragma once

#include <cstddef>
#include <vector>

namespace specgrad {

/* Column-major dense matrix. */
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double* col(std::size_t j) { return data_.data() + j * rows_; }
  const double* col(std::size_t j) const { return data_.data() + j * rows_; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct SymEigResult {
  std::vector<double> values;  /* sorted non-ascending */
  DenseMatrix vectors;         /* column i pairs with values[i] */
};

/* Full symmetric eigendecomposition; A is n x n and only assumed symmetric
 * up to roundoff (the symmetric part is decomposed). */
SymEigResult sym_eig_desc(const DenseMatrix& a);

/* Solve (A + alpha I) x = b for symmetric A with A + alpha I positive
 * definite.  Throws std::runtime_error when the factorization fails. */
std::vector<double> solve_shifted_spd(const DenseMatrix& a, double alpha,
                                      const std::vector<double>& b);

/* ||A||_2 for symmetric A (largest |eigenvalue|). */
double spectral_norm_sym(const DenseMatrix& a);

/* ||A||_2 of a general rectangular matrix (largest singular value). */
double spectral_norm(const DenseMatrix& a);

/* y = A x */
std::vector<double> matvec(const DenseMatrix& a, const std::vector<double>& x);

}  // namespace specgrad
