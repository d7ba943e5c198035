/*
 * Built-in benchmark objectives and their factory.  All derivatives are
 * exact and matrix-free; dense Hessians use closed forms where cheap.
 */
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "specgrad/dataset.h"
#include "specgrad/dense.h"
#include "specgrad/oracle.h"

namespace specgrad {

enum class ProblemKind {
  Quadratic,            /* f = 1/2 <Ax,x> - <b,x> */
  RegQuadratic,         /* quadratic + (sigma/p)||x||^p, p > 2 */
  DiagonalNN,           /* f = 1/2 sum_i (x_i y_i - c_i)^2, variables [x; y] */
  MatrixFactorization,  /* f = 1/2 ||XY - C||_F^2, variables [vec X; vec Y] */
  Logistic              /* averaged logistic loss + (l2/2)||w||^2 */
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Quadratic;
  std::uint64_t seed = 0;

  /* quadratic / regularized quadratic */
  std::vector<double> eigenvalues;
  std::vector<double> b;  /* empty = zero */
  bool rotate = false;    /* conjugate diag(eigenvalues) by a seeded random Q */
  double p = 3.0;
  double sigma_reg = 0.0;

  /* diagonal-nn: target c (length n; total dimension 2n) */
  std::vector<double> target_c;

  /* matrix factorization: X is n x r, Y is r x m */
  std::size_t mf_n = 0, mf_m = 0, mf_r = 0;
  std::vector<double> mf_c;  /* explicit C, column-major n x m; empty = generated */
  double mf_c_scale = 1.0;

  /* logistic regression */
  std::string dataset_path;  /* empty = synthetic */
  std::size_t synth_m = 0, synth_d = 0, strong_dirs = 0;
  double strong_scale = 1.0;
  double l2 = 0.0;
};

/* Validates the spec and instantiates the oracle.  Instantiation from equal
 * specs (same seed) is bit-identical.  Throws std::invalid_argument on bad
 * parameters and std::runtime_error on dataset problems. */
std::unique_ptr<ObjectiveOracle> build_oracle(const ProblemSpec& spec);

/* Default starting point for experiments: deterministic in the problem spec
 * (derived from its seed), shared by every run of one experiment. */
std::vector<double> default_x0(const ProblemSpec& spec, const ObjectiveOracle& oracle);

/* Closed-form Hessian eigenvalues of the diagonal neural network at a point
 * [x; y] (length 2n): for each i the pair
 *   1/2 [ x_i^2 + y_i^2 +- sqrt((x_i^2 - y_i^2)^2 + 4 (2 x_i y_i - c_i)^2) ].
 * At least one value of each pair is nonnegative. */
std::vector<double> diagonal_nn_eigenpairs(const std::vector<double>& point,
                                           const std::vector<double>& c);

/* Concrete oracle types, exposed for direct construction in tests. */

class QuadraticOracle final : public ObjectiveOracle {
 public:
  QuadraticOracle(DenseMatrix a, std::vector<double> b);
  std::size_t dim() const override { return n_; }
  double value(const std::vector<double>& x) const override;
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override;
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override;
  DenseMatrix dense_hessian(const std::vector<double>& x) const override;
  OracleConstants constants() const override;
  std::optional<double> lower_bound() const override;
  const DenseMatrix& matrix() const { return a_; }

 private:
  std::size_t n_;
  DenseMatrix a_;
  std::vector<double> b_;
  std::optional<double> mu_;          /* min eigenvalue when positive */
  std::optional<double> lower_bound_; /* set when A is PSD */
};

class RegQuadraticOracle final : public ObjectiveOracle {
 public:
  RegQuadraticOracle(DenseMatrix a, std::vector<double> b, double p, double sigma);
  std::size_t dim() const override { return n_; }
  double value(const std::vector<double>& x) const override;
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override;
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override;
  DenseMatrix dense_hessian(const std::vector<double>& x) const override;
  OracleConstants constants() const override;

 private:
  std::size_t n_;
  DenseMatrix a_;
  std::vector<double> b_;
  double p_, sigma_;
};

class DiagonalNNOracle final : public ObjectiveOracle {
 public:
  explicit DiagonalNNOracle(std::vector<double> c);
  std::size_t dim() const override { return 2 * c_.size(); }
  double value(const std::vector<double>& x) const override;
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override;
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override;
  DenseMatrix dense_hessian(const std::vector<double>& x) const override;
  std::optional<double> lower_bound() const override { return 0.0; }
  const std::vector<double>& target() const { return c_; }

 private:
  std::vector<double> c_;
};

class MatrixFactorizationOracle final : public ObjectiveOracle {
 public:
  /* c is column-major n x m. */
  MatrixFactorizationOracle(std::size_t n, std::size_t m, std::size_t r,
                            std::vector<double> c);
  std::size_t dim() const override { return n_ * r_ + r_ * m_; }
  double value(const std::vector<double>& x) const override;
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override;
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override;
  std::optional<double> lower_bound() const override { return 0.0; }
  std::size_t rows() const { return n_; }
  std::size_t cols() const { return m_; }
  std::size_t rank() const { return r_; }

 private:
  /* Variable layout: first n*r entries are X column-major, then r*m for Y. */
  std::size_t n_, m_, r_;
  std::vector<double> c_;
};

class LogisticOracle final : public ObjectiveOracle {
 public:
  LogisticOracle(Dataset data, double l2);
  std::size_t dim() const override { return data_.d; }
  double value(const std::vector<double>& x) const override;
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override;
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override;
  DenseMatrix dense_hessian(const std::vector<double>& x) const override;
  OracleConstants constants() const override;
  std::optional<double> lower_bound() const override { return 0.0; }
  const Dataset& data() const { return data_; }

 private:
  Dataset data_;
  double l2_;
  double max_row_norm_;
  double hessian_lipschitz_;
};

}  // namespace specgrad
