/*
 * Objective oracle contract.  Every problem exposes f, the gradient, and a
 * matrix-free Hessian-vector product; a dense Hessian is available only for
 * small dimensions (reference paths and tests).  Oracles are immutable after
 * construction and safe for concurrent read-only use.
 */
#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "specgrad/dense.h"

namespace specgrad {

class SplitMix64;

/* Known smoothness constants, when the problem admits them in closed form.
 * L: Lipschitz constant of the Hessian; M: quasi-self-concordance constant;
 * mu: strong convexity modulus. */
struct OracleConstants {
  std::optional<double> L;
  std::optional<double> M;
  std::optional<double> mu;
};

/* Largest dimension for which dense Hessian assembly is allowed.  Reads the
 * environment variable SPECGRAD_DENSE_LIMIT on every call; defaults to 512. */
std::size_t dense_limit();

class ObjectiveOracle {
 public:
  virtual ~ObjectiveOracle() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(const std::vector<double>& x) const = 0;
  virtual void gradient(const std::vector<double>& x, std::vector<double>& g) const = 0;
  virtual void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                           std::vector<double>& out) const = 0;

  /* n x n symmetric Hessian.  The base implementation assembles it from n
   * hessian_vec calls on unit vectors and symmetrizes; throws when
   * dim() > dense_limit().  Subclasses may provide a faster direct form but
   * must respect the same limit. */
  virtual DenseMatrix dense_hessian(const std::vector<double>& x) const;

  virtual OracleConstants constants() const { return {}; }

  /* Known global lower bound f*, when available. */
  virtual std::optional<double> lower_bound() const { return std::nullopt; }

  /* Allocation conveniences. */
  std::vector<double> grad(const std::vector<double>& x) const;
  std::vector<double> hvp(const std::vector<double>& x, const std::vector<double>& v) const;

 protected:
  /* Throws std::runtime_error when n > dense_limit(). */
  static void require_dense_allowed(std::size_t n);
};

/* Pass-through wrapper that counts oracle calls.  Counters are atomic so
 * concurrent read-only evaluation (harness sweeps) stays well-defined. */
class CountingOracle final : public ObjectiveOracle {
 public:
  explicit CountingOracle(const ObjectiveOracle& inner) : inner_(&inner) {}

  std::size_t dim() const override { return inner_->dim(); }
  double value(const std::vector<double>& x) const override {
    ++value_evals_;
    return inner_->value(x);
  }
  void gradient(const std::vector<double>& x, std::vector<double>& g) const override {
    ++grad_evals_;
    inner_->gradient(x, g);
  }
  void hessian_vec(const std::vector<double>& x, const std::vector<double>& v,
                   std::vector<double>& out) const override {
    ++hvp_calls_;
    inner_->hessian_vec(x, v, out);
  }
  DenseMatrix dense_hessian(const std::vector<double>& x) const override {
    ++dense_evals_;
    return inner_->dense_hessian(x);
  }
  OracleConstants constants() const override { return inner_->constants(); }
  std::optional<double> lower_bound() const override { return inner_->lower_bound(); }

  long long value_evals() const { return value_evals_.load(); }
  long long grad_evals() const { return grad_evals_.load(); }
  long long hvp_calls() const { return hvp_calls_.load(); }
  long long dense_evals() const { return dense_evals_.load(); }
  void reset_counters() {
    value_evals_ = 0;
    grad_evals_ = 0;
    hvp_calls_ = 0;
    dense_evals_ = 0;
  }

 private:
  const ObjectiveOracle* inner_;
  mutable std::atomic<long long> value_evals_{0};
  mutable std::atomic<long long> grad_evals_{0};
  mutable std::atomic<long long> hvp_calls_{0};
  mutable std::atomic<long long> dense_evals_{0};
};

/* Self-check of the oracle contract at one point: central-difference
 * gradient agreement, hvp symmetry and linearity, dense/hvp consistency.
 * Each err field is a relative error; pass iff all within their bounds
 * (1e-5 for the finite difference, 1e-10 for the rest). */
struct OracleCheckReport {
  double grad_fd_err = 0.0;
  double hvp_sym_err = 0.0;
  double hvp_lin_err = 0.0;
  double dense_err = 0.0;
  bool dense_checked = false;
  bool pass = false;
};

OracleCheckReport check_oracle(const ObjectiveOracle& oracle, const std::vector<double>& x,
                               SplitMix64& rng, bool with_dense = true,
                               double fd_tol = 1e-5, double exact_tol = 1e-10);

}  // namespace specgrad
