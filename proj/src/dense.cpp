#include "specgrad/dense.h"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <stdexcept>

namespace specgrad {

namespace {

using MapConst = Eigen::Map<const Eigen::MatrixXd>;
using VecMapConst = Eigen::Map<const Eigen::VectorXd>;

Eigen::MatrixXd sym_part(const DenseMatrix& a) {
  MapConst m(a.data(), static_cast<Eigen::Index>(a.rows()),
             static_cast<Eigen::Index>(a.cols()));
  return 0.5 * (m + m.transpose());
}

}  // namespace

SymEigResult sym_eig_desc(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig_desc: matrix not square");
  const Eigen::Index n = static_cast<Eigen::Index>(a.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym_part(a));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_eig_desc: eigensolver failed to converge");

  /* Eigen sorts ascending; flip to non-ascending. */
  SymEigResult out;
  out.values.resize(static_cast<std::size_t>(n));
  out.vectors = DenseMatrix(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = n - 1 - j;
    out.values[static_cast<std::size_t>(j)] = es.eigenvalues()(src);
    for (Eigen::Index i = 0; i < n; ++i)
      out.vectors(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          es.eigenvectors()(i, src);
  }
  return out;
}

std::vector<double> solve_shifted_spd(const DenseMatrix& a, double alpha,
                                      const std::vector<double>& b) {
  if (a.rows() != a.cols() || b.size() != a.rows())
    throw std::invalid_argument("solve_shifted_spd: dimension mismatch");
  const Eigen::Index n = static_cast<Eigen::Index>(a.rows());
  Eigen::MatrixXd m = sym_part(a);
  m.diagonal().array() += alpha;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("solve_shifted_spd: factorization failed");
  Eigen::VectorXd x = ldlt.solve(VecMapConst(b.data(), n));
  return std::vector<double>(x.data(), x.data() + n);
}

double spectral_norm_sym(const DenseMatrix& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym_part(a),
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_norm_sym: eigensolver failed to converge");
  const Eigen::VectorXd& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double spectral_norm(const DenseMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  MapConst m(a.data(), static_cast<Eigen::Index>(a.rows()),
             static_cast<Eigen::Index>(a.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

std::vector<double> matvec(const DenseMatrix& a, const std::vector<double>& x) {
  if (x.size() != a.cols()) throw std::invalid_argument("matvec: dimension mismatch");
  MapConst m(a.data(), static_cast<Eigen::Index>(a.rows()),
             static_cast<Eigen::Index>(a.cols()));
  Eigen::VectorXd y = m * VecMapConst(x.data(), static_cast<Eigen::Index>(x.size()));
  return std::vector<double>(y.data(), y.data() + y.size());
}

}  // namespace specgrad
