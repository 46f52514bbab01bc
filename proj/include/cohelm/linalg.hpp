// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_LINALG_HPP
#define COHELM_LINALG_HPP

#include <complex>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/CholmodSupport>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

namespace cohelm
{

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SparseComplexMatrix = Eigen::SparseMatrix<Complex>;
using SparseRealMatrix = Eigen::SparseMatrix<double>;

inline constexpr Complex kI{0.0, 1.0};

class LinalgError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public LinalgError
{
public:
  NotPositiveDefinite() : LinalgError("matrix is not positive definite") {}
};

inline SparseComplexMatrix to_complex(const SparseRealMatrix &A)
{
  return A.cast<Complex>();
}

// Real part, after checking the imaginary part is negligible.
inline SparseRealMatrix real_part_checked(const SparseComplexMatrix &A, double tol = 1e-14)
{
  double scale = 0.0, imag = 0.0;
  for (int j = 0; j < A.outerSize(); j++)
  {
    for (SparseComplexMatrix::InnerIterator it(A, j); it; ++it)
    {
      scale = std::max(scale, std::abs(it.value()));
      imag = std::max(imag, std::abs(it.value().imag()));
    }
  }
  if (imag > tol * std::max(scale, 1.0))
  {
    throw LinalgError("real_part_checked: matrix has a non-negligible imaginary part");
  }
  return A.real();
}

// Largest entry magnitude.
template <typename Scalar>
double max_abs(const Eigen::SparseMatrix<Scalar> &A)
{
  double m = 0.0;
  for (int j = 0; j < A.outerSize(); j++)
  {
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(A, j); it; ++it)
    {
      m = std::max(m, static_cast<double>(std::abs(it.value())));
    }
  }
  return m;
}

// Factorized sparse complex LU (UMFPACK) for repeated solves.
class DirectSolver
{
public:
  explicit DirectSolver(const SparseComplexMatrix &A)
      : lu_(std::make_unique<Eigen::UmfPackLU<SparseComplexMatrix>>())
  {
    if (A.rows() != A.cols() || A.rows() == 0)
    {
      throw std::invalid_argument("DirectSolver: matrix must be square and non-empty");
    }
    lu_->compute(A);
    if (lu_->info() != Eigen::Success)
    {
      throw LinalgError("DirectSolver: factorization failed (singular to working precision)");
    }
  }

  ComplexVector solve(const ComplexVector &b) const
  {
    ComplexVector x = lu_->solve(b);
    if (lu_->info() != Eigen::Success || !x.allFinite())
    {
      throw LinalgError("DirectSolver: solve failed");
    }
    return x;
  }

private:
  std::unique_ptr<Eigen::UmfPackLU<SparseComplexMatrix>> lu_;
};

inline ComplexVector direct_solve(const SparseComplexMatrix &A, const ComplexVector &b)
{
  if (A.rows() != b.size())
  {
    throw std::invalid_argument("direct_solve: dimension mismatch");
  }
  return DirectSolver(A).solve(b);
}

//
// Cholesky factorization of a real symmetric positive-definite matrix D,
// with the D-inner product <v, w>_D = w^* D v used by weighted GMRES.
//
class SpdFactor
{
public:
  explicit SpdFactor(SparseRealMatrix D)
      : D_(std::move(D)), llt_(std::make_unique<Eigen::CholmodSupernodalLLT<SparseRealMatrix>>())
  {
    if (D_.rows() != D_.cols() || D_.rows() == 0)
    {
      throw std::invalid_argument("SpdFactor: matrix must be square and non-empty");
    }
    D_.makeCompressed();
    llt_->cholmod().print = 0;
    llt_->compute(D_);
    if (llt_->info() != Eigen::Success)
    {
      throw NotPositiveDefinite();
    }
  }

  static SpdFactor identity(int n)
  {
    SparseRealMatrix I(n, n);
    I.setIdentity();
    return SpdFactor(std::move(I));
  }

  int size() const { return static_cast<int>(D_.rows()); }
  const SparseRealMatrix &matrix() const { return D_; }

  // D v
  ComplexVector apply(const ComplexVector &v) const { return D_ * v; }

  // D^{-1} y, real and imaginary parts solved together.
  ComplexVector solve(const ComplexVector &y) const
  {
    Eigen::MatrixXd rhs(y.size(), 2);
    rhs.col(0) = y.real();
    rhs.col(1) = y.imag();
    Eigen::MatrixXd x = llt_->solve(rhs);
    ComplexVector out(y.size());
    out.real() = x.col(0);
    out.imag() = x.col(1);
    return out;
  }

  Complex inner(const ComplexVector &v, const ComplexVector &w) const
  {
    return w.dot(D_ * v);  // dot conjugates its left argument
  }

  double norm(const ComplexVector &v) const { return std::sqrt(std::max(0.0, inner(v, v).real())); }

private:
  SparseRealMatrix D_;
  std::unique_ptr<Eigen::CholmodSupernodalLLT<SparseRealMatrix>> llt_;
};

}  // namespace cohelm

#endif  // COHELM_LINALG_HPP
