// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_EIGEN_EXTREMES_HPP
#define COHELM_EIGEN_EXTREMES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cohelm/gmres.hpp"
#include "cohelm/linalg.hpp"

namespace cohelm
{

// Below this size the pencil is solved densely.
inline constexpr int kDenseEigenLimit = 500;

struct PencilExtremes
{
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

struct LanczosOptions
{
  double tol = 1e-10;  // relative Ritz residual
  int max_iter = 600;
  std::uint64_t seed = 12345;
};

inline SparseComplexMatrix hermitian_part(const SparseComplexMatrix &B)
{
  SparseComplexMatrix Bh = B.adjoint();
  SparseComplexMatrix H = 0.5 * (B + Bh);
  H.makeCompressed();
  return H;
}

//
// Largest eigenvalue of an operator T that is self-adjoint in the D-inner
// product, by Lanczos with full reorthogonalization in that inner product.
//
inline double lanczos_max(const LinearOperator &T, const SpdFactor &D, const LanczosOptions &opt = {})
{
  const int n = D.size();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  ComplexVector v(n);
  for (int i = 0; i < n; i++)
  {
    v[i] = Complex(normal(rng), normal(rng));
  }
  v /= D.norm(v);

  std::vector<ComplexVector> V{v}, DV{D.apply(v)};
  std::vector<double> alpha, beta;
  const int mmax = std::min(opt.max_iter, n);
  double theta = 0.0;
  for (int j = 0; j < mmax; j++)
  {
    ComplexVector w = T(V[j]);
    const double a = DV[j].dot(w).real();
    alpha.push_back(a);
    for (int pass = 0; pass < 2; pass++)
    {
      for (int i = 0; i <= j; i++)
      {
        w -= DV[i].dot(w) * V[i];
      }
    }
    ComplexVector Dw = D.apply(w);
    const double b = std::sqrt(std::max(0.0, w.dot(Dw).real()));

    const int m = j + 1;
    Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; i++)
    {
      Tm(i, i) = alpha[i];
      if (i + 1 < m)
      {
        Tm(i, i + 1) = Tm(i + 1, i) = beta[i];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tm);
    theta = es.eigenvalues()[m - 1];
    const double resid = std::abs(b * es.eigenvectors()(m - 1, m - 1));
    const double scale = std::max(std::abs(es.eigenvalues()[0]), std::abs(theta));
    if (resid <= opt.tol * scale || b <= 1e-14 * scale || m == n)
    {
      return theta;
    }
    beta.push_back(b);
    V.push_back(w / b);
    DV.push_back(Dw / b);
  }
  throw LinalgError("lanczos_max: no convergence within the iteration cap");
}

namespace detail
{

// Cholesky factor of a complex Hermitian matrix; reports indefiniteness.
class HermitianFactor
{
public:
  explicit HermitianFactor(const SparseComplexMatrix &A)
      : llt_(std::make_unique<Eigen::CholmodSupernodalLLT<SparseComplexMatrix>>())
  {
    llt_->cholmod().print = 0;
    llt_->compute(A);
    ok_ = llt_->info() == Eigen::Success;
  }
  bool ok() const { return ok_; }
  ComplexVector solve(const ComplexVector &b) const { return llt_->solve(b); }

private:
  std::unique_ptr<Eigen::CholmodSupernodalLLT<SparseComplexMatrix>> llt_;
  bool ok_ = false;
};

inline PencilExtremes dense_pencil_extremes(const SparseComplexMatrix &H, const SpdFactor &D)
{
  Eigen::MatrixXcd Hd = Eigen::MatrixXcd(H);
  Hd = 0.5 * (Hd + Hd.adjoint().eval());
  Eigen::MatrixXcd Dd = Eigen::MatrixXd(D.matrix()).cast<Complex>();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(Hd, Dd, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
  {
    throw LinalgError("dense pencil eigensolver failed");
  }
  const auto &ev = es.eigenvalues();
  return {ev[0], ev[ev.size() - 1]};
}

}  // namespace detail

//
// Smallest eigenvalue of the pencil (H, D) by shift-invert Lanczos:
// for sigma below the spectrum, (H - sigma D)^{-1} D has largest
// eigenvalue 1 / (lambda_min - sigma).
//
inline double pencil_min(const SparseComplexMatrix &H, const SpdFactor &D, const LanczosOptions &opt = {})
{
  const SparseComplexMatrix Dc = to_complex(D.matrix());
  auto shift_invert = [&](double sigma) -> std::optional<double> {
    SparseComplexMatrix A = H - Complex(sigma) * Dc;
    A.makeCompressed();
    detail::HermitianFactor F(A);
    if (!F.ok())
    {
      return std::nullopt;
    }
    LinearOperator T = [&](const ComplexVector &v) { return F.solve(D.apply(v)); };
    const double mu = lanczos_max(T, D, opt);
    if (!(mu > 0.0))
    {
      return std::nullopt;
    }
    return sigma + 1.0 / mu;
  };

  if (auto lam = shift_invert(0.0))
  {
    return *lam;
  }
  // Indefinite: locate the bottom of the spectrum from -lambda_max(-H).
  LinearOperator negT = [&](const ComplexVector &v) { return ComplexVector(-D.solve(H * v)); };
  LanczosOptions coarse = opt;
  coarse.tol = 1e-3;
  double low = -lanczos_max(negT, D, coarse);
  double step = std::max(1e-3 * std::abs(low), 1e-8);
  for (int attempt = 0; attempt < 60; attempt++)
  {
    if (auto lam = shift_invert(low - step))
    {
      return *lam;
    }
    step *= 2.0;
  }
  throw LinalgError("pencil_min: could not find a definite shift");
}

//
// Extreme eigenvalues of the Hermitian pencil (H, D).
//
inline PencilExtremes hermitian_pencil_extremes(const SparseComplexMatrix &H, const SpdFactor &D,
                                                const LanczosOptions &opt = {})
{
  if (H.rows() != D.size() || H.cols() != D.size())
  {
    throw std::invalid_argument("hermitian_pencil_extremes: dimension mismatch");
  }
  if (D.size() <= kDenseEigenLimit)
  {
    return detail::dense_pencil_extremes(H, D);
  }
  PencilExtremes out;
  LinearOperator T = [&](const ComplexVector &v) { return D.solve(H * v); };
  out.lambda_max = lanczos_max(T, D, opt);
  out.lambda_min = pencil_min(H, D, opt);
  return out;
}

//
// sqrt(lambda_max(B^* D^{-1} B, D)), the operator norm of D^{-1} B in the
// D-norm.
//
inline double weighted_operator_norm(const SparseComplexMatrix &B, const SpdFactor &D, const LanczosOptions &opt = {})
{
  if (D.size() <= kDenseEigenLimit)
  {
    Eigen::MatrixXcd Bd = Eigen::MatrixXcd(B);
    Eigen::MatrixXcd Dd = Eigen::MatrixXd(D.matrix()).cast<Complex>();
    Eigen::MatrixXcd G = Bd.adjoint() * Dd.ldlt().solve(Bd);
    G = 0.5 * (G + G.adjoint().eval());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Dd, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
    {
      throw LinalgError("dense pencil eigensolver failed");
    }
    return std::sqrt(std::max(0.0, es.eigenvalues()[es.eigenvalues().size() - 1]));
  }
  const SparseComplexMatrix Bh = B.adjoint();
  LinearOperator T = [&](const ComplexVector &v) {
    return D.solve(Bh * D.solve(B * v));
  };
  return std::sqrt(std::max(0.0, lanczos_max(T, D, opt)));
}

}  // namespace cohelm

#endif  // COHELM_EIGEN_EXTREMES_HPP
