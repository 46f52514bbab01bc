// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cohelm/analysis.hpp"
#include "cohelm/gmres.hpp"

using namespace cohelm;

namespace
{

Eigen::MatrixXcd random_matrix(int n, std::mt19937_64 &rng, double shift)
{
  std::normal_distribution<double> N;
  Eigen::MatrixXcd A(n, n);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++) A(i, j) = Complex(N(rng), N(rng)) / std::sqrt(double(n));
  return A + shift * Eigen::MatrixXcd::Identity(n, n);
}

ComplexVector random_vector(int n, std::mt19937_64 &rng)
{
  std::normal_distribution<double> N;
  ComplexVector v(n);
  for (int i = 0; i < n; i++) v[i] = Complex(N(rng), N(rng));
  return v;
}

// Textbook GMRES by explicit least squares: at step m, orthonormalize the
// Krylov basis with Householder QR and minimize ||b - A K y||_2 directly.
std::vector<double> oracle_residuals(const Eigen::MatrixXcd &A, const ComplexVector &b, int steps)
{
  std::vector<double> out{b.norm()};
  Eigen::MatrixXcd K(b.size(), 0);
  ComplexVector v = b / b.norm();
  for (int m = 1; m <= steps; m++)
  {
    K.conservativeResize(Eigen::NoChange, m);
    K.col(m - 1) = v;
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(K);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(b.size(), m);
    const Eigen::MatrixXcd AQ = A * Q;
    const ComplexVector y = AQ.colPivHouseholderQr().solve(b);
    out.push_back((b - AQ * y).norm());
    v = A * Q.col(m - 1);
    v -= Q * (Q.adjoint() * v);
    v -= Q * (Q.adjoint() * v);
    v /= v.norm();
  }
  return out;
}

SparseRealMatrix random_spd(int n, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> U(0.5, 3.0);
  SparseRealMatrix D(n, n);
  for (int i = 0; i < n; i++)
  {
    D.insert(i, i) = 4.0 + U(rng);
    if (i + 1 < n)
    {
      const double o = U(rng) * 0.5;
      D.insert(i, i + 1) = o;
      D.insert(i + 1, i) = o;
    }
  }
  D.makeCompressed();
  return D;
}

}  // namespace

TEST(Gmres, IdentityConvergesInOneStep)
{
  std::mt19937_64 rng(1);
  const ComplexVector b = random_vector(10, rng);
  const GmresResult r = weighted_gmres([](const ComplexVector &v) { return v; }, b, {});
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_LE((r.x - b).norm(), 1e-14 * b.norm());
}

TEST(Gmres, UnweightedMatchesDenseOracle)
{
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; trial++)
  {
    const Eigen::MatrixXcd A = random_matrix(30, rng, 1.5);
    const ComplexVector b = random_vector(30, rng);
    GmresOptions opt;
    opt.tol = 1e-12;
    const GmresResult r = weighted_gmres([&](const ComplexVector &v) { return ComplexVector(A * v); }, b, {}, opt);
    const auto ref = oracle_residuals(A, b, r.iterations);
    ASSERT_EQ(ref.size(), r.residual_history.size());
    for (std::size_t m = 0; m < ref.size(); m++)
    {
      EXPECT_NEAR(r.residual_history[m], ref[m], 1e-10 * ref[0]) << "m=" << m;
    }
    EXPECT_LE((b - A * r.x).norm(), 1e-11 * b.norm());
  }
}

TEST(Gmres, IdentityWeightEqualsUnweighted)
{
  std::mt19937_64 rng(7);
  const Eigen::MatrixXcd A = random_matrix(40, rng, 2.0);
  const ComplexVector b = random_vector(40, rng);
  const SpdFactor I = SpdFactor::identity(40);
  LinearOperator C = [&](const ComplexVector &v) { return ComplexVector(A * v); };
  const GmresResult a = weighted_gmres(C, b, {});
  const GmresResult w = weighted_gmres(C, b, [&](const ComplexVector &v) { return I.apply(v); });
  ASSERT_EQ(a.residual_history.size(), w.residual_history.size());
  for (std::size_t m = 0; m < a.residual_history.size(); m++)
    EXPECT_NEAR(a.residual_history[m], w.residual_history[m], 1e-12 * a.residual_history[0]);
}

TEST(Gmres, WeightedResidualIsOptimalAgainstRandomPolynomials)
{
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N;
  const int n = 25;
  const Eigen::MatrixXcd A = random_matrix(n, rng, 1.2);
  const SparseRealMatrix Dm = random_spd(n, rng);
  const SpdFactor D(Dm);
  const ComplexVector b = random_vector(n, rng);
  LinearOperator C = [&](const ComplexVector &v) { return ComplexVector(A * v); };
  LinearOperator W = [&](const ComplexVector &v) { return D.apply(v); };
  GmresOptions opt;
  opt.tol = 1e-10;
  const GmresResult r = weighted_gmres(C, b, W, opt);
  for (int m = 1; m <= std::min(r.iterations, 8); m++)
  {
    for (int t = 0; t < 20; t++)
    {
      // q(z) = 1 + sum_{j=1}^m c_j z^j, residual q(A) b.
      ComplexVector acc = b, p = b;
      for (int j = 1; j <= m; j++)
      {
        p = A * p;
        acc += Complex(N(rng), N(rng)) * 0.3 * p;
      }
      EXPECT_LE(r.residual_history[m], D.norm(acc) * (1 + 1e-12));
    }
  }
  for (std::size_t m = 1; m < r.residual_history.size(); m++)
    EXPECT_LE(r.residual_history[m], r.residual_history[m - 1] * (1 + 1e-14));
}

TEST(Gmres, MaxIterationsGivesUnconvergedResult)
{
  std::mt19937_64 rng(3);
  const Eigen::MatrixXcd A = random_matrix(30, rng, 0.2);
  const ComplexVector b = random_vector(30, rng);
  GmresOptions opt;
  opt.max_iter = 3;
  const GmresResult r = weighted_gmres([&](const ComplexVector &v) { return ComplexVector(A * v); }, b, {}, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_GT(r.relative_residual, opt.tol);
  opt.tol = 1.5;
  EXPECT_THROW(weighted_gmres([&](const ComplexVector &v) { return v; }, b, {}, opt), std::invalid_argument);
}

TEST(Gmres, ZeroRightHandSide)
{
  const GmresResult r = weighted_gmres([](const ComplexVector &v) { return v; }, ComplexVector::Zero(5), {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(Gmres, PreconditionedSolutionsMatchDirectSolve)
{
  const double k = 20.0;
  const C1Space s = build_space_1d(0.0, 1.0, 90);
  for (int j : {1, 2})
  {
    const WaveContext ctx = WaveContext::make(s.domain(), k, j == 1 ? Formulation::MsOneThird : Formulation::MsKSquared);
    const ExactSolution u = plane_wave(k, {1.0, 0.0}, 1);
    const AssembledSystem sys = assemble_ms(s, ctx, ProblemData::from_exact(u, k));
    const SpdFactor D(assemble_weight(s, ctx, j));
    const ComplexVector xd = direct_solve(sys.matrix, sys.rhs);
    GmresOptions opt;
    for (auto side : {PreconditionSide::Left, PreconditionSide::Right, PreconditionSide::None})
    {
      for (bool weighted : {true, false})
      {
        const GmresResult r = preconditioned_gmres(sys.matrix, sys.rhs, D, side, weighted, opt);
        EXPECT_TRUE(r.converged) << to_string(side);
        EXPECT_LE(r.relative_residual, opt.tol);
        if (side != PreconditionSide::None && weighted)
        {
          EXPECT_LE(D.norm(r.x - xd), 10.0 * opt.tol * D.norm(xd)) << to_string(side) << " weighted=" << weighted;
        }
        for (std::size_t m = 1; m < r.residual_history.size(); m++)
          EXPECT_LE(r.residual_history[m], r.residual_history[m - 1] * (1 + 1e-12));
      }
    }
  }
}
