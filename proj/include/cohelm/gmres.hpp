// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_GMRES_HPP
#define COHELM_GMRES_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohelm/linalg.hpp"

namespace cohelm
{

using LinearOperator = std::function<ComplexVector(const ComplexVector &)>;

enum class PreconditionSide
{
  None,
  Left,
  Right
};

inline std::string to_string(PreconditionSide s)
{
  switch (s)
  {
    case PreconditionSide::None:
      return "none";
    case PreconditionSide::Left:
      return "left";
    case PreconditionSide::Right:
      return "right";
  }
  return "unknown";
}

inline PreconditionSide parse_precondition_side(const std::string &s)
{
  if (s == "none") return PreconditionSide::None;
  if (s == "left") return PreconditionSide::Left;
  if (s == "right") return PreconditionSide::Right;
  throw std::invalid_argument("unknown preconditioner side '" + s + "'");
}

struct GmresOptions
{
  double tol = 1e-6;  // relative residual in the weight norm
  int max_iter = 2000;
};

struct GmresResult
{
  ComplexVector x;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 1.0;
  std::vector<double> residual_history;  // ||r^m||_W, m = 0..iterations
};

//
// Full GMRES for C x = c with zero initial guess, minimizing ||c - C x||_W
// over the Krylov space. W is applied as a matrix (W v); an empty W means
// the Euclidean inner product. Weighted Arnoldi uses modified Gram-Schmidt
// with one reorthogonalization pass; W v_i is stored alongside v_i.
//
inline GmresResult weighted_gmres(const LinearOperator &C, const ComplexVector &c, const LinearOperator &W,
                                  const GmresOptions &opt = {})
{
  if (!(opt.tol > 0.0 && opt.tol < 1.0))
  {
    throw std::invalid_argument("weighted_gmres: tolerance must lie in (0, 1)");
  }
  if (opt.max_iter < 1)
  {
    throw std::invalid_argument("weighted_gmres: max_iter must be positive");
  }
  const Eigen::Index n = c.size();
  auto applyW = [&W](const ComplexVector &v) -> ComplexVector { return W ? W(v) : v; };

  GmresResult res;
  res.x = ComplexVector::Zero(n);
  ComplexVector Wr = applyW(c);
  const double beta = std::sqrt(std::max(0.0, c.dot(Wr).real()));
  res.residual_history.push_back(beta);
  if (beta == 0.0)
  {
    res.converged = true;
    res.relative_residual = 0.0;
    return res;
  }

  const int mmax = static_cast<int>(std::min<Eigen::Index>(opt.max_iter, n));
  std::vector<ComplexVector> V, WV;
  V.reserve(mmax + 1);
  WV.reserve(mmax + 1);
  V.push_back(c / beta);
  WV.push_back(Wr / beta);

  // Hessenberg columns after Givens rotations (upper triangular R).
  std::vector<std::vector<Complex>> R;
  std::vector<double> cs;
  std::vector<Complex> sn;
  std::vector<Complex> g{Complex(beta)};

  int m = 0;
  bool done = false;
  while (m < mmax && !done)
  {
    ComplexVector w = C(V[m]);
    std::vector<Complex> h(m + 2, Complex(0.0));
    for (int pass = 0; pass < 2; pass++)
    {
      for (int i = 0; i <= m; i++)
      {
        const Complex hij = WV[i].dot(w);  // <w, v_i>_W
        h[i] += hij;
        w -= hij * V[i];
      }
    }
    ComplexVector Ww = applyW(w);
    const double hnext = std::sqrt(std::max(0.0, w.dot(Ww).real()));
    h[m + 1] = hnext;

    // Apply previous rotations, then form the new one.
    for (int i = 0; i < m; i++)
    {
      const Complex t = cs[i] * h[i] + sn[i] * h[i + 1];
      h[i + 1] = -std::conj(sn[i]) * h[i] + cs[i] * h[i + 1];
      h[i] = t;
    }
    const double a = std::abs(h[m]);
    const double r = std::hypot(a, hnext);
    double cm;
    Complex sm;
    if (r == 0.0)
    {
      cm = 1.0;
      sm = 0.0;
    }
    else if (a == 0.0)
    {
      cm = 0.0;
      sm = 1.0;
    }
    else
    {
      cm = a / r;
      sm = (h[m] / a) * hnext / r;
    }
    // Rotation [c s; -conj(s) c] maps (h_m, h_{m+1}) to (rho, 0).
    if (r != 0.0 && a != 0.0)
    {
      h[m] = (h[m] / a) * r;
    }
    else if (a == 0.0)
    {
      h[m] = hnext;
    }
    h[m + 1] = 0.0;
    cs.push_back(cm);
    sn.push_back(sm);
    g.push_back(-std::conj(sm) * g[m]);
    g[m] = cm * g[m];
    h.resize(m + 1);
    R.push_back(std::move(h));
    m++;

    const double resid = std::abs(g[m]);
    res.residual_history.push_back(resid);
    const bool breakdown = hnext <= 1e-14 * beta || !std::isfinite(hnext);
    if (resid <= opt.tol * beta || breakdown)
    {
      done = true;
    }
    else
    {
      V.push_back(w / hnext);
      WV.push_back(Ww / hnext);
    }
  }

  // Back substitution R y = g.
  std::vector<Complex> y(m);
  for (int i = m - 1; i >= 0; i--)
  {
    Complex s = g[i];
    for (int j = i + 1; j < m; j++)
    {
      s -= R[j][i] * y[j];
    }
    y[i] = s / R[i][i];
  }
  for (int i = 0; i < m; i++)
  {
    res.x += y[i] * V[i];
  }
  res.iterations = m;
  res.relative_residual = res.residual_history.back() / beta;
  res.converged = done;
  return res;
}

//
// Preconditioned solve of B x = b with the SPD weight D:
//   left:  C = D^{-1} B, c = D^{-1} b, weight D
//   right: C = B D^{-1}, weight D^{-1}, x = D^{-1} y
//   none:  C = B, weight D
// With weighted = false the Euclidean inner product is used instead.
//
inline GmresResult preconditioned_gmres(const SparseComplexMatrix &B, const ComplexVector &b, const SpdFactor &D,
                                        PreconditionSide side, bool weighted, const GmresOptions &opt = {})
{
  if (B.rows() != b.size() || D.size() != b.size())
  {
    throw std::invalid_argument("preconditioned_gmres: dimension mismatch");
  }
  switch (side)
  {
    case PreconditionSide::Left:
    {
      LinearOperator C = [&](const ComplexVector &v) { return D.solve(B * v); };
      LinearOperator W;
      if (weighted) W = [&](const ComplexVector &v) { return D.apply(v); };
      return weighted_gmres(C, D.solve(b), W, opt);
    }
    case PreconditionSide::Right:
    {
      LinearOperator C = [&](const ComplexVector &v) { return ComplexVector(B * D.solve(v)); };
      LinearOperator W;
      if (weighted) W = [&](const ComplexVector &v) { return D.solve(v); };
      GmresResult r = weighted_gmres(C, b, W, opt);
      r.x = D.solve(r.x);
      return r;
    }
    case PreconditionSide::None:
    default:
    {
      LinearOperator C = [&](const ComplexVector &v) { return ComplexVector(B * v); };
      LinearOperator W;
      if (weighted) W = [&](const ComplexVector &v) { return D.apply(v); };
      return weighted_gmres(C, b, W, opt);
    }
  }
}

}  // namespace cohelm

#endif  // COHELM_GMRES_HPP
