// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_ANALYSIS_HPP
#define COHELM_ANALYSIS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cohelm/assembly.hpp"
#include "cohelm/eigen_extremes.hpp"
#include "cohelm/linalg.hpp"
#include "cohelm/mesh_space.hpp"

namespace cohelm
{

enum class NormKind
{
  L2,
  H1k,
  V1,
  V2
};

inline constexpr std::array<NormKind, 4> kAllNorms{NormKind::L2, NormKind::H1k, NormKind::V1, NormKind::V2};

inline std::string to_string(NormKind n)
{
  switch (n)
  {
    case NormKind::L2:
      return "L2";
    case NormKind::H1k:
      return "H1k";
    case NormKind::V1:
      return "V1";
    case NormKind::V2:
      return "V2";
  }
  return "unknown";
}

struct NormSet
{
  double l2 = 0.0, h1k = 0.0, v1 = 0.0, v2 = 0.0;

  double get(NormKind n) const
  {
    switch (n)
    {
      case NormKind::L2:
        return l2;
      case NormKind::H1k:
        return h1k;
      case NormKind::V1:
        return v1;
      case NormKind::V2:
        return v2;
    }
    return 0.0;
  }
};

struct ErrorReport
{
  NormSet absolute;
  NormSet relative;
  NormSet exact;
};

// Value, gradient and Laplacian of a complex field at one point.
struct FieldValue
{
  Complex value{0.0};
  std::array<Complex, 2> grad{Complex(0.0), Complex(0.0)};
  Complex lap{0.0};
};

namespace detail
{

struct SquaredTerms
{
  double vol_value = 0.0, vol_grad = 0.0, vol_lap = 0.0, vol_helm = 0.0;
  double bnd_value = 0.0, bnd_tangential = 0.0, bnd_normal = 0.0;
};

inline NormSet combine(const SquaredTerms &t, double k, double Lb)
{
  const double k2 = k * k;
  const double boundary = Lb * (k2 * t.bnd_value + t.bnd_tangential + t.bnd_normal);
  const double h1 = t.vol_grad + k2 * t.vol_value;
  NormSet n;
  n.l2 = std::sqrt(t.vol_value);
  n.h1k = std::sqrt(h1);
  n.v1 = std::sqrt(t.vol_lap / k2 + h1 + boundary);
  n.v2 = std::sqrt(t.vol_helm + h1 + boundary);
  return n;
}

// Squared terms of all four norms for a field evaluated at reference
// points of an element.
inline SquaredTerms integrate_squares(const C1Space &space, double k, int npts,
                                      const std::function<FieldValue(int, const Point &)> &field)
{
  SquaredTerms t;
  const double k2 = k * k;
  const QuadRule rule = quadrature_rule(space, npts);
  const double jac = element_measure(space);
  for (int e = 0; e < space.num_elements(); e++)
  {
    for (int q = 0; q < rule.size(); q++)
    {
      const FieldValue f = field(e, rule.points[q]);
      const double w = rule.weights[q] * jac;
      t.vol_value += w * std::norm(f.value);
      t.vol_grad += w * (std::norm(f.grad[0]) + std::norm(f.grad[1]));
      t.vol_lap += w * std::norm(f.lap);
      t.vol_helm += w * std::norm(f.lap + k2 * f.value);
    }
  }
  for (const Face &face : boundary_faces(space))
  {
    for (const auto &[ref, w] : face_points(space, face.side, rule.line))
    {
      const FieldValue f = field(face.element, ref);
      const Point &n = face.normal;
      const Complex dn = f.grad[0] * n[0] + f.grad[1] * n[1];
      const Complex tx = f.grad[0] - dn * n[0];
      const Complex ty = f.grad[1] - dn * n[1];
      t.bnd_value += w * std::norm(f.value);
      t.bnd_tangential += w * (std::norm(tx) + std::norm(ty));
      t.bnd_normal += w * std::norm(dn);
    }
  }
  return t;
}

// Discrete function sum_j c_j phi_j at a reference point of an element.
inline FieldValue discrete_field(const C1Space &space, const ComplexVector &c, int e, const Point &ref)
{
  FieldValue f;
  const auto dofs = space.local_dofs(e);
  for (int a = 0; a < space.local_count(); a++)
  {
    const BasisEval b = eval_basis(space, e, a, ref);
    const Complex ca = c[dofs[a]];
    f.value += ca * b.value;
    f.grad[0] += ca * b.grad[0];
    f.grad[1] += ca * b.grad[1];
    f.lap += ca * b.lap;
  }
  return f;
}

inline FieldValue exact_field(const ExactSolution &u, const Point &x)
{
  FieldValue f;
  f.value = u.value(x);
  f.grad = u.gradient(x);
  f.lap = u.laplacian(x);
  return f;
}

inline int norm_points(const C1Space &space, double k)
{
  return oscillatory_points(std::max(space.h(0), space.h(1)), k);
}

}  // namespace detail

//
// Norms of a discrete function with coefficient vector c.
//
inline NormSet discrete_norms(const C1Space &space, const ComplexVector &c, const WaveContext &ctx)
{
  if (c.size() != space.num_dofs())
  {
    throw std::invalid_argument("discrete_norms: coefficient vector has the wrong length");
  }
  const auto t = detail::integrate_squares(space, ctx.k, detail::norm_points(space, ctx.k),
                                           [&](int e, const Point &ref) {
                                             return detail::discrete_field(space, c, e, ref);
                                           });
  return detail::combine(t, ctx.k, ctx.norm_length);
}

//
// Norms of the exact solution. Unit plane waves use closed forms:
// ||u||^2 = |O|, k^2|O| (gradient), k^2|O| (k^-2 Laplacian), 0 (L u), and
// boundary k^2|G| (value) + k^2|G| (full gradient).
//
inline NormSet exact_norms(const C1Space &space, const ExactSolution &u, const WaveContext &ctx)
{
  const double k = ctx.k, k2 = k * k;
  if (u.plane_wave_k && std::abs(*u.plane_wave_k - k) <= 1e-14 * k)
  {
    const Domain &d = space.domain();
    const double vol = d.volume(), bnd = d.boundary_measure();
    const double boundary = ctx.norm_length * 2.0 * k2 * bnd;
    NormSet n;
    n.l2 = std::sqrt(vol);
    n.h1k = std::sqrt(2.0 * k2 * vol);
    n.v1 = std::sqrt(3.0 * k2 * vol + boundary);
    n.v2 = std::sqrt(2.0 * k2 * vol + boundary);
    return n;
  }
  const auto t = detail::integrate_squares(space, k, detail::norm_points(space, k),
                                           [&](int e, const Point &ref) {
                                             return detail::exact_field(u, space.map(e, ref));
                                           });
  return detail::combine(t, k, ctx.norm_length);
}

//
// Errors of u_h = sum c_j phi_j against the exact solution in all four norms.
//
inline ErrorReport error_norms(const C1Space &space, const ComplexVector &c, const ExactSolution &u,
                               const WaveContext &ctx)
{
  if (c.size() != space.num_dofs())
  {
    throw std::invalid_argument("error_norms: coefficient vector has the wrong length");
  }
  ErrorReport r;
  const auto t = detail::integrate_squares(space, ctx.k, detail::norm_points(space, ctx.k),
                                           [&](int e, const Point &ref) {
                                             FieldValue ex = detail::exact_field(u, space.map(e, ref));
                                             const FieldValue fh = detail::discrete_field(space, c, e, ref);
                                             ex.value -= fh.value;
                                             ex.grad[0] -= fh.grad[0];
                                             ex.grad[1] -= fh.grad[1];
                                             ex.lap -= fh.lap;
                                             return ex;
                                           });
  r.absolute = detail::combine(t, ctx.k, ctx.norm_length);
  r.exact = exact_norms(space, u, ctx);
  for (NormKind n : kAllNorms)
  {
    const double rel = r.absolute.get(n) / r.exact.get(n);
    switch (n)
    {
      case NormKind::L2:
        r.relative.l2 = rel;
        break;
      case NormKind::H1k:
        r.relative.h1k = rel;
        break;
      case NormKind::V1:
        r.relative.v1 = rel;
        break;
      case NormKind::V2:
        r.relative.v2 = rel;
        break;
    }
  }
  return r;
}

// Hermite interpolant: nodal values and derivatives of u.
inline ComplexVector interpolate(const C1Space &space, const ExactSolution &u)
{
  ComplexVector c(space.num_dofs());
  const auto &xs = space.nodes(0);
  if (space.dim() == 1)
  {
    for (std::size_t i = 0; i < xs.size(); i++)
    {
      const Point x{xs[i], 0.0};
      c[2 * i] = u.value(x);
      c[2 * i + 1] = u.gradient(x)[0];
    }
    return c;
  }
  const auto &ys = space.nodes(1);
  for (std::size_t iy = 0; iy < ys.size(); iy++)
  {
    for (std::size_t ix = 0; ix < xs.size(); ix++)
    {
      const Point x{xs[ix], ys[iy]};
      const std::size_t node = iy * xs.size() + ix;
      const auto g = u.gradient(x);
      c[4 * node] = u.value(x);
      c[4 * node + 1] = g[0];
      c[4 * node + 2] = g[1];
      c[4 * node + 3] = u.hessian(x)[1];
    }
  }
  return c;
}

// Gram matrix of a norm: M, S + k^2 M, D1 or D2.
inline SparseRealMatrix gram_matrix(const C1Space &space, const WaveContext &ctx, NormKind kind)
{
  using detail::NoKernel;
  using detail::VolumePoint;
  const double k2 = ctx.k * ctx.k;
  switch (kind)
  {
    case NormKind::L2:
      return detail::assemble_bilinear<double>(
          space, ctx.x0, [](const BasisEval &u, const BasisEval &v, const VolumePoint &) { return u.value * v.value; },
          NoKernel{});
    case NormKind::H1k:
      return detail::assemble_bilinear<double>(
          space, ctx.x0,
          [k2](const BasisEval &u, const BasisEval &v, const VolumePoint &) {
            return dot(u.grad, v.grad) + k2 * u.value * v.value;
          },
          NoKernel{});
    case NormKind::V1:
      return assemble_weight(space, ctx, 1);
    case NormKind::V2:
      return assemble_weight(space, ctx, 2);
  }
  throw std::invalid_argument("gram_matrix: unknown norm");
}

struct ProjectionResult
{
  ComplexVector coeffs;
  double gram_condition = 0.0;  // 0 when not estimated
  bool ill_conditioned = false;
};

inline constexpr double kIllConditioned = 1e12;

namespace detail
{

// Condition number of an SPD matrix: dense below the eigen limit, else
// Lanczos on G and on G^{-1}.
inline double spd_condition(const SpdFactor &G)
{
  const int n = G.size();
  if (n <= kDenseEigenLimit)
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(G.matrix()), Eigen::EigenvaluesOnly);
    const auto &ev = es.eigenvalues();
    return ev[n - 1] / ev[0];
  }
  const SpdFactor I = SpdFactor::identity(n);
  LanczosOptions opt;
  opt.tol = 1e-4;
  const double lmax = lanczos_max([&](const ComplexVector &v) { return G.apply(v); }, I, opt);
  const double inv = lanczos_max([&](const ComplexVector &v) { return G.solve(v); }, I, opt);
  return lmax * inv;
}

}  // namespace detail

//
// Best approximation of u in the given norm: solves G c = r with
// r_i = (u, phi_i) in that norm's inner product.
//
inline ProjectionResult orthogonal_projection(const C1Space &space, const ExactSolution &u, NormKind kind,
                                              const WaveContext &ctx, bool estimate_condition = true)
{
  using detail::FacePoint;
  using detail::VolumePoint;
  const double k = ctx.k, k2 = k * k, Lb = ctx.norm_length;
  const int nq = detail::norm_points(space, k);
  const bool boundary = kind == NormKind::V1 || kind == NormKind::V2;

  auto volume = [&](const BasisEval &v, const VolumePoint &p) -> Complex {
    const Complex uv = u.value(p.x);
    Complex s = uv * v.value;
    if (kind == NormKind::L2)
    {
      return s;
    }
    const auto g = u.gradient(p.x);
    s = g[0] * v.grad[0] + g[1] * v.grad[1] + k2 * uv * v.value;
    if (kind == NormKind::V1)
    {
      s += u.laplacian(p.x) * v.lap / k2;
    }
    else if (kind == NormKind::V2)
    {
      s += (u.laplacian(p.x) + k2 * uv) * (v.lap + k2 * v.value);
    }
    return s;
  };
  auto face = [&](const BasisEval &v, const FacePoint &p) -> Complex {
    if (!boundary)
    {
      return 0.0;
    }
    const auto g = u.gradient(p.x);
    const Complex dn = g[0] * p.n[0] + g[1] * p.n[1];
    const std::array<Complex, 2> tg{g[0] - dn * p.n[0], g[1] - dn * p.n[1]};
    const Point tv = tangential_gradient(v, p.n);
    return Lb * (k2 * u.value(p.x) * v.value + tg[0] * tv[0] + tg[1] * tv[1] + dn * normal_derivative(v, p.n));
  };
  const ComplexVector r = detail::assemble_load(space, ctx.x0, volume, face, nq);

  const SpdFactor G(gram_matrix(space, ctx, kind));
  ProjectionResult out;
  out.coeffs = G.solve(r);
  if (estimate_condition)
  {
    out.gram_condition = detail::spd_condition(G);
    out.ill_conditioned = out.gram_condition > kIllConditioned;
  }
  return out;
}

struct QuasiOptimality
{
  double ratio = 0.0;
  double galerkin_error = 0.0;  // ||u - u_N||_V1
  double best_error = 0.0;      // min ||u - v_N||_V1
  double gram_condition = 0.0;
  bool unreliable = false;
};

//
// C_qo = ||u - u_N||_V1 / min_{v_N} ||u - v_N||_V1 for the multiplier
// formulation in ctx.
//
inline QuasiOptimality quasi_opt_ratio(const C1Space &space, const WaveContext &ctx, const ExactSolution &u,
                                       bool estimate_condition = true)
{
  const ProblemData data = ProblemData::from_exact(u, ctx.k);
  const AssembledSystem sys = assemble_ms(space, ctx, data);
  const ComplexVector uh = direct_solve(sys.matrix, sys.rhs);
  const ProjectionResult proj = orthogonal_projection(space, u, NormKind::V1, ctx, estimate_condition);
  QuasiOptimality q;
  q.galerkin_error = error_norms(space, uh, u, ctx).absolute.v1;
  q.best_error = error_norms(space, proj.coeffs, u, ctx).absolute.v1;
  q.ratio = q.galerkin_error / q.best_error;
  q.gram_condition = proj.gram_condition;
  q.unreliable = proj.ill_conditioned || !std::isfinite(q.ratio);
  return q;
}

//
// Field-of-values constants of D^{-1} B in the D-inner product.
//
struct FovEstimate
{
  double coercivity = 0.0;  // lambda_min(Herm B, D)
  double norm_bound = 0.0;  // sqrt(lambda_max(B^* D^{-1} B, D))
  double cos_sigma = 0.0;
  double sigma = 0.0;
  double gamma_sigma = 0.0;
  double epsilon = 0.0;  // pi/2 - sigma
  bool may_contain_zero = false;
};

inline double gamma_sigma(double sigma)
{
  return 2.0 * std::sin(sigma / (4.0 - 2.0 * sigma / std::numbers::pi));
}

inline FovEstimate fov_from_bounds(double coercivity, double norm_bound)
{
  FovEstimate f;
  f.coercivity = coercivity;
  f.norm_bound = norm_bound;
  f.cos_sigma = std::clamp(coercivity / norm_bound, -1.0, 1.0);
  f.sigma = std::acos(f.cos_sigma);
  f.gamma_sigma = gamma_sigma(f.sigma);
  f.epsilon = 0.5 * std::numbers::pi - f.sigma;
  f.may_contain_zero = !(coercivity > 0.0);
  return f;
}

inline FovEstimate fov_constants(const SparseComplexMatrix &B, const SpdFactor &D, const LanczosOptions &opt = {})
{
  if (B.rows() != D.size() || B.cols() != D.size())
  {
    throw std::invalid_argument("fov_constants: dimension mismatch");
  }
  const SparseComplexMatrix H = hermitian_part(B);
  double coer;
  if (D.size() <= kDenseEigenLimit)
  {
    coer = hermitian_pencil_extremes(H, D, opt).lambda_min;
  }
  else
  {
    coer = pencil_min(H, D, opt);
  }
  return fov_from_bounds(coer, weighted_operator_norm(B, D, opt));
}

// Smallest m with (2 + 2/sqrt 3)(2 + g) g^m <= delta; empty when g >= 1.
inline std::optional<int> elman_iteration_bound(const FovEstimate &fov, double delta)
{
  if (!(delta > 0.0 && delta < 1.0))
  {
    throw std::invalid_argument("elman_iteration_bound: delta must lie in (0, 1)");
  }
  const double g = fov.gamma_sigma;
  if (!(g < 1.0) || fov.may_contain_zero)
  {
    return std::nullopt;
  }
  const double K = (2.0 + 2.0 / std::sqrt(3.0)) * (2.0 + g);
  if (g <= 0.0)
  {
    return 1;
  }
  const double m = std::ceil(std::log(delta / K) / std::log(g) - 1e-12);
  return std::max(1, static_cast<int>(m));
}

struct FitResult
{
  double exponent = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // 2-norm of the log-space residual
};

// Least-squares line through (ln k, ln value).
inline FitResult fit_growth_rate(const std::vector<double> &ks, const std::vector<double> &values)
{
  if (ks.size() != values.size() || ks.size() < 2)
  {
    throw std::invalid_argument("fit_growth_rate: need at least two (k, value) pairs");
  }
  const int n = static_cast<int>(ks.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; i++)
  {
    if (!(ks[i] > 0.0) || !(values[i] > 0.0))
    {
      throw std::invalid_argument("fit_growth_rate: data must be positive");
    }
    X(i, 0) = std::log(ks[i]);
    X(i, 1) = 1.0;
    y[i] = std::log(values[i]);
  }
  const double mean = X.col(0).mean();
  if ((X.col(0).array() - mean).abs().maxCoeff() <= 1e-14 * std::max(1.0, std::abs(mean)))
  {
    throw std::invalid_argument("fit_growth_rate: degenerate abscissae");
  }
  const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(y);
  FitResult f;
  f.exponent = beta[0];
  f.intercept = beta[1];
  f.residual = (X * beta - y).norm();
  return f;
}

struct IndefinitenessWitness
{
  double lambda_min = 0.0;  // min of Re a(v,v) / ||v||^2_{H1k}
  ComplexVector v;
};

//
// Smallest generalized eigenvalue of (S - k^2 M, S + k^2 M) with its
// eigenvector; negative values certify Re a_ST(v, v) < 0.
//
inline IndefinitenessWitness standard_form_indefiniteness(const C1Space &space, const WaveContext &ctx)
{
  const CoreMatrices C = assemble_core(space, ctx);
  const double k2 = ctx.k * ctx.k;
  const Eigen::MatrixXd A = Eigen::MatrixXd(C.S) - k2 * Eigen::MatrixXd(C.M);
  const Eigen::MatrixXd G = Eigen::MatrixXd(C.S) + k2 * Eigen::MatrixXd(C.M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, G);
  if (es.info() != Eigen::Success)
  {
    throw LinalgError("standard_form_indefiniteness: eigensolver failed");
  }
  IndefinitenessWitness w;
  w.lambda_min = es.eigenvalues()[0];
  w.v = es.eigenvectors().col(0).cast<Complex>();
  return w;
}

}  // namespace cohelm

#endif  // COHELM_ANALYSIS_HPP
