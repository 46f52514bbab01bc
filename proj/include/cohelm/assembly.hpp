// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_ASSEMBLY_HPP
#define COHELM_ASSEMBLY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cohelm/linalg.hpp"
#include "cohelm/mesh_space.hpp"

namespace cohelm
{

//
// Problem description
//

enum class Formulation
{
  Standard,
  LeastSquares,
  MsOneThird,  // multiplier formulation, A = 1/3
  MsKSquared,  // multiplier formulation, A = k^2
};

inline std::string to_string(Formulation f)
{
  switch (f)
  {
    case Formulation::Standard:
      return "standard";
    case Formulation::LeastSquares:
      return "ls";
    case Formulation::MsOneThird:
      return "ms_A_third";
    case Formulation::MsKSquared:
      return "ms_A_ksq";
  }
  return "unknown";
}

inline Formulation parse_formulation(const std::string &s)
{
  if (s == "standard") return Formulation::Standard;
  if (s == "ls") return Formulation::LeastSquares;
  if (s == "ms_A_third") return Formulation::MsOneThird;
  if (s == "ms_A_ksq") return Formulation::MsKSquared;
  throw std::invalid_argument("unknown formulation '" + s + "'");
}

// Weight A of the least-squares term (A / k^2) L u L v.
class LsqWeight
{
public:
  enum class Kind
  {
    OneThird,
    KSquared,
    Custom
  };

  static LsqWeight one_third() { return LsqWeight(Kind::OneThird, 1.0 / 3.0); }
  static LsqWeight k_squared() { return LsqWeight(Kind::KSquared, 0.0); }
  static LsqWeight custom(double A) { return LsqWeight(Kind::Custom, A); }

  Kind kind() const { return kind_; }
  double value(double k) const
  {
    switch (kind_)
    {
      case Kind::OneThird:
        return 1.0 / 3.0;
      case Kind::KSquared:
        return k * k;
      case Kind::Custom:
        return custom_;
    }
    return custom_;
  }

private:
  LsqWeight(Kind kind, double v) : kind_(kind), custom_(v) {}
  Kind kind_;
  double custom_;
};

// Smallest beta for which the multiplier formulation is coercive:
// beta >= (L/2)(1 + 4/gamma + gamma/2).
inline double beta_threshold(const Domain &domain)
{
  const double g = domain.gamma();
  return 0.5 * domain.length_scale() * (1.0 + 4.0 / g + 0.5 * g);
}

struct WaveContext
{
  double k = 1.0;
  double beta = 0.0;
  LsqWeight A = LsqWeight::one_third();
  Point x0{0.0, 0.0};
  double norm_length = 1.0;  // weight L of the boundary terms in the V-norms
  Formulation formulation = Formulation::MsOneThird;

  // Defaults: x0 = domain center, beta at the coercivity threshold, L the
  // domain length scale, A chosen by the formulation tag.
  static WaveContext make(const Domain &domain, double k,
                          Formulation formulation = Formulation::MsOneThird)
  {
    WaveContext ctx;
    ctx.k = k;
    ctx.beta = beta_threshold(domain);
    ctx.x0 = domain.center();
    ctx.norm_length = domain.length_scale();
    ctx.formulation = formulation;
    ctx.A = formulation == Formulation::MsKSquared ? LsqWeight::k_squared() : LsqWeight::one_third();
    ctx.validate();
    return ctx;
  }

  double a_value() const { return A.value(k); }

  void validate() const
  {
    if (!(k > 0.0) || !std::isfinite(k))
    {
      throw std::invalid_argument("WaveContext: k must be positive");
    }
    if (!(norm_length > 0.0))
    {
      throw std::invalid_argument("WaveContext: norm length must be positive");
    }
  }

  // beta >= threshold and beta <= c_upper L.
  bool coercivity_admissible(const Domain &domain, double c_upper = 10.0) const
  {
    return beta >= beta_threshold(domain) * (1.0 - 1e-12) &&
           beta <= c_upper * domain.length_scale();
  }
};

//
// Closed-form solution u with its gradient and Hessian (xx, xy, yy).
//
struct ExactSolution
{
  std::function<Complex(const Point &)> value;
  std::function<std::array<Complex, 2>(const Point &)> gradient;
  std::function<std::array<Complex, 3>(const Point &)> hessian;

  // Set for unit-modulus plane waves exp(i k a.x), whose norms are known
  // in closed form.
  std::optional<double> plane_wave_k;

  Complex laplacian(const Point &x) const
  {
    const auto H = hessian(x);
    return H[0] + H[2];
  }
};

inline Point normalized(Point a, int dim)
{
  if (dim == 1)
  {
    a[1] = 0.0;
  }
  const double n = std::hypot(a[0], a[1]);
  if (!(n > 0.0))
  {
    throw std::invalid_argument("direction must be nonzero");
  }
  return {a[0] / n, a[1] / n};
}

// u(x) = exp(i k a.x), |a| = 1.
inline ExactSolution plane_wave(double k, Point direction, int dim)
{
  const Point a = normalized(direction, dim);
  ExactSolution u;
  u.value = [k, a](const Point &x) { return std::exp(kI * k * dot(a, x)); };
  u.gradient = [k, a](const Point &x) {
    const Complex e = kI * k * std::exp(kI * k * dot(a, x));
    return std::array<Complex, 2>{a[0] * e, a[1] * e};
  };
  u.hessian = [k, a](const Point &x) {
    const Complex e = -k * k * std::exp(kI * k * dot(a, x));
    return std::array<Complex, 3>{a[0] * a[0] * e, a[0] * a[1] * e, a[1] * a[1] * e};
  };
  u.plane_wave_k = k;
  return u;
}

// u(x) = (1 + a.x) exp(i k a.x); L u = 2 i k exp(i k a.x) != 0.
inline ExactSolution modulated_plane_wave(double k, Point direction, int dim)
{
  const Point a = normalized(direction, dim);
  ExactSolution u;
  u.value = [k, a](const Point &x) {
    const double s = dot(a, x);
    return (1.0 + s) * std::exp(kI * k * s);
  };
  u.gradient = [k, a](const Point &x) {
    const double s = dot(a, x);
    const Complex d = std::exp(kI * k * s) * (1.0 + kI * k * (1.0 + s));
    return std::array<Complex, 2>{a[0] * d, a[1] * d};
  };
  u.hessian = [k, a](const Point &x) {
    const double s = dot(a, x);
    const Complex d2 = std::exp(kI * k * s) * (2.0 * kI * k - k * k * (1.0 + s));
    return std::array<Complex, 3>{a[0] * a[0] * d2, a[0] * a[1] * d2, a[1] * a[1] * d2};
  };
  return u;
}

//
// Data of the impedance problem: L u = -f in the domain,
// du/dn - i k u = g on the boundary.
//
struct ProblemData
{
  std::function<Complex(const Point &)> f;
  std::function<Complex(const Point &, const Point &)> g;  // (x, outward normal)
  bool zero_source = false;

  static ProblemData zero()
  {
    ProblemData d;
    d.f = [](const Point &) { return Complex(0.0); };
    d.g = [](const Point &, const Point &) { return Complex(0.0); };
    d.zero_source = true;
    return d;
  }

  // Data generated by a manufactured solution; plane waves have f = 0.
  static ProblemData from_exact(const ExactSolution &u, double k)
  {
    ProblemData d;
    if (u.plane_wave_k && std::abs(*u.plane_wave_k - k) <= 1e-14 * k)
    {
      d.f = [](const Point &) { return Complex(0.0); };
      d.zero_source = true;
    }
    else
    {
      d.f = [u, k](const Point &x) { return -(u.laplacian(x) + k * k * u.value(x)); };
    }
    d.g = [u, k](const Point &x, const Point &n) {
      const auto gr = u.gradient(x);
      return gr[0] * n[0] + gr[1] * n[1] - kI * k * u.value(x);
    };
    return d;
  }
};

struct CoreMatrices
{
  SparseRealMatrix S;         // grad . grad
  SparseRealMatrix M;         // mass
  SparseRealMatrix N0;        // boundary mass
  SparseRealMatrix N1;        // boundary tangential stiffness (no entries in 1-d)
  SparseRealMatrix N2;        // boundary normal-derivative mass
  SparseRealMatrix L1;        // Laplacian . Laplacian
  SparseRealMatrix L2;        // (Lap + k^2)(Lap + k^2)
  SparseRealMatrix lap_mass;  // (Lap phi_i phi_j + phi_i Lap phi_j) / 2
};

struct AssembledSystem
{
  SparseComplexMatrix matrix;
  ComplexVector rhs;
  WaveContext ctx;
};

namespace detail
{

struct VolumePoint
{
  Point x;  // physical coordinates
  Point y;  // x - x0
  double w;
};

struct FacePoint
{
  Point x;
  Point y;
  Point n;
  double w;
};

struct NoKernel
{
};

// Entries couple DOFs at nodes at most one element apart in every direction.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> sparsity_pattern(const C1Space &space)
{
  const int N = space.num_dofs();
  Eigen::SparseMatrix<Scalar> A(N, N);
  const int nnx = space.elements(0) + 1;
  const int nny = space.dim() == 2 ? space.elements(1) + 1 : 1;
  const int per_node = space.dofs_per_node();
  Eigen::VectorXi counts(N);
  for (int col = 0; col < N; col++)
  {
    const int node = col / per_node;
    const int ix = node % nnx, iy = node / nnx;
    const int cx = std::min(ix + 1, nnx - 1) - std::max(ix - 1, 0) + 1;
    const int cy = std::min(iy + 1, nny - 1) - std::max(iy - 1, 0) + 1;
    counts[col] = cx * cy * per_node;
  }
  A.reserve(counts);
  for (int col = 0; col < N; col++)
  {
    const int node = col / per_node;
    const int ix = node % nnx, iy = node / nnx;
    for (int jy = std::max(iy - 1, 0); jy <= std::min(iy + 1, nny - 1); jy++)
    {
      for (int jx = std::max(ix - 1, 0); jx <= std::min(ix + 1, nnx - 1); jx++)
      {
        for (int c = 0; c < per_node; c++)
        {
          A.insert(per_node * (jy * nnx + jx) + c, col) = Scalar(0);
        }
      }
    }
  }
  A.makeCompressed();
  return A;
}

template <typename Scalar>
void scatter(Eigen::SparseMatrix<Scalar> &A, const std::vector<int> &dofs,
             const std::vector<Scalar> &local)
{
  const int n = static_cast<int>(dofs.size());
  const int *outer = A.outerIndexPtr();
  const int *inner = A.innerIndexPtr();
  Scalar *values = A.valuePtr();
  for (int b = 0; b < n; b++)
  {
    const int col = dofs[b];
    const int *begin = inner + outer[col];
    const int *end = inner + outer[col + 1];
    for (int a = 0; a < n; a++)
    {
      const int *pos = std::lower_bound(begin, end, dofs[a]);
      values[pos - inner] += local[a * n + b];
    }
  }
}

// Basis table on the reference element; identical for every element of a
// uniform mesh.
inline std::vector<BasisEval> volume_table(const C1Space &space, const QuadRule &rule)
{
  const int nl = space.local_count();
  std::vector<BasisEval> table(rule.size() * nl);
  for (int q = 0; q < rule.size(); q++)
  {
    for (int a = 0; a < nl; a++)
    {
      table[q * nl + a] = eval_basis(space, 0, a, rule.points[q]);
    }
  }
  return table;
}

struct FaceTable
{
  std::vector<std::pair<Point, double>> points;
  std::vector<BasisEval> evals;
};

inline std::array<FaceTable, 4> face_tables(const C1Space &space, const LineRule &line)
{
  std::array<FaceTable, 4> tables;
  const int nl = space.local_count();
  const int nsides = space.dim() == 1 ? 2 : 4;
  for (int side = 0; side < nsides; side++)
  {
    tables[side].points = face_points(space, side, line);
    for (const auto &[ref, w] : tables[side].points)
    {
      for (int a = 0; a < nl; a++)
      {
        tables[side].evals.push_back(eval_basis(space, 0, a, ref));
      }
    }
  }
  return tables;
}

inline double element_measure(const C1Space &space)
{
  return space.dim() == 1 ? space.h(0) : space.h(0) * space.h(1);
}

inline Point shifted(const Point &x, const Point &x0, int dim)
{
  return {x[0] - x0[0], dim == 2 ? x[1] - x0[1] : 0.0};
}

//
// Generic bilinear-form assembly. Entry (i, j) accumulates
// kernel(trial = phi_j, test = phi_i, point) over elements and faces.
//
template <typename Scalar, typename VolumeKernel, typename FaceKernel>
Eigen::SparseMatrix<Scalar> assemble_bilinear(const C1Space &space, const Point &x0,
                                              VolumeKernel &&volume, FaceKernel &&face,
                                              int npts = kAssemblyPoints)
{
  auto A = sparsity_pattern<Scalar>(space);
  const int nl = space.local_count();
  const int dim = space.dim();
  const QuadRule rule = quadrature_rule(space, npts);
  std::vector<Scalar> local(nl * nl);

  if constexpr (!std::is_same_v<std::decay_t<VolumeKernel>, NoKernel>)
  {
    const auto table = volume_table(space, rule);
    const double jac = element_measure(space);
    for (int e = 0; e < space.num_elements(); e++)
    {
      std::fill(local.begin(), local.end(), Scalar(0));
      for (int q = 0; q < rule.size(); q++)
      {
        VolumePoint p;
        p.x = space.map(e, rule.points[q]);
        p.y = shifted(p.x, x0, dim);
        p.w = rule.weights[q] * jac;
        const BasisEval *ev = &table[q * nl];
        for (int a = 0; a < nl; a++)
        {
          for (int b = 0; b < nl; b++)
          {
            local[a * nl + b] += p.w * volume(ev[b], ev[a], p);
          }
        }
      }
      scatter(A, space.local_dofs(e), local);
    }
  }

  if constexpr (!std::is_same_v<std::decay_t<FaceKernel>, NoKernel>)
  {
    const auto tables = face_tables(space, rule.line);
    for (const Face &f : boundary_faces(space))
    {
      std::fill(local.begin(), local.end(), Scalar(0));
      const FaceTable &t = tables[f.side];
      for (std::size_t q = 0; q < t.points.size(); q++)
      {
        FacePoint p;
        p.x = space.map(f.element, t.points[q].first);
        p.y = shifted(p.x, x0, dim);
        p.n = f.normal;
        p.w = t.points[q].second;
        const BasisEval *ev = &t.evals[q * nl];
        for (int a = 0; a < nl; a++)
        {
          for (int b = 0; b < nl; b++)
          {
            local[a * nl + b] += p.w * face(ev[b], ev[a], p);
          }
        }
      }
      scatter(A, space.local_dofs(f.element), local);
    }
  }
  return A;
}

// Load vector: entry i accumulates kernel(test = phi_i, point).
template <typename VolumeKernel, typename FaceKernel>
ComplexVector assemble_load(const C1Space &space, const Point &x0, VolumeKernel &&volume,
                            FaceKernel &&face, int npts)
{
  ComplexVector F = ComplexVector::Zero(space.num_dofs());
  const int nl = space.local_count();
  const int dim = space.dim();
  const QuadRule rule = quadrature_rule(space, npts);

  if constexpr (!std::is_same_v<std::decay_t<VolumeKernel>, NoKernel>)
  {
    const auto table = volume_table(space, rule);
    const double jac = element_measure(space);
    for (int e = 0; e < space.num_elements(); e++)
    {
      const auto dofs = space.local_dofs(e);
      for (int q = 0; q < rule.size(); q++)
      {
        VolumePoint p;
        p.x = space.map(e, rule.points[q]);
        p.y = shifted(p.x, x0, dim);
        p.w = rule.weights[q] * jac;
        for (int a = 0; a < nl; a++)
        {
          F[dofs[a]] += p.w * volume(table[q * nl + a], p);
        }
      }
    }
  }

  if constexpr (!std::is_same_v<std::decay_t<FaceKernel>, NoKernel>)
  {
    const auto tables = face_tables(space, rule.line);
    for (const Face &f : boundary_faces(space))
    {
      const auto dofs = space.local_dofs(f.element);
      const FaceTable &t = tables[f.side];
      for (std::size_t q = 0; q < t.points.size(); q++)
      {
        FacePoint p;
        p.x = space.map(f.element, t.points[q].first);
        p.y = shifted(p.x, x0, dim);
        p.n = f.normal;
        p.w = t.points[q].second;
        for (int a = 0; a < nl; a++)
        {
          F[dofs[a]] += p.w * face(t.evals[q * nl + a], p);
        }
      }
    }
  }
  return F;
}

// Points per direction for data integrals (f and g may oscillate like k).
inline int data_points(const C1Space &space, double k)
{
  return std::max(kAssemblyPoints, oscillatory_points(std::max(space.h(0), space.h(1)), k, 8));
}

inline void check_context(const C1Space &space, const WaveContext &ctx)
{
  ctx.validate();
  (void)space;
}

inline double helmholtz(const BasisEval &e, double k2) { return e.lap + k2 * e.value; }

}  // namespace detail

//
// Real symmetric building blocks.
//
inline CoreMatrices assemble_core(const C1Space &space, const WaveContext &ctx)
{
  using detail::FacePoint;
  using detail::NoKernel;
  using detail::VolumePoint;
  detail::check_context(space, ctx);
  const double k2 = ctx.k * ctx.k;
  const Point &x0 = ctx.x0;
  CoreMatrices C;
  C.S = detail::assemble_bilinear<double>(
      space, x0, [](const BasisEval &u, const BasisEval &v, const VolumePoint &) { return dot(u.grad, v.grad); },
      NoKernel{});
  C.M = detail::assemble_bilinear<double>(
      space, x0, [](const BasisEval &u, const BasisEval &v, const VolumePoint &) { return u.value * v.value; },
      NoKernel{});
  C.N0 = detail::assemble_bilinear<double>(
      space, x0, NoKernel{},
      [](const BasisEval &u, const BasisEval &v, const FacePoint &) { return u.value * v.value; });
  if (space.dim() == 2)
  {
    C.N1 = detail::assemble_bilinear<double>(
        space, x0, NoKernel{}, [](const BasisEval &u, const BasisEval &v, const FacePoint &p) {
          return dot(tangential_gradient(u, p.n), tangential_gradient(v, p.n));
        });
  }
  else
  {
    C.N1 = SparseRealMatrix(space.num_dofs(), space.num_dofs());
  }
  C.N2 = detail::assemble_bilinear<double>(
      space, x0, NoKernel{}, [](const BasisEval &u, const BasisEval &v, const FacePoint &p) {
        return normal_derivative(u, p.n) * normal_derivative(v, p.n);
      });
  C.L1 = detail::assemble_bilinear<double>(
      space, x0, [](const BasisEval &u, const BasisEval &v, const VolumePoint &) { return u.lap * v.lap; },
      NoKernel{});
  C.L2 = detail::assemble_bilinear<double>(
      space, x0,
      [k2](const BasisEval &u, const BasisEval &v, const VolumePoint &) {
        return detail::helmholtz(u, k2) * detail::helmholtz(v, k2);
      },
      NoKernel{});
  C.lap_mass = detail::assemble_bilinear<double>(
      space, x0,
      [](const BasisEval &u, const BasisEval &v, const VolumePoint &) {
        return 0.5 * (u.lap * v.value + u.value * v.lap);
      },
      NoKernel{});
  return C;
}

//
// Weight matrices of the V1 (variant 1) and V2 (variant 2) norms:
//   D1 = k^-2 L1 + S + k^2 M + L (k^2 N0 + N1 + N2)
//   D2 = L2      + S + k^2 M + L (k^2 N0 + N1 + N2)
// with L = ctx.norm_length.
//
inline SparseRealMatrix assemble_weight(const C1Space &space, const WaveContext &ctx, int variant)
{
  using detail::FacePoint;
  using detail::VolumePoint;
  if (variant != 1 && variant != 2)
  {
    throw std::invalid_argument("assemble_weight: variant must be 1 or 2");
  }
  detail::check_context(space, ctx);
  const double k2 = ctx.k * ctx.k;
  const double Lb = ctx.norm_length;
  auto volume = [k2, variant](const BasisEval &u, const BasisEval &v, const VolumePoint &) {
    const double second = variant == 1 ? u.lap * v.lap / k2
                                       : detail::helmholtz(u, k2) * detail::helmholtz(v, k2);
    return second + dot(u.grad, v.grad) + k2 * u.value * v.value;
  };
  auto face = [k2, Lb](const BasisEval &u, const BasisEval &v, const FacePoint &p) {
    return Lb * (k2 * u.value * v.value +
                 dot(tangential_gradient(u, p.n), tangential_gradient(v, p.n)) +
                 normal_derivative(u, p.n) * normal_derivative(v, p.n));
  };
  return detail::assemble_bilinear<double>(space, ctx.x0, volume, face);
}

//
// Standard H1 formulation: S - k^2 M - i k N0, RHS_i = (f, phi_i) + (g, phi_i)_Gamma.
//
inline AssembledSystem assemble_standard(const C1Space &space, const WaveContext &ctx,
                                         const ProblemData &data)
{
  using detail::FacePoint;
  using detail::NoKernel;
  using detail::VolumePoint;
  detail::check_context(space, ctx);
  const double k = ctx.k;
  const auto S = detail::assemble_bilinear<double>(
      space, ctx.x0, [](const BasisEval &u, const BasisEval &v, const VolumePoint &) { return dot(u.grad, v.grad); },
      NoKernel{});
  const auto M = detail::assemble_bilinear<double>(
      space, ctx.x0, [](const BasisEval &u, const BasisEval &v, const VolumePoint &) { return u.value * v.value; },
      NoKernel{});
  const auto N0 = detail::assemble_bilinear<double>(
      space, ctx.x0, NoKernel{},
      [](const BasisEval &u, const BasisEval &v, const FacePoint &) { return u.value * v.value; });

  AssembledSystem sys;
  sys.ctx = ctx;
  sys.ctx.formulation = Formulation::Standard;
  sys.matrix = to_complex(S) - Complex(k * k) * to_complex(M) - kI * k * to_complex(N0);
  const int nq = detail::data_points(space, k);
  auto face = [&data](const BasisEval &v, const FacePoint &p) { return data.g(p.x, p.n) * v.value; };
  if (data.zero_source)
  {
    sys.rhs = detail::assemble_load(space, ctx.x0, NoKernel{}, face, nq);
  }
  else
  {
    sys.rhs = detail::assemble_load(
        space, ctx.x0, [&data](const BasisEval &v, const VolumePoint &p) { return data.f(p.x) * v.value; },
        face, nq);
  }
  return sys;
}

//
// Least-squares formulation:
//   a(u, v) = (L u, L v) + (du/dn - i k u, dv/dn - i k v)_Gamma
//   F(v)    = (-f, L v) + (g, dv/dn - i k v)_Gamma
// Hermitian positive semidefinite.
//
inline AssembledSystem assemble_ls(const C1Space &space, const WaveContext &ctx,
                                   const ProblemData &data)
{
  using detail::FacePoint;
  using detail::NoKernel;
  using detail::VolumePoint;
  detail::check_context(space, ctx);
  const double k = ctx.k, k2 = k * k;
  AssembledSystem sys;
  sys.ctx = ctx;
  sys.ctx.formulation = Formulation::LeastSquares;
  sys.matrix = detail::assemble_bilinear<Complex>(
      space, ctx.x0,
      [k2](const BasisEval &u, const BasisEval &v, const VolumePoint &) {
        return Complex(detail::helmholtz(u, k2) * detail::helmholtz(v, k2));
      },
      [k](const BasisEval &u, const BasisEval &v, const FacePoint &p) {
        // conj(dv/dn - i k v) = dv/dn + i k v for real v
        return (normal_derivative(u, p.n) - kI * k * u.value) *
               (normal_derivative(v, p.n) + kI * k * v.value);
      });
  const int nq = detail::data_points(space, k);
  auto face = [&data, k](const BasisEval &v, const FacePoint &p) {
    return data.g(p.x, p.n) * (normal_derivative(v, p.n) + kI * k * v.value);
  };
  if (data.zero_source)
  {
    sys.rhs = detail::assemble_load(space, ctx.x0, NoKernel{}, face, nq);
  }
  else
  {
    sys.rhs = detail::assemble_load(
        space, ctx.x0,
        [&data, k2](const BasisEval &v, const VolumePoint &p) {
          return -data.f(p.x) * detail::helmholtz(v, k2);
        },
        face, nq);
  }
  return sys;
}

namespace detail
{

// Sesquilinear form b_Z in shifted coordinates y = x - x0 (trial u, test v,
// both real basis functions so conj acts only on the coefficients):
//   vol:  (2 - d + Z1 + Z2) grad u.grad v + (d - Z1 - Z2) k^2 u v
//         + (y.grad u + Z2 u + (A/k^2) L u) L v
//   face: -[ i k u (y.grad v + Z1 v) + (y.grad_G u + Z2 u) dv/dn
//            + (y.n)(k^2 u v - grad_G u . grad_G v) ]
struct BzKernel
{
  double k, A;
  int d;
  Complex Z1, Z2;

  Complex volume(const BasisEval &u, const BasisEval &v, const VolumePoint &p) const
  {
    const double k2 = k * k;
    return (2.0 - d + Z1 + Z2) * dot(u.grad, v.grad) + (double(d) - Z1 - Z2) * k2 * u.value * v.value +
           (dot(p.y, u.grad) + Z2 * u.value + (A / k2) * helmholtz(u, k2)) * helmholtz(v, k2);
  }

  Complex face(const BasisEval &u, const BasisEval &v, const FacePoint &p) const
  {
    const double k2 = k * k;
    const Point tu = tangential_gradient(u, p.n);
    const Point tv = tangential_gradient(v, p.n);
    return -(kI * k * u.value * (dot(p.y, v.grad) + Z1 * v.value) +
             (dot(p.y, tu) + Z2 * u.value) * normal_derivative(v, p.n) +
             dot(p.y, p.n) * (k2 * u.value * v.value - dot(tu, tv)));
  }
};

// G_Z(v) = ((y.grad v + conj-free Z1 v) - (A/k^2) L v, f) + (y.grad v + Z1 v, g)_Gamma
// with the coefficient conventions of BzKernel.
inline ComplexVector bz_load(const C1Space &space, const WaveContext &ctx, double A, Complex Z1,
                             const ProblemData &data)
{
  const double k = ctx.k, k2 = k * k;
  const int nq = data_points(space, k);
  auto face = [&data, Z1](const BasisEval &v, const FacePoint &p) {
    return (dot(p.y, v.grad) + Z1 * v.value) * data.g(p.x, p.n);
  };
  if (data.zero_source)
  {
    return assemble_load(space, ctx.x0, NoKernel{}, face, nq);
  }
  return assemble_load(
      space, ctx.x0,
      [&data, Z1, A, k2](const BasisEval &v, const VolumePoint &p) {
        return (dot(p.y, v.grad) + Z1 * v.value - (A / k2) * helmholtz(v, k2)) * data.f(p.x);
      },
      face, nq);
}

// One-dimensional form of the multiplier formulation on (x_-1, x_1):
//   vol:  u'v' + k^2 u v + ((x-x0)u' - i k beta u + A k^-2 u'' + A u)(v'' + k^2 v)
//   end:  -[ i k (x-x0) u v' - k^2 beta u v - i k beta u v' xi + (x-x0) xi k^2 u v ]
struct Ms1dKernel
{
  double k, A, beta;

  Complex volume(const BasisEval &u, const BasisEval &v, const VolumePoint &p) const
  {
    const double k2 = k * k;
    const double du = u.grad[0], dv = v.grad[0];
    return du * dv + k2 * u.value * v.value +
           (p.y[0] * du - kI * k * beta * u.value + A / k2 * u.dxx + A * u.value) * (v.dxx + k2 * v.value);
  }

  Complex face(const BasisEval &u, const BasisEval &v, const FacePoint &p) const
  {
    const double k2 = k * k;
    const double xi = p.n[0];
    const double y = p.y[0];
    const double dv = v.grad[0];
    return -(kI * k * y * u.value * dv - k2 * beta * u.value * v.value -
             kI * k * beta * u.value * dv * xi + y * xi * k2 * u.value * v.value);
  }
};

}  // namespace detail

//
// General b_Z family with complex parameters Z1, Z2.
//
inline AssembledSystem assemble_bz(const C1Space &space, const WaveContext &ctx, Complex Z1,
                                   Complex Z2, const ProblemData &data)
{
  using detail::FacePoint;
  using detail::VolumePoint;
  detail::check_context(space, ctx);
  const detail::BzKernel kern{ctx.k, ctx.a_value(), space.dim(), Z1, Z2};
  AssembledSystem sys;
  sys.ctx = ctx;
  sys.matrix = detail::assemble_bilinear<Complex>(
      space, ctx.x0,
      [&kern](const BasisEval &u, const BasisEval &v, const VolumePoint &p) { return kern.volume(u, v, p); },
      [&kern](const BasisEval &u, const BasisEval &v, const FacePoint &p) { return kern.face(u, v, p); });
  sys.rhs = detail::bz_load(space, ctx, ctx.a_value(), Z1, data);
  return sys;
}

// Multiplier parameters of the coercive formulation: Z1 = conj(Z2) = (d-1)/2 + i k beta.
inline std::pair<Complex, Complex> ms_parameters(int dim, const WaveContext &ctx)
{
  const Complex Z1 = 0.5 * (dim - 1) + kI * ctx.k * ctx.beta;
  return {Z1, std::conj(Z1)};
}

//
// Coercive multiplier formulation with B_ij = b(phi_j, phi_i), g_i = G(phi_i).
// In 1-d the explicit one-dimensional form is assembled.
//
inline AssembledSystem assemble_ms(const C1Space &space, const WaveContext &ctx,
                                   const ProblemData &data, bool require_coercive = false)
{
  using detail::FacePoint;
  using detail::VolumePoint;
  detail::check_context(space, ctx);
  if (require_coercive && ctx.beta < beta_threshold(space.domain()) * (1.0 - 1e-12))
  {
    throw std::invalid_argument("assemble_ms: beta below the coercivity threshold");
  }
  if (space.dim() == 2)
  {
    const auto [Z1, Z2] = ms_parameters(2, ctx);
    return assemble_bz(space, ctx, Z1, Z2, data);
  }
  const double k = ctx.k, k2 = k * k, A = ctx.a_value(), beta = ctx.beta;
  const detail::Ms1dKernel kern{k, A, beta};
  AssembledSystem sys;
  sys.ctx = ctx;
  sys.matrix = detail::assemble_bilinear<Complex>(
      space, ctx.x0,
      [&kern](const BasisEval &u, const BasisEval &v, const VolumePoint &p) { return kern.volume(u, v, p); },
      [&kern](const BasisEval &u, const BasisEval &v, const FacePoint &p) { return kern.face(u, v, p); });
  const int nq = detail::data_points(space, k);
  auto face = [&data, k, beta](const BasisEval &v, const FacePoint &p) {
    return (p.y[0] * v.grad[0] + kI * k * beta * v.value) * data.g(p.x, p.n);
  };
  if (data.zero_source)
  {
    sys.rhs = detail::assemble_load(space, ctx.x0, detail::NoKernel{}, face, nq);
  }
  else
  {
    sys.rhs = detail::assemble_load(
        space, ctx.x0,
        [&data, k, k2, A, beta](const BasisEval &v, const VolumePoint &p) {
          const Complex f = data.f(p.x);
          return p.y[0] * f * v.grad[0] + (kI * k * beta - A) * f * v.value - A / k2 * f * v.dxx;
        },
        face, nq);
  }
  return sys;
}

// Multiplier formulation assembled through the general d-dimensional
// kernel, regardless of dimension.
inline AssembledSystem assemble_ms_general(const C1Space &space, const WaveContext &ctx,
                                           const ProblemData &data)
{
  const auto [Z1, Z2] = ms_parameters(space.dim(), ctx);
  return assemble_bz(space, ctx, Z1, Z2, data);
}

//
// a0(u, v) = (grad u, grad v) - k^2 (u, v) + (u, L v) - (u, dv/dn)_Gamma,
// identically zero on C1 functions.
//
inline SparseComplexMatrix assemble_a0(const C1Space &space, const WaveContext &ctx)
{
  using detail::FacePoint;
  using detail::VolumePoint;
  const double k2 = ctx.k * ctx.k;
  return detail::assemble_bilinear<Complex>(
      space, ctx.x0,
      [k2](const BasisEval &u, const BasisEval &v, const VolumePoint &) {
        return Complex(dot(u.grad, v.grad) - k2 * u.value * v.value + u.value * detail::helmholtz(v, k2));
      },
      [](const BasisEval &u, const BasisEval &v, const FacePoint &p) {
        return Complex(-u.value * normal_derivative(v, p.n));
      });
}

//
// a_x(u, v): the Rellich-identity part of b_Z.
//
inline SparseComplexMatrix assemble_ax(const C1Space &space, const WaveContext &ctx)
{
  using detail::FacePoint;
  using detail::VolumePoint;
  const double k = ctx.k, k2 = k * k;
  const int d = space.dim();
  return detail::assemble_bilinear<Complex>(
      space, ctx.x0,
      [k2, d](const BasisEval &u, const BasisEval &v, const VolumePoint &p) {
        return Complex((2.0 - d) * dot(u.grad, v.grad) + d * k2 * u.value * v.value +
                       dot(p.y, u.grad) * detail::helmholtz(v, k2));
      },
      [k, k2](const BasisEval &u, const BasisEval &v, const FacePoint &p) {
        const Point tu = tangential_gradient(u, p.n);
        const Point tv = tangential_gradient(v, p.n);
        return -(kI * k * u.value * dot(p.y, v.grad) + dot(p.y, tu) * normal_derivative(v, p.n) +
                 dot(p.y, p.n) * (k2 * u.value * v.value - dot(tu, tv)));
      });
}

// Assemble the system of any of the four formulations.
inline AssembledSystem assemble(const C1Space &space, const WaveContext &ctx,
                                const ProblemData &data, Formulation formulation)
{
  WaveContext c = ctx;
  c.formulation = formulation;
  switch (formulation)
  {
    case Formulation::Standard:
      return assemble_standard(space, c, data);
    case Formulation::LeastSquares:
      return assemble_ls(space, c, data);
    case Formulation::MsOneThird:
      c.A = LsqWeight::one_third();
      return assemble_ms(space, c, data);
    case Formulation::MsKSquared:
      c.A = LsqWeight::k_squared();
      return assemble_ms(space, c, data);
  }
  throw std::invalid_argument("assemble: unknown formulation");
}

}  // namespace cohelm

#endif  // COHELM_ASSEMBLY_HPP
