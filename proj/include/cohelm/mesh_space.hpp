// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_MESH_SPACE_HPP
#define COHELM_MESH_SPACE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cohelm/quadrature.hpp"

namespace cohelm
{

using Point = std::array<double, 2>;

inline double dot(const Point &a, const Point &b) { return a[0] * b[0] + a[1] * b[1]; }

//
// Interval (d = 1) or axis-aligned rectangle (d = 2), together with the
// star-shapedness data (x0, L, gamma) used by the coercive formulation.
//
// The domain is star-shaped with respect to a ball around x0 with
// (x - x0) . n >= gamma L on every face; gamma is computed to equality.
//
class Domain
{
public:
  static Domain interval(double a, double b, std::optional<double> center = std::nullopt,
                         std::optional<double> length = std::nullopt)
  {
    if (!(b > a) || !std::isfinite(a) || !std::isfinite(b))
    {
      throw std::invalid_argument("Domain::interval: degenerate interval");
    }
    Domain dom;
    dom.dim_ = 1;
    dom.lower_ = {a, 0.0};
    dom.upper_ = {b, 0.0};
    dom.center_ = {center.value_or(0.5 * (a + b)), 0.0};
    dom.length_ = length.value_or(b - a);
    dom.finish();
    return dom;
  }

  static Domain rectangle(Point lower, Point upper, std::optional<Point> center = std::nullopt,
                          std::optional<double> length = std::nullopt)
  {
    if (!(upper[0] > lower[0]) || !(upper[1] > lower[1]))
    {
      throw std::invalid_argument("Domain::rectangle: degenerate rectangle");
    }
    Domain dom;
    dom.dim_ = 2;
    dom.lower_ = lower;
    dom.upper_ = upper;
    dom.center_ = center.value_or(
        Point{0.5 * (lower[0] + upper[0]), 0.5 * (lower[1] + upper[1])});
    dom.length_ = length.value_or(std::hypot(upper[0] - lower[0], upper[1] - lower[1]));
    dom.finish();
    return dom;
  }

  static Domain unit_interval() { return interval(0.0, 1.0); }
  static Domain unit_square() { return rectangle({0.0, 0.0}, {1.0, 1.0}); }

  int dim() const { return dim_; }
  const Point &lower() const { return lower_; }
  const Point &upper() const { return upper_; }
  const Point &center() const { return center_; }
  double length_scale() const { return length_; }
  double gamma() const { return gamma_; }
  double width(int axis) const { return upper_[axis] - lower_[axis]; }

  // Measure of the domain and of its boundary (counting measure in 1-d).
  double volume() const { return dim_ == 1 ? width(0) : width(0) * width(1); }
  double boundary_measure() const { return dim_ == 1 ? 2.0 : 2.0 * (width(0) + width(1)); }

  // min over faces of (x - x0) . n.
  double min_support() const
  {
    double m = std::min(center_[0] - lower_[0], upper_[0] - center_[0]);
    if (dim_ == 2)
    {
      m = std::min({m, center_[1] - lower_[1], upper_[1] - center_[1]});
    }
    return m;
  }

private:
  void finish()
  {
    if (!(length_ > 0.0))
    {
      throw std::invalid_argument("Domain: characteristic length must be positive");
    }
    for (int a = 0; a < dim_; a++)
    {
      if (!(center_[a] > lower_[a] && center_[a] < upper_[a]))
      {
        throw std::invalid_argument("Domain: star center must lie strictly inside the domain");
      }
    }
    gamma_ = min_support() / length_;
  }

  int dim_ = 1;
  Point lower_{0.0, 0.0};
  Point upper_{1.0, 0.0};
  Point center_{0.5, 0.0};
  double length_ = 1.0;
  double gamma_ = 0.5;
};

//
// Value and derivatives of one mapped shape function at one point.
// In 1-d only the x components are used and lap == dxx.
//
struct BasisEval
{
  double value = 0.0;
  Point grad{0.0, 0.0};
  double dxx = 0.0;
  double dxy = 0.0;
  double dyy = 0.0;
  double lap = 0.0;
};

inline double normal_derivative(const BasisEval &e, const Point &n) { return dot(e.grad, n); }

// Surface gradient grad - n (dn); identically zero in 1-d.
inline Point tangential_gradient(const BasisEval &e, const Point &n)
{
  const double dn = normal_derivative(e, n);
  return {e.grad[0] - dn * n[0], e.grad[1] - dn * n[1]};
}

namespace hermite
{

// Cubic Hermite shape functions on the reference interval [0, 1], in the
// local order (value left, slope left, value right, slope right).
// Returns (H, H', H'') for reference coordinate t.
inline std::array<double, 3> reference(int p, double t)
{
  switch (p)
  {
    case 0:
      return {1.0 - 3.0 * t * t + 2.0 * t * t * t, -6.0 * t + 6.0 * t * t, -6.0 + 12.0 * t};
    case 1:
      return {t - 2.0 * t * t + t * t * t, 1.0 - 4.0 * t + 3.0 * t * t, -4.0 + 6.0 * t};
    case 2:
      return {3.0 * t * t - 2.0 * t * t * t, 6.0 * t - 6.0 * t * t, 6.0 - 12.0 * t};
    case 3:
      return {-t * t + t * t * t, -2.0 * t + 3.0 * t * t, -2.0 + 6.0 * t};
    default:
      throw std::out_of_range("hermite::reference: local index must be in [0, 4)");
  }
}

// Physical shape function on an element of width h: slope shapes carry a
// factor h so that their coefficient is the physical derivative.
inline std::array<double, 3> physical(int p, double t, double h)
{
  auto r = reference(p, t);
  const double s = (p % 2 == 1) ? h : 1.0;
  return {s * r[0], s * r[1] / h, s * r[2] / (h * h)};
}

}  // namespace hermite

//
// C1 piecewise-cubic (1-d) or bicubic (2-d) Hermite space on a uniform mesh.
//
// DOFs are ordered lexicographically by node (x fastest), value before
// derivatives; per node (v, v_x) in 1-d and (v, v_x, v_y, v_xy) in 2-d.
//
class C1Space
{
public:
  C1Space(const Domain &domain, int nx, int ny = 0) : domain_(domain)
  {
    if (nx < 1 || (domain.dim() == 2 && ny < 1))
    {
      throw std::invalid_argument("C1Space: element counts must be positive");
    }
    n_ = {nx, domain.dim() == 2 ? ny : 1};
    for (int a = 0; a < domain.dim(); a++)
    {
      h_[a] = domain.width(a) / n_[a];
      nodes_[a].resize(n_[a] + 1);
      for (int i = 0; i <= n_[a]; i++)
      {
        nodes_[a][i] = (i == n_[a]) ? domain.upper()[a] : domain.lower()[a] + i * h_[a];
      }
    }
  }

  const Domain &domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int elements(int axis) const { return n_[axis]; }
  int num_elements() const { return dim() == 1 ? n_[0] : n_[0] * n_[1]; }
  double h(int axis) const { return h_[axis]; }
  // Element diameter.
  double h() const { return dim() == 1 ? h_[0] : std::hypot(h_[0], h_[1]); }
  const std::vector<double> &nodes(int axis) const { return nodes_[axis]; }

  // 1-d DOF count along one axis: two per node.
  int axis_dofs(int axis) const { return 2 * n_[axis] + 2; }
  int num_dofs() const { return dim() == 1 ? axis_dofs(0) : axis_dofs(0) * axis_dofs(1); }
  int local_count() const { return dim() == 1 ? 4 : 16; }
  int dofs_per_node() const { return dim() == 1 ? 2 : 4; }

  // Element (ex, ey) <-> linear index, x fastest.
  std::array<int, 2> element_index(int e) const
  {
    check_element(e);
    return {e % n_[0], e / n_[0]};
  }
  Point element_origin(int e) const
  {
    auto [ex, ey] = element_index(e);
    return {nodes_[0][ex], dim() == 2 ? nodes_[1][ey] : 0.0};
  }

  // Local index decomposition: 2-d local = px + 4 py with px, py Hermite
  // local indices along x and y.
  int global_dof(int e, int local) const
  {
    if (local < 0 || local >= local_count())
    {
      throw std::out_of_range("C1Space: local index out of range");
    }
    auto [ex, ey] = element_index(e);
    const int px = local % 4;
    const int ix = ex + px / 2;
    if (dim() == 1)
    {
      return 2 * ix + px % 2;
    }
    const int py = local / 4;
    const int iy = ey + py / 2;
    return 4 * (iy * (n_[0] + 1) + ix) + (px % 2) + 2 * (py % 2);
  }

  std::vector<int> local_dofs(int e) const
  {
    std::vector<int> out(local_count());
    for (int a = 0; a < local_count(); a++)
    {
      out[a] = global_dof(e, a);
    }
    return out;
  }

  // Physical coordinates of a reference point in element e.
  Point map(int e, const Point &ref) const
  {
    const Point o = element_origin(e);
    return {o[0] + ref[0] * h_[0], dim() == 2 ? o[1] + ref[1] * h_[1] : 0.0};
  }

  // Element containing a physical point (clamped to the mesh) and the
  // reference coordinates within it.
  std::pair<int, Point> locate(const Point &x) const
  {
    std::array<int, 2> idx{0, 0};
    Point ref{0.0, 0.0};
    for (int a = 0; a < dim(); a++)
    {
      const double s = (x[a] - domain_.lower()[a]) / h_[a];
      int i = static_cast<int>(std::floor(s));
      i = std::clamp(i, 0, n_[a] - 1);
      idx[a] = i;
      ref[a] = s - i;
    }
    return {idx[0] + n_[0] * idx[1], ref};
  }

  void check_element(int e) const
  {
    if (e < 0 || e >= num_elements())
    {
      throw std::out_of_range("C1Space: element index out of range");
    }
  }

private:
  Domain domain_;
  std::array<int, 2> n_{1, 1};
  std::array<double, 2> h_{1.0, 1.0};
  std::array<std::vector<double>, 2> nodes_;
};

inline C1Space build_space_1d(double a, double b, int n)
{
  if (n < 1)
  {
    throw std::invalid_argument("build_space_1d: n must be positive");
  }
  return C1Space(Domain::interval(a, b), n);
}

inline C1Space build_space_1d(const Domain &domain, int n)
{
  if (domain.dim() != 1)
  {
    throw std::invalid_argument("build_space_1d: domain is not an interval");
  }
  return C1Space(domain, n);
}

inline C1Space build_space_2d(Point lower, Point upper, int nx, int ny)
{
  if (nx < 1 || ny < 1)
  {
    throw std::invalid_argument("build_space_2d: element counts must be positive");
  }
  return C1Space(Domain::rectangle(lower, upper), nx, ny);
}

inline C1Space build_space_2d(const Domain &domain, int nx, int ny)
{
  if (domain.dim() != 2)
  {
    throw std::invalid_argument("build_space_2d: domain is not a rectangle");
  }
  return C1Space(domain, nx, ny);
}

// Uniform mesh with element diameter at most h: n = ceil(width / h) in 1-d;
// in 2-d each axis is divided so the per-axis spacing is at most h / sqrt(2).
inline C1Space space_for_meshwidth(const Domain &domain, double h)
{
  if (!(h > 0.0))
  {
    throw std::invalid_argument("space_for_meshwidth: h must be positive");
  }
  if (domain.dim() == 1)
  {
    return C1Space(domain, std::max(1, static_cast<int>(std::ceil(domain.width(0) / h - 1e-9))));
  }
  const double spacing = h / std::sqrt(2.0);
  const int nx = std::max(1, static_cast<int>(std::ceil(domain.width(0) / spacing - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(domain.width(1) / spacing - 1e-9)));
  return C1Space(domain, nx, ny);
}

// Evaluate local shape function `local` of element `element` at reference
// point `ref` in [0,1]^d.
inline BasisEval eval_basis(const C1Space &space, int element, int local, const Point &ref)
{
  space.check_element(element);
  if (local < 0 || local >= space.local_count())
  {
    throw std::out_of_range("eval_basis: local index out of range");
  }
  for (int a = 0; a < space.dim(); a++)
  {
    if (ref[a] < -1e-12 || ref[a] > 1.0 + 1e-12)
    {
      throw std::out_of_range("eval_basis: point outside the reference element");
    }
  }
  BasisEval out;
  const auto fx = hermite::physical(local % 4, ref[0], space.h(0));
  if (space.dim() == 1)
  {
    out.value = fx[0];
    out.grad = {fx[1], 0.0};
    out.dxx = fx[2];
    out.lap = fx[2];
    return out;
  }
  const auto fy = hermite::physical(local / 4, ref[1], space.h(1));
  out.value = fx[0] * fy[0];
  out.grad = {fx[1] * fy[0], fx[0] * fy[1]};
  out.dxx = fx[2] * fy[0];
  out.dxy = fx[1] * fy[1];
  out.dyy = fx[0] * fy[2];
  out.lap = out.dxx + out.dyy;
  return out;
}

//
// Tensor Gauss-Legendre rule on the reference element plus the matching
// rule on each boundary face.
//
struct QuadRule
{
  int dim = 1;
  LineRule line;
  std::vector<Point> points;
  std::vector<double> weights;  // reference weights, sum to 1

  int size() const { return static_cast<int>(points.size()); }
};

inline QuadRule make_quad_rule(int dim, int npts)
{
  QuadRule rule;
  rule.dim = dim;
  rule.line = gauss_legendre(npts);
  if (dim == 1)
  {
    for (int q = 0; q < npts; q++)
    {
      rule.points.push_back({rule.line.points[q], 0.0});
      rule.weights.push_back(rule.line.weights[q]);
    }
  }
  else
  {
    for (int qy = 0; qy < npts; qy++)
    {
      for (int qx = 0; qx < npts; qx++)
      {
        rule.points.push_back({rule.line.points[qx], rule.line.points[qy]});
        rule.weights.push_back(rule.line.weights[qx] * rule.line.weights[qy]);
      }
    }
  }
  return rule;
}

// Six points per direction: exact through degree 11, which covers the
// degree-7-per-direction integrands of the multiplier terms.
inline constexpr int kAssemblyPoints = 6;

inline QuadRule quadrature_rule(const C1Space &space, int npts = kAssemblyPoints)
{
  return make_quad_rule(space.dim(), npts);
}

//
// Boundary faces. In 1-d a face is an endpoint; in 2-d an element edge.
//
struct Face
{
  int element;
  int side;  // 0: x = lower, 1: x = upper, 2: y = lower, 3: y = upper
  Point normal;
};

inline std::vector<Face> boundary_faces(const C1Space &space)
{
  std::vector<Face> faces;
  const int nx = space.elements(0);
  if (space.dim() == 1)
  {
    faces.push_back({0, 0, {-1.0, 0.0}});
    faces.push_back({nx - 1, 1, {1.0, 0.0}});
    return faces;
  }
  const int ny = space.elements(1);
  for (int ey = 0; ey < ny; ey++)
  {
    faces.push_back({ey * nx, 0, {-1.0, 0.0}});
    faces.push_back({ey * nx + nx - 1, 1, {1.0, 0.0}});
  }
  for (int ex = 0; ex < nx; ex++)
  {
    faces.push_back({ex, 2, {0.0, -1.0}});
    faces.push_back({(ny - 1) * nx + ex, 3, {0.0, 1.0}});
  }
  return faces;
}

// Reference points and physical weights on one face side.
inline std::vector<std::pair<Point, double>> face_points(const C1Space &space, int side,
                                                         const LineRule &line)
{
  std::vector<std::pair<Point, double>> pts;
  if (space.dim() == 1)
  {
    pts.push_back({{side == 0 ? 0.0 : 1.0, 0.0}, 1.0});
    return pts;
  }
  for (int q = 0; q < line.size(); q++)
  {
    const double t = line.points[q];
    switch (side)
    {
      case 0:
        pts.push_back({{0.0, t}, line.weights[q] * space.h(1)});
        break;
      case 1:
        pts.push_back({{1.0, t}, line.weights[q] * space.h(1)});
        break;
      case 2:
        pts.push_back({{t, 0.0}, line.weights[q] * space.h(0)});
        break;
      default:
        pts.push_back({{t, 1.0}, line.weights[q] * space.h(0)});
        break;
    }
  }
  return pts;
}

}  // namespace cohelm

#endif  // COHELM_MESH_SPACE_HPP
