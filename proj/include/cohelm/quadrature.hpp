// SPDX-License-Identifier: Apache-2.0

#ifndef COHELM_QUADRATURE_HPP
#define COHELM_QUADRATURE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cohelm
{

// Gauss-Legendre rule mapped to the unit interval [0, 1]. An n-point rule
// integrates polynomials of degree 2n - 1 exactly.
struct LineRule
{
  std::vector<double> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

inline LineRule gauss_legendre(int npts)
{
  if (npts < 1)
  {
    throw std::invalid_argument("gauss_legendre: number of points must be positive");
  }
  LineRule rule;
  rule.points.resize(npts);
  rule.weights.resize(npts);
  const int half = (npts + 1) / 2;
  for (int i = 0; i < half; i++)
  {
    // Newton iteration on P_n starting from the Tricomi approximation.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (npts + 0.5));
    for (int it = 0; it < 100; it++)
    {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= npts; j++)
      {
        const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      const double dz = p1 / (npts * (z * p1 - p0) / (z * z - 1.0));
      z -= dz;
      if (std::abs(dz) < 1e-16)
      {
        break;
      }
    }
    // Recompute the derivative at the converged root.
    double p0 = 1.0, p1 = z;
    for (int j = 2; j <= npts; j++)
    {
      const double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    const double dp = npts * (z * p1 - p0) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // Nodes on [-1,1] are +-z; map to [0,1].
    rule.points[i] = 0.5 * (1.0 - z);
    rule.points[npts - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[npts - 1 - i] = 0.5 * w;
  }
  if (npts % 2 == 1)
  {
    rule.points[npts / 2] = 0.5;
  }
  return rule;
}

// Points per direction for integrands that oscillate like exp(i k x) on an
// element of width h, on top of a polynomial part of moderate degree.
inline int oscillatory_points(double h, double k, int base = 12)
{
  const double phase = std::abs(h * k);
  return base + static_cast<int>(std::ceil(0.5 * phase));
}

}  // namespace cohelm

#endif  // COHELM_QUADRATURE_HPP
