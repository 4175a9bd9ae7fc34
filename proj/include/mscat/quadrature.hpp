// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_QUADRATURE_HPP
#define MSCAT_QUADRATURE_HPP

#include "mscat/core.hpp"

namespace mscat::quadrature
{

// Barycentric point and weight (weights sum to one; multiply by the area).
struct TrianglePoint
{
  double l0, l1, l2;
  double weight;
};

//
// Symmetric 7-point rule, exact for polynomials of degree 5.
//
inline const std::array<TrianglePoint, 7> &seven_point_rule()
{
  static const std::array<TrianglePoint, 7> rule = []
  {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, b1 = (9.0 + 2.0 * s15) / 21.0;
    const double a2 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
    const double w1 = (155.0 - s15) / 1200.0, w2 = (155.0 + s15) / 1200.0;
    return std::array<TrianglePoint, 7>{{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 9.0 / 40.0},
                                         {b1, a1, a1, w1},
                                         {a1, b1, a1, w1},
                                         {a1, a1, b1, w1},
                                         {b2, a2, a2, w2},
                                         {a2, b2, a2, w2},
                                         {a2, a2, b2, w2}}};
  }();
  return rule;
}

inline Vec3 barycentric(const TrianglePoint &q, const Vec3 &a, const Vec3 &b, const Vec3 &c)
{
  return q.l0 * a + q.l1 * b + q.l2 * c;
}

//
// Closed-form integral of 1/|x - y| over the plane triangle (a, b, c), for any
// observation point x (on or off the plane). Edge-by-edge form of the
// constant-source potential: for each edge with in-plane outward normal m,
//   P0 log((R+ + l+) / (R- + l-)) - |d| [atan(P0 l+ / (R0^2 + |d| R+))
//                                        - atan(P0 l- / (R0^2 + |d| R-))]
// where d is the height above the plane, P0 the signed in-plane distance to the
// edge line, l+- the tangential coordinates of the edge ends and R+- the
// distances from x to the edge ends.
//
inline double inverse_distance_integral(const Vec3 &x, const Vec3 &a, const Vec3 &b, const Vec3 &c)
{
  const Vec3 nraw = cross(b - a, c - a);
  const double twice_area = norm(nraw);
  MSCAT_REQUIRE(twice_area > 0.0, "degenerate triangle");
  const Vec3 n = nraw / twice_area;
  const double d = dot(x - a, n);
  const double ad = std::abs(d);
  const Vec3 rho = x - d * n;
  const Vec3 verts[3] = {a, b, c};

  // log(R + l), rewritten as log(R0^2 / (R - l)) when l < 0 to avoid cancellation.
  auto log_term = [](double l, double r, double r0sq)
  { return l >= 0.0 ? std::log(r + l) : std::log(r0sq) - std::log(r - l); };

  double result = 0.0;
  for (int e = 0; e < 3; ++e)
  {
    const Vec3 &p = verts[e];
    const Vec3 &q = verts[(e + 1) % 3];
    const Vec3 edge = q - p;
    const Vec3 t = edge / norm(edge);
    const Vec3 m = cross(t, n);
    const double p0 = dot(p - rho, m);
    const double lm = dot(p - rho, t);
    const double lp = dot(q - rho, t);
    const double rm = distance(x, p);
    const double rp = distance(x, q);
    const double r0sq = p0 * p0 + d * d;
    const double scale = std::max(norm(edge), 1e-300);
    if (std::abs(p0) <= 1e-14 * scale)
    {
      continue;  // x projects onto the edge line: both terms vanish
    }
    result += p0 * (log_term(lp, rp, r0sq) - log_term(lm, rm, r0sq));
    if (ad > 0.0)
    {
      result -= ad * (std::atan2(p0 * lp, r0sq + ad * rp) - std::atan2(p0 * lm, r0sq + ad * rm));
    }
  }
  return result;
}

}  // namespace mscat::quadrature

#endif  // MSCAT_QUADRATURE_HPP
