// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_PROBLEMS_HPP
#define MSCAT_PROBLEMS_HPP

#include <optional>
#include <span>
#include <string_view>

#include "mscat/geometry.hpp"

namespace mscat
{

enum class ProblemVariant
{
  LaplaceDirichlet,
  HelmholtzDirichlet,
  HelmholtzNeumann
};

inline std::string_view to_string(ProblemVariant v)
{
  switch (v)
  {
  case ProblemVariant::LaplaceDirichlet:
    return "laplace";
  case ProblemVariant::HelmholtzDirichlet:
    return "helmholtz_dirichlet";
  case ProblemVariant::HelmholtzNeumann:
    return "helmholtz_neumann";
  }
  return "unknown";
}

inline ProblemVariant parse_variant(std::string_view s)
{
  if (s == "laplace" || s == "laplace_dirichlet")
  {
    return ProblemVariant::LaplaceDirichlet;
  }
  if (s == "helmholtz" || s == "helmholtz_dirichlet")
  {
    return ProblemVariant::HelmholtzDirichlet;
  }
  if (s == "helmholtz_neumann" || s == "neumann")
  {
    return ProblemVariant::HelmholtzNeumann;
  }
  throw PreconditionError(concat("unknown problem variant '", s, "'"));
}

inline bool is_helmholtz(ProblemVariant v) { return v != ProblemVariant::LaplaceDirichlet; }

//
// Boundary-condition parameters of one benchmark sample. Only the fields used
// by the variant are meaningful; all are stored so records round-trip.
//
struct ProblemSpec
{
  ProblemVariant variant = ProblemVariant::LaplaceDirichlet;
  double phi0 = 0.0, phi1 = 0.0, phi2 = 0.0;
  Vec3 source;                  // x0
  Vec3 direction{1.0, 0.0, 0.0};  // v
  double wavenumber = 0.0;      // k

  friend bool operator==(const ProblemSpec &, const ProblemSpec &) = default;
};

namespace detail
{

inline double source_distance(const ProblemSpec &spec, const Vec3 &x)
{
  const double r = distance(x, spec.source);
  if (r == 0.0)
  {
    throw SingularityError("boundary condition evaluated at the source location");
  }
  return r;
}

}  // namespace detail

// u(x) = -exp(i k |x - x0|) / |x - x0|.
inline std::vector<Complex> dirichlet_monopole_bc(const ProblemSpec &spec, std::span<const Vec3> points)
{
  std::vector<Complex> out;
  out.reserve(points.size());
  for (const Vec3 &x : points)
  {
    const double r = detail::source_distance(spec, x);
    const double kr = spec.wavenumber * r;
    out.emplace_back(-std::cos(kr) / r, -std::sin(kr) / r);
  }
  return out;
}

// du/dn = -i k exp(i k x.v); the normals only fix the shape of the input.
inline std::vector<Complex> neumann_planewave_bc(const ProblemSpec &spec, std::span<const Vec3> points,
                                                 std::span<const Vec3> normals)
{
  MSCAT_REQUIRE(points.size() == normals.size(), "neumann_planewave_bc: ", points.size(),
                " points but ", normals.size(), " normals");
  std::vector<Complex> out;
  out.reserve(points.size());
  const double k = spec.wavenumber;
  for (const Vec3 &x : points)
  {
    const double ph = k * dot(x, spec.direction);
    out.push_back(Complex(0.0, -k) * Complex(std::cos(ph), std::sin(ph)));
  }
  return out;
}

struct LaplaceBcTerms
{
  double constant = 0.0;  // -phi0
  double monopole = 0.0;  // -phi1 / r
  double dipole = 0.0;    // -2 phi2 v.(x - x0) / r

  double total() const { return constant + monopole + dipole; }
};

inline LaplaceBcTerms laplace_bc_terms(const ProblemSpec &spec, const Vec3 &x)
{
  const double r = detail::source_distance(spec, x);
  return {-spec.phi0, -spec.phi1 / r, -2.0 * spec.phi2 * dot(spec.direction, x - spec.source) / r};
}

inline std::vector<double> laplace_dirichlet_bc(const ProblemSpec &spec, std::span<const Vec3> points)
{
  std::vector<double> out;
  out.reserve(points.size());
  for (const Vec3 &x : points)
  {
    out.push_back(laplace_bc_terms(spec, x).total());
  }
  return out;
}

// Dirichlet data of the variant at the given points (complex for both kinds).
inline std::vector<Complex> dirichlet_bc(const ProblemSpec &spec, std::span<const Vec3> points)
{
  switch (spec.variant)
  {
  case ProblemVariant::LaplaceDirichlet:
  {
    const auto r = laplace_dirichlet_bc(spec, points);
    return {r.begin(), r.end()};
  }
  case ProblemVariant::HelmholtzDirichlet:
    return dirichlet_monopole_bc(spec, points);
  case ProblemVariant::HelmholtzNeumann:
    break;
  }
  throw PreconditionError("dirichlet_bc: the Neumann problem has no Dirichlet data");
}

//
// Incident field u_inc with u = -u_inc on the boundary for the Dirichlet
// problems: monopole, plane wave, or the negated Laplace boundary expression.
//
inline std::vector<Complex> incident_field(const ProblemSpec &spec, std::span<const Vec3> points)
{
  std::vector<Complex> out;
  out.reserve(points.size());
  const double k = spec.wavenumber;
  for (const Vec3 &x : points)
  {
    switch (spec.variant)
    {
    case ProblemVariant::HelmholtzDirichlet:
    {
      const double r = detail::source_distance(spec, x);
      out.emplace_back(std::cos(k * r) / r, std::sin(k * r) / r);
      break;
    }
    case ProblemVariant::HelmholtzNeumann:
    {
      const double ph = k * dot(x, spec.direction);
      out.emplace_back(std::cos(ph), std::sin(ph));
      break;
    }
    case ProblemVariant::LaplaceDirichlet:
      out.emplace_back(-laplace_bc_terms(spec, x).total(), 0.0);
      break;
    }
  }
  return out;
}

struct ProblemSamplingOptions
{
  double min_wavelength = 0.6;
  double max_wavelength = 6.0;
  double source_margin = 0.1;
  int max_rejections = 100000;
};

//
// Random boundary-condition parameters. Every field is drawn in a fixed order
// regardless of the variant so the stream is identical across variants.
//
inline ProblemSpec sample_problem(ProblemVariant variant, const Scene &scene, std::uint64_t seed,
                                  const ProblemSamplingOptions &opt = {})
{
  MSCAT_REQUIRE(!scene.ellipsoids.empty(), "sample_problem: empty scene");
  Rng rng(seed);
  ProblemSpec spec;
  spec.variant = variant;
  const double h = scene.environment_half_extent;
  int tries = 0;
  for (;;)
  {
    spec.source = {rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h)};
    const bool clear = std::all_of(scene.ellipsoids.begin(), scene.ellipsoids.end(),
                                   [&](const Ellipsoid &e)
                                   {
                                     return distance(spec.source, e.center) >
                                            e.max_semi_axis() + opt.source_margin;
                                   });
    if (clear)
    {
      break;
    }
    if (++tries >= opt.max_rejections)
    {
      throw SamplingError(concat("sample_problem: ", tries, " rejections placing the source (seed ",
                                 seed, ")"));
    }
  }
  spec.direction = rng.unit_vector();
  spec.phi0 = rng.uniform(-1.0, 1.0);
  spec.phi1 = rng.uniform(-1.0, 1.0);
  spec.phi2 = rng.uniform(-1.0, 1.0);
  const double wavelength = rng.uniform(opt.min_wavelength, opt.max_wavelength);
  spec.wavenumber = 2.0 * kPi / wavelength;
  if (variant == ProblemVariant::LaplaceDirichlet)
  {
    spec.wavenumber = 0.0;
  }
  return spec;
}

}  // namespace mscat

#endif  // MSCAT_PROBLEMS_HPP
