// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_FIELDGRID_HPP
#define MSCAT_FIELDGRID_HPP

#include <fstream>
#include <iomanip>

#include "mscat/bem.hpp"
#include "mscat/dataset.hpp"

namespace mscat
{

struct GridSpec
{
  double z0 = 0.0;
  double side = 10.0;
  std::size_t resolution = 101;  // points per side

  void validate() const
  {
    MSCAT_REQUIRE(side > 0.0, "grid side must be positive");
    MSCAT_REQUIRE(resolution >= 2, "grid resolution must be >= 2");
  }
};

//
// Total field on an n x n grid of the plane z = z0 centered at the origin.
// Entry (i, j) sits at x = xs[j], y = ys[i]; masked points lie inside an
// obstacle and hold NaN.
//
struct FieldGrid
{
  GridSpec spec;
  std::vector<double> coords;  // shared by x and y
  std::vector<Complex> values;
  std::vector<std::uint8_t> masked;

  std::size_t n() const { return spec.resolution; }
  Vec3 point(std::size_t i, std::size_t j) const { return {coords[j], coords[i], spec.z0}; }
  const Complex &at(std::size_t i, std::size_t j) const { return values[i * n() + j]; }
};

inline std::vector<double> grid_coords(const GridSpec &g)
{
  std::vector<double> c(g.resolution);
  for (std::size_t k = 0; k < g.resolution; ++k)
  {
    c[k] = -0.5 * g.side + g.side * static_cast<double>(k) / static_cast<double>(g.resolution - 1);
  }
  return c;
}

//
// u_tot = S(p) + u_inc. The per-vertex trace is mapped to triangles by the
// mean of each triangle's three vertex values.
//
inline FieldGrid evaluate_field(const Scene &scene, const ProblemSpec &problem, std::span<const Complex> vertex_trace,
                                const GridSpec &spec, int threads = 1)
{
  spec.validate();
  const TriangleMesh &mesh = scene.mesh;
  MSCAT_REQUIRE(vertex_trace.size() == mesh.vertex_count(), "evaluate_field: trace has ", vertex_trace.size(),
                " entries for ", mesh.vertex_count(), " vertices");
  FieldGrid g;
  g.spec = spec;
  g.coords = grid_coords(spec);
  const std::size_t n = spec.resolution;
  g.values.assign(n * n, Complex(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()));
  g.masked.assign(n * n, 0);
  std::vector<Vec3> points;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = 0; j < n; ++j)
    {
      const Vec3 x = g.point(i, j);
      if (scene.inside_any(x))
      {
        g.masked[i * n + j] = 1;
      }
      else
      {
        points.push_back(x);
        index.push_back(i * n + j);
      }
    }
  }
  const std::vector<Complex> density = vertex_to_triangle(mesh, vertex_trace);
  AssemblyOptions opt;
  opt.threads = threads;
  const std::vector<Complex> u =
      evaluate_single_layer_potential(mesh, Kernel::for_wavenumber(problem.wavenumber), density, points, opt);
  const std::vector<Complex> inc = incident_field(problem, points);
  for (std::size_t p = 0; p < points.size(); ++p)
  {
    g.values[index[p]] = u[p] + inc[p];
  }
  return g;
}

inline FieldGrid evaluate_field(const SampleRecord &s, std::span<const Complex> vertex_trace, const GridSpec &spec,
                                int threads = 1)
{
  return evaluate_field(s.scene, s.problem, vertex_trace, spec, threads);
}

// Pointwise difference a - b; masks must agree.
inline FieldGrid field_difference(const FieldGrid &a, const FieldGrid &b)
{
  MSCAT_REQUIRE(a.values.size() == b.values.size() && a.masked == b.masked, "field_difference: grids differ");
  FieldGrid d = a;
  for (std::size_t k = 0; k < d.values.size(); ++k)
  {
    if (!d.masked[k])
    {
      d.values[k] = a.values[k] - b.values[k];
    }
  }
  return d;
}

enum class FieldFormat
{
  Csv,
  Pgm
};

inline FieldFormat parse_field_format(std::string_view s)
{
  if (s == "csv")
  {
    return FieldFormat::Csv;
  }
  if (s == "pgm")
  {
    return FieldFormat::Pgm;
  }
  throw PreconditionError(concat("unknown field format '", s, "' (expected csv or pgm)"));
}

// CSV columns x,y,re,im,abs,masked; PGM is |u| scaled linearly to 0..255 with masked cells at 0.
inline void export_field(const FieldGrid &g, const std::filesystem::path &path, FieldFormat format)
{
  const std::size_t n = g.n();
  if (format == FieldFormat::Csv)
  {
    std::ofstream f(path);
    if (!f)
    {
      throw FormatError(FormatError::Kind::Io, concat("cannot open '", path.string(), "' for writing"));
    }
    f << "x,y,re,im,abs,masked\n" << std::setprecision(17);
    for (std::size_t i = 0; i < n; ++i)
    {
      for (std::size_t j = 0; j < n; ++j)
      {
        const Vec3 p = g.point(i, j);
        const Complex v = g.at(i, j);
        f << p.x << ',' << p.y << ',' << v.real() << ',' << v.imag() << ',' << std::abs(v) << ','
          << static_cast<int>(g.masked[i * n + j]) << '\n';
      }
    }
    if (!f)
    {
      throw FormatError(FormatError::Kind::Io, concat("write failed for '", path.string(), "'"));
    }
    return;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < g.values.size(); ++k)
  {
    if (!g.masked[k])
    {
      lo = std::min(lo, std::abs(g.values[k]));
      hi = std::max(hi, std::abs(g.values[k]));
    }
  }
  const std::string head = concat("P5\n", n, " ", n, "\n255\n");
  std::vector<char> bytes(head.begin(), head.end());
  // Image rows run top to bottom, i.e. from +y to -y.
  for (std::size_t ii = n; ii-- > 0;)
  {
    for (std::size_t j = 0; j < n; ++j)
    {
      const std::size_t k = ii * n + j;
      int level = 0;
      if (!g.masked[k] && hi > lo)
      {
        level = static_cast<int>(std::lround(255.0 * (std::abs(g.values[k]) - lo) / (hi - lo)));
      }
      bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0, 255))));
    }
  }
  write_file(path, bytes);
}

}  // namespace mscat

#endif  // MSCAT_FIELDGRID_HPP
