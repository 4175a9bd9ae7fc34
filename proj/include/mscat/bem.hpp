// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_BEM_HPP
#define MSCAT_BEM_HPP

#include <limits>

#include "mscat/geometry.hpp"
#include "mscat/gmres.hpp"
#include "mscat/quadrature.hpp"

namespace mscat
{

enum class KernelKind
{
  Laplace,
  Helmholtz
};

//
// Free-space Green's function, G = -1/(4 pi r) for Laplace and
// G = -exp(+i k r)/(4 pi r) for Helmholtz (outgoing waves).
//
struct Kernel
{
  KernelKind kind = KernelKind::Laplace;
  double wavenumber = 0.0;

  static Kernel laplace() { return {}; }

  static Kernel helmholtz(double k)
  {
    MSCAT_REQUIRE(k > 0.0, "Helmholtz kernel needs a positive wavenumber, got ", k);
    return {KernelKind::Helmholtz, k};
  }

  // Laplace when k == 0, Helmholtz otherwise.
  static Kernel for_wavenumber(double k) { return k == 0.0 ? laplace() : helmholtz(k); }

  bool is_real() const { return kind == KernelKind::Laplace; }
};

inline Complex greens_at_distance(const Kernel &kernel, double r)
{
  if (kernel.kind == KernelKind::Laplace)
  {
    return {-1.0 / (kFourPi * r), 0.0};
  }
  const double kr = kernel.wavenumber * r;
  return Complex(std::cos(kr), std::sin(kr)) * (-1.0 / (kFourPi * r));
}

inline Complex greens(const Kernel &kernel, const Vec3 &x, const Vec3 &y)
{
  const double r = distance(x, y);
  if (r == 0.0)
  {
    throw SingularityError("greens: coincident points");
  }
  return greens_at_distance(kernel, r);
}

// G minus its static part -1/(4 pi r); bounded, equal to -i k/(4 pi) at r = 0.
inline Complex greens_smooth_remainder(const Kernel &kernel, double r)
{
  if (kernel.kind == KernelKind::Laplace)
  {
    return {0.0, 0.0};
  }
  const double k = kernel.wavenumber;
  if (r == 0.0)
  {
    return {0.0, -k / kFourPi};
  }
  const double half = std::sin(0.5 * k * r);
  // exp(ikr) - 1 without cancellation for small kr.
  const Complex em1(-2.0 * half * half, std::sin(k * r));
  return em1 * (-1.0 / (kFourPi * r));
}

struct AssemblyOptions
{
  // Pairs with centroid distance below near_factor * diameter use the
  // singular-split rule.
  double near_factor = 2.0;
  int threads = 1;
};

//
// Integral of G(x - y) over triangle t of the mesh, using either the 7-point
// rule on the full kernel or the analytic static part plus the 7-point rule on
// the smooth remainder.
//
inline Complex panel_integral(const Kernel &kernel, const TriangleMesh &mesh, std::size_t t,
                              const Vec3 &x, bool near)
{
  const auto &tri = mesh.triangles[t];
  const Vec3 &a = mesh.vertices[tri[0]];
  const Vec3 &b = mesh.vertices[tri[1]];
  const Vec3 &c = mesh.vertices[tri[2]];
  const double area = mesh.triangle_areas[t];
  const auto &rule = quadrature::seven_point_rule();
  Complex sum{0.0, 0.0};
  if (near)
  {
    sum = -quadrature::inverse_distance_integral(x, a, b, c) / kFourPi;
    if (kernel.kind == KernelKind::Helmholtz)
    {
      Complex rem{0.0, 0.0};
      for (const auto &q : rule)
      {
        rem += q.weight * greens_smooth_remainder(kernel, distance(x, quadrature::barycentric(q, a, b, c)));
      }
      sum += rem * area;
    }
    return sum;
  }
  for (const auto &q : rule)
  {
    sum += q.weight * greens_at_distance(kernel, distance(x, quadrature::barycentric(q, a, b, c)));
  }
  return sum * area;
}

inline bool is_near(const TriangleMesh &mesh, std::size_t t, const Vec3 &x, double near_factor)
{
  return distance(x, mesh.triangle_centroids[t]) < near_factor * mesh.triangle_diameter(t);
}

// Dense row-major square matrix.
template <typename S>
struct DenseMatrix
{
  std::size_t n = 0;
  std::vector<S> data;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t size) : n(size), data(size * size) {}

  S &operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
  const S &operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }

  // out = A * in, rows in ascending order within each worker.
  void apply(std::span<const S> in, std::span<S> out, int threads = 1) const
  {
    parallel_for(n, threads,
                 [&](std::size_t i)
                 {
                   const S *row = data.data() + i * n;
                   S s{};
                   for (std::size_t j = 0; j < n; ++j)
                   {
                     s += row[j] * in[j];
                   }
                   out[i] = s;
                 });
  }
};

template <typename S>
S from_complex(const Complex &z)
{
  if constexpr (std::is_same_v<S, double>)
  {
    return z.real();
  }
  else
  {
    return z;
  }
}

//
// Collocation matrix of the single-layer operator with piecewise-constant
// elements: A(i, j) = integral over triangle j of G(c_i - y), c_i the centroid
// of triangle i.
//
template <typename S>
DenseMatrix<S> assemble_single_layer(const TriangleMesh &mesh, const Kernel &kernel,
                                     const AssemblyOptions &opt = {})
{
  if constexpr (std::is_same_v<S, double>)
  {
    MSCAT_REQUIRE(kernel.is_real(), "real assembly requested for a complex kernel");
  }
  const std::size_t n = mesh.triangle_count();
  MSCAT_REQUIRE(n > 0, "assemble_single_layer: empty mesh");
  std::vector<double> diam(n);
  for (std::size_t t = 0; t < n; ++t)
  {
    diam[t] = mesh.triangle_diameter(t);
  }
  DenseMatrix<S> a(n);
  parallel_for(n, opt.threads,
               [&](std::size_t i)
               {
                 const Vec3 &x = mesh.triangle_centroids[i];
                 for (std::size_t j = 0; j < n; ++j)
                 {
                   const bool near =
                       i == j || distance(x, mesh.triangle_centroids[j]) < opt.near_factor * diam[j];
                   const Complex v = panel_integral(kernel, mesh, j, x, near);
                   if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                   {
                     throw Error(concat("assemble_single_layer: non-finite entry for triangle pair (",
                                        i, ", ", j, ")"));
                   }
                   a(i, j) = from_complex<S>(v);
                 }
               });
  return a;
}

// Per-vertex trace: area-weighted mean of the densities of incident triangles.
template <typename S>
std::vector<Complex> triangle_to_vertex(const TriangleMesh &mesh, std::span<const S> density)
{
  MSCAT_REQUIRE(density.size() == mesh.triangle_count(), "density length != triangle count");
  std::vector<Complex> sum(mesh.vertex_count());
  std::vector<double> weight(mesh.vertex_count(), 0.0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
  {
    const double area = mesh.triangle_areas[t];
    for (std::uint32_t v : mesh.triangles[t])
    {
      sum[v] += area * Complex(density[t]);
      weight[v] += area;
    }
  }
  for (std::size_t v = 0; v < sum.size(); ++v)
  {
    MSCAT_REQUIRE(weight[v] > 0.0, "vertex ", v, " has no incident triangle");
    sum[v] /= weight[v];
  }
  return sum;
}

// Per-triangle density from a per-vertex trace: mean of the three vertex values.
inline std::vector<Complex> vertex_to_triangle(const TriangleMesh &mesh, std::span<const Complex> trace)
{
  MSCAT_REQUIRE(trace.size() == mesh.vertex_count(), "trace length != vertex count");
  std::vector<Complex> out(mesh.triangle_count());
  for (std::size_t t = 0; t < out.size(); ++t)
  {
    const auto &tri = mesh.triangles[t];
    out[t] = (trace[tri[0]] + trace[tri[1]] + trace[tri[2]]) / 3.0;
  }
  return out;
}

struct BoundaryTrace
{
  std::vector<Complex> values;  // one per mesh vertex
};

struct SolveOptions
{
  double rtol = 1e-5;
  int max_iter = 2000;
  int threads = 1;
  AssemblyOptions assembly;
};

struct DirichletSolution
{
  std::vector<Complex> density;  // per triangle
  BoundaryTrace trace;           // per vertex
  GmresReport report;
};

namespace detail
{

template <typename S>
DirichletSolution solve_dense(const TriangleMesh &mesh, const DenseMatrix<S> &a,
                              std::span<const S> rhs, const SolveOptions &opt)
{
  LinearOperator<S> op = [&](std::span<const S> in, std::span<S> out)
  { a.apply(in, out, opt.threads); };
  auto res = gmres<S>(op, rhs, opt.rtol, std::max(1, std::min<int>(opt.max_iter, static_cast<int>(rhs.size()) + 1)));
  if (!res.report.converged)
  {
    throw ConvergenceError(concat("GMRES did not converge: ", res.report.iterations,
                                  " iterations, relative residual ",
                                  res.report.final_relative_residual));
  }
  DirichletSolution sol;
  sol.trace.values = triangle_to_vertex<S>(mesh, res.solution);
  sol.density.assign(res.solution.begin(), res.solution.end());
  sol.report = std::move(res.report);
  return sol;
}

}  // namespace detail

//
// Solves S p = u at the triangle centroids. Laplace problems with real data
// run in real arithmetic.
//
inline DirichletSolution solve_dirichlet(const TriangleMesh &mesh, const Kernel &kernel,
                                         std::span<const Complex> dirichlet_at_centroids,
                                         const SolveOptions &opt = {})
{
  MSCAT_REQUIRE(dirichlet_at_centroids.size() == mesh.triangle_count(),
                "solve_dirichlet: rhs length ", dirichlet_at_centroids.size(),
                " != triangle count ", mesh.triangle_count());
  AssemblyOptions aopt = opt.assembly;
  aopt.threads = opt.threads;
  const bool real_data = std::all_of(dirichlet_at_centroids.begin(), dirichlet_at_centroids.end(),
                                     [](const Complex &z) { return z.imag() == 0.0; });
  if (kernel.is_real() && real_data)
  {
    const auto a = assemble_single_layer<double>(mesh, kernel, aopt);
    std::vector<double> rhs(dirichlet_at_centroids.size());
    std::transform(dirichlet_at_centroids.begin(), dirichlet_at_centroids.end(), rhs.begin(),
                   [](const Complex &z) { return z.real(); });
    return detail::solve_dense<double>(mesh, a, rhs, opt);
  }
  const auto a = assemble_single_layer<Complex>(mesh, kernel, aopt);
  return detail::solve_dense<Complex>(mesh, a, dirichlet_at_centroids, opt);
}

// Generalized winding number of a closed mesh about x (1 inside, 0 outside).
inline double winding_number(const TriangleMesh &mesh, const Vec3 &x)
{
  double omega = 0.0;
  for (const auto &t : mesh.triangles)
  {
    const Vec3 a = mesh.vertices[t[0]] - x;
    const Vec3 b = mesh.vertices[t[1]] - x;
    const Vec3 c = mesh.vertices[t[2]] - x;
    const double la = norm(a), lb = norm(b), lc = norm(c);
    const double num = dot(a, cross(b, c));
    const double den = la * lb * lc + dot(a, b) * lc + dot(a, c) * lb + dot(b, c) * la;
    omega += 2.0 * std::atan2(num, den);
  }
  return omega / kFourPi;
}

//
// Single-layer potential u(x) = sum_j p_j * integral over T_j of G(x - y).
// Points enclosed by the mesh evaluate to NaN.
//
inline std::vector<Complex> evaluate_single_layer_potential(const TriangleMesh &mesh,
                                                            const Kernel &kernel,
                                                            std::span<const Complex> density,
                                                            std::span<const Vec3> points,
                                                            const AssemblyOptions &opt = {})
{
  MSCAT_REQUIRE(density.size() == mesh.triangle_count(), "density length != triangle count");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Complex> out(points.size());
  parallel_for(points.size(), opt.threads,
               [&](std::size_t p)
               {
                 const Vec3 &x = points[p];
                 if (winding_number(mesh, x) > 0.5)
                 {
                   out[p] = {nan, nan};
                   return;
                 }
                 Complex s{0.0, 0.0};
                 for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
                 {
                   if (density[t] == Complex{0.0, 0.0})
                   {
                     continue;
                   }
                   s += density[t] * panel_integral(kernel, mesh, t, x, is_near(mesh, t, x, opt.near_factor));
                 }
                 out[p] = s;
               });
  return out;
}

}  // namespace mscat

#endif  // MSCAT_BEM_HPP
