// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_SELFTEST_HPP
#define MSCAT_SELFTEST_HPP

#include "mscat/bem.hpp"
#include "mscat/geometry.hpp"

namespace mscat
{

struct OracleResult
{
  std::string name;
  double error = 0.0;  // worst relative error
  double tolerance = 0.0;
  bool passed = false;
};

//
// Unit sphere with u = 1 on the boundary: the density is -1 and the exterior
// potential is 1/R. Reports the worst of both errors.
//
inline OracleResult sphere_laplace_oracle(double edge = 0.3, int threads = 1)
{
  const Ellipsoid e{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  const TriangleMesh mesh = mesh_ellipsoid(e, edge);
  SolveOptions opt;
  opt.rtol = 1e-10;
  opt.threads = threads;
  const std::vector<Complex> rhs(mesh.triangle_count(), Complex(1.0, 0.0));
  const auto sol = solve_dirichlet(mesh, Kernel::laplace(), rhs, opt);
  double err = 0.0;
  for (const Complex &p : sol.density)
  {
    err = std::max(err, std::abs(p - Complex(-1.0, 0.0)));
  }
  const std::vector<Vec3> probes{{2.0, 0.0, 0.0}, {0.0, -2.0, 0.0}, {0.0, 0.0, 2.0}, {1.2, 1.2, 1.0583005244258363}};
  AssemblyOptions aopt;
  aopt.threads = threads;
  const auto u = evaluate_single_layer_potential(mesh, Kernel::laplace(), sol.density, probes, aopt);
  for (const Complex &v : u)
  {
    err = std::max(err, std::abs(v - Complex(0.5, 0.0)) / 0.5);
  }
  return {"sphere_laplace", err, 0.02, err <= 0.02};
}

//
// Exterior field of a point source inside a sphere: boundary data G(x - x_int)
// must reproduce G(x - x_int) at probes 2 < |x| < 5.
//
inline OracleResult manufactured_helmholtz_oracle(double k = 3.0, double radius = 0.8, double edge = 0.2,
                                                  int n_probes = 20, std::uint64_t seed = 11, int threads = 1)
{
  const Ellipsoid e{{0.0, 0.0, 0.0}, {radius, radius, radius}};
  const TriangleMesh mesh = mesh_ellipsoid(e, edge);
  const Kernel kernel = Kernel::helmholtz(k);
  const Vec3 x_int{0.1 * radius, -0.15 * radius, 0.05 * radius};
  std::vector<Complex> rhs(mesh.triangle_count());
  for (std::size_t t = 0; t < rhs.size(); ++t)
  {
    rhs[t] = greens(kernel, mesh.triangle_centroids[t], x_int);
  }
  SolveOptions opt;
  opt.rtol = 1e-10;
  opt.threads = threads;
  const auto sol = solve_dirichlet(mesh, kernel, rhs, opt);
  Rng rng(seed);
  std::vector<Vec3> probes;
  for (int i = 0; i < n_probes; ++i)
  {
    const Vec3 dir = rng.unit_vector();
    probes.push_back(dir * rng.uniform(2.0, 5.0));
  }
  AssemblyOptions aopt;
  aopt.threads = threads;
  const auto u = evaluate_single_layer_potential(mesh, kernel, sol.density, probes, aopt);
  double err = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i)
  {
    const Complex exact = greens(kernel, probes[i], x_int);
    err = std::max(err, std::abs(u[i] - exact) / std::abs(exact));
  }
  return {"manufactured_helmholtz", err, 0.02, err <= 0.02};
}

inline std::vector<OracleResult> run_selftest(int threads = 1)
{
  return {sphere_laplace_oracle(0.3, threads), manufactured_helmholtz_oracle(3.0, 0.8, 0.2, 20, 11, threads)};
}

}  // namespace mscat

#endif  // MSCAT_SELFTEST_HPP
