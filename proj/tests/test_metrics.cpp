// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "mscat/metrics.hpp"

using namespace mscat;

namespace
{

using C = Complex;

std::vector<C> random_complex(std::size_t n, Rng &rng)
{
  std::vector<C> v(n);
  for (auto &x : v)
  {
    x = C(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
  }
  return v;
}

TriangleMesh points_mesh(const std::vector<std::pair<Vec3, std::uint32_t>> &pts)
{
  TriangleMesh m;
  for (const auto &[p, id] : pts)
  {
    m.vertices.push_back(p);
    m.vertex_obstacle.push_back(id);
  }
  return m;
}

}  // namespace

TEST(ErrRel, Examples)
{
  const std::vector<C> t{{1.0, 0.0}, {-1.0, 0.0}};
  EXPECT_EQ(err_rel(t, t), 0.0);
  const std::vector<C> pos{{1.0, 0.0}, {3.0, 0.0}, {0.5, 0.0}};
  const std::vector<C> twice{{2.0, 0.0}, {6.0, 0.0}, {1.0, 0.0}};
  EXPECT_EQ(err_rel(twice, pos), 1.0);
  EXPECT_NEAR(err_rel(std::vector<C>{{1.1, 0.0}, {-0.8, 0.0}}, t), 0.15, 1e-15);
  EXPECT_THROW(err_rel(t, std::vector<C>{{0, 0}, {0, 0}}), PreconditionError);
  EXPECT_THROW(err_rel(t, std::vector<C>{{1, 0}}), PreconditionError);
}

TEST(ErrAmpl, Examples)
{
  Rng rng(1);
  const auto t = random_complex(20, rng);
  std::vector<C> rotated(t.size()), scaled(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
  {
    rotated[i] = t[i] * std::polar(1.0, rng.uniform(-kPi, kPi));
    scaled[i] = 1.5 * t[i];
  }
  EXPECT_NEAR(err_ampl(rotated, t), 0.0, 1e-15);
  EXPECT_NEAR(err_ampl(scaled, t), 0.5, 1e-15);
  EXPECT_EQ(err_ampl(std::vector<C>{{2.0, 0.0}, {0.0, 1.0}}, std::vector<C>{{1.0, 0.0}, {0.0, 2.0}}), 0.75);
  EXPECT_THROW(err_ampl(std::vector<C>{{1, 0}}, std::vector<C>{{0, 0}}), PreconditionError);
}

TEST(ErrAngle, Examples)
{
  const std::vector<C> t{{1.0, 1.0}, {-2.0, 0.5}};
  EXPECT_EQ(err_angle(t, t), 0.0);
  EXPECT_NEAR(err_angle(std::vector<C>{-t[0], -t[1]}, t), kPi, 1e-15);
  EXPECT_NEAR(err_angle(std::vector<C>{std::polar(1.0, 3.0)}, std::vector<C>{std::polar(1.0, -3.0)}),
              2.0 * kPi - 6.0, 1e-12);
  EXPECT_NEAR(2.0 * kPi - 6.0, 0.28319, 1e-5);
  EXPECT_THROW(err_angle(std::vector<C>{{0, 0}}, std::vector<C>{{1, 0}}), PreconditionError);
}

TEST(Metrics, RandomizedProperties)
{
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial)
  {
    const std::size_t n = 1 + rng.index(50);
    const auto p = random_complex(n, rng);
    const auto t = random_complex(n, rng);
    const double a = err_angle(p, t);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, kPi);
    // Complex scale c != 0: err_rel is unchanged.
    const C c = std::polar(rng.uniform(0.1, 10.0), rng.uniform(-kPi, kPi));
    std::vector<C> cp(n), ct(n), pp(n), pt(n);
    for (std::size_t i = 0; i < n; ++i)
    {
      cp[i] = c * p[i];
      ct[i] = c * t[i];
      pp[i] = p[i] * std::polar(1.0, rng.uniform(-kPi, kPi));
      pt[i] = t[i] * std::polar(1.0, rng.uniform(-kPi, kPi));
    }
    EXPECT_NEAR(err_rel(cp, ct), err_rel(p, t), 1e-12 * (1.0 + err_rel(p, t)));
    EXPECT_NEAR(err_ampl(pp, pt), err_ampl(p, t), 1e-12);
  }
}

TEST(Dispersion, Examples)
{
  const TriangleMesh two = points_mesh({{{0, 0, 0}, 0}, {{0, 0, 1}, 0}, {{3, 4, 0}, 1}, {{9, 9, 9}, 1}});
  EXPECT_DOUBLE_EQ(obstacle_dispersion(two, 2), 5.0);
  const TriangleMesh three = points_mesh({{{0, 0, 0}, 0}, {{1, 0, 0}, 1}, {{6, 0, 0}, 2}});
  EXPECT_DOUBLE_EQ(obstacle_dispersion(three, 3), 5.0);
  EXPECT_THROW(obstacle_dispersion(two, 1), PreconditionError);

  // Three collinear spheres with gaps 1 and 5, brute-forced on real meshes.
  const TriangleMesh spheres = merge_meshes({mesh_ellipsoid({{0, 0, 0}, {1, 1, 1}}, MeshingOptions{0.3, 7}, 0),
                                             mesh_ellipsoid({{3, 0, 0}, {1, 1, 1}}, MeshingOptions{0.3, 7}, 1),
                                             mesh_ellipsoid({{10, 0, 0}, {1, 1, 1}}, MeshingOptions{0.3, 7}, 2)});
  const double d = obstacle_dispersion(spheres, 3);
  EXPECT_GE(d, 5.0 - 1e-12);
  EXPECT_LT(d, 5.2);
  TriangleMesh moved = spheres;
  for (auto &v : moved.vertices)
  {
    v = v + Vec3{1.5, -2.0, 0.25};
  }
  EXPECT_NEAR(obstacle_dispersion(moved, 3), d, 1e-12);
}

TEST(Evaluate, ExactPredictorAndSeedStatistics)
{
  GenerationOptions opt;
  opt.n_obstacles = 2;
  opt.target_edge_length = 0.5;
  std::vector<SampleRecord> data;
  for (std::uint64_t s = 0; s < 3; ++s)
  {
    data.push_back(generate_sample(ProblemVariant::HelmholtzDirichlet, s, opt).record);
  }
  const MetricReport exact =
      evaluate_predictions(data, [&](std::size_t i, int) { return data[i].trace.values; }, 5);
  EXPECT_EQ(exact.mean.err_rel, 0.0);
  EXPECT_EQ(exact.mean.err_ampl, 0.0);
  EXPECT_EQ(exact.mean.err_angle, 0.0);
  EXPECT_EQ(exact.per_seed.size(), 5u);
  EXPECT_EQ(exact.relative_std.err_rel, 0.0);

  // Seed-dependent scaling (1 + 0.1 k) gives err_rel = 0.1 k and a known spread.
  const MetricReport r = evaluate_predictions(
      data,
      [&](std::size_t i, int k)
      {
        auto v = data[i].trace.values;
        for (auto &x : v)
        {
          x *= 1.0 + 0.1 * (k + 1);
        }
        return v;
      },
      5);
  EXPECT_NEAR(r.mean.err_rel, 0.3, 1e-12);
  const double sd = std::sqrt((0.04 + 0.01 + 0.0 + 0.01 + 0.04) / 4.0);
  EXPECT_NEAR(r.relative_std.err_rel, sd / 0.3, 1e-9);
  EXPECT_NEAR(r.samples[1].err_rel, 0.3, 1e-12);
  EXPECT_EQ(r.samples[2].sample_id, 2u);
  EXPECT_EQ(r.samples[0].gmres_iterations, data[0].gmres_iterations);
  EXPECT_NEAR(r.samples[0].wavenumber, data[0].problem.wavenumber, 0.0);
  EXPECT_NEAR(r.samples[0].dispersion, obstacle_dispersion(data[0].scene), 0.0);

  const auto path = std::filesystem::temp_directory_path() / "mscat_test_metrics.csv";
  write_metrics_csv(r, path);
  std::ifstream f(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(f, l);)
  {
    lines.push_back(l);
  }
  ASSERT_EQ(lines.size(), data.size() + 1);
  EXPECT_EQ(lines[0], "sample_id,mae,gmres_iterations,wavenumber,dispersion,err_rel,err_ampl,err_angle");
  EXPECT_EQ(lines[1].substr(0, 2), "0,");
}

TEST(Evaluate, ConstantBaseline)
{
  GenerationOptions opt;
  opt.n_obstacles = 2;
  opt.target_edge_length = 0.5;
  std::vector<SampleRecord> data;
  for (std::uint64_t s = 0; s < 2; ++s)
  {
    data.push_back(generate_sample(ProblemVariant::LaplaceDirichlet, s + 10, opt).record);
  }
  const Complex m = mean_trace(data);
  const double direct = 0.5 * (err_rel(std::vector<C>(data[0].trace.values.size(), m), data[0].trace.values) +
                               err_rel(std::vector<C>(data[1].trace.values.size(), m), data[1].trace.values));
  EXPECT_DOUBLE_EQ(constant_predictor_err_rel(data), direct);
}
