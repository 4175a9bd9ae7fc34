// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mscat/geometry.hpp"

using namespace mscat;

TEST(MeshEllipsoid, LargeTargetGivesIcosahedron)
{
  const TriangleMesh m = mesh_ellipsoid({{0, 0, 0}, {1, 1, 1}}, 10.0);
  EXPECT_EQ(m.vertex_count(), 12u);
  EXPECT_EQ(m.triangle_count(), 20u);
  EXPECT_TRUE(is_watertight(m));
}

TEST(MeshEllipsoid, UnitSphereAreaNearFourPi)
{
  const TriangleMesh m = mesh_ellipsoid({{0, 0, 0}, {1, 1, 1}}, 0.3);
  EXPECT_NEAR(m.total_area(), 4.0 * kPi, 0.05 * 4.0 * kPi);
}

TEST(MeshEllipsoid, TranslatedSphereVerticesOnSurface)
{
  const TriangleMesh m = mesh_ellipsoid({{2, 0, 0}, {1, 1, 1}}, 0.3);
  for (const Vec3 &v : m.vertices)
  {
    EXPECT_NEAR(distance(v, {2, 0, 0}), 1.0, 1e-12);
  }
}

TEST(MeshEllipsoid, MeanEdgeMeetsTargetAtSmallestDepth)
{
  const Ellipsoid e{{0, 0, 0}, {1.2, 0.5, 0.8}};
  const double target = 0.2;
  const TriangleMesh m = mesh_ellipsoid(e, target);
  auto mean_edge = [](const TriangleMesh &mesh)
  {
    double s = 0.0;
    int n = 0;
    for (const auto &[edge, count] : edge_incidence(mesh))
    {
      s += distance(mesh.vertices[edge.first], mesh.vertices[edge.second]);
      ++n;
    }
    return s / n;
  };
  EXPECT_LE(mean_edge(m), target);
  const int depth = ellipsoid_depth(e, MeshingOptions{target, 7});
  ASSERT_GT(depth, 0);
  EXPECT_GT(mean_edge(mesh_ellipsoid_at_depth(e, depth - 1)), target);
}

TEST(MeshEllipsoid, NormalsUnitOutwardAndAnalytic)
{
  const Ellipsoid e{{0.5, -1, 2}, {1.5, 0.3, 0.7}};
  const TriangleMesh m = mesh_ellipsoid(e, 0.15);
  for (std::size_t i = 0; i < m.vertex_count(); ++i)
  {
    const Vec3 &n = m.vertex_normals[i];
    const Vec3 d = m.vertices[i] - e.center;
    EXPECT_NEAR(norm(n), 1.0, 1e-9);
    EXPECT_GT(dot(n, d), 0.0);
    // Gradient of the implicit function is parallel to the normal.
    const Vec3 g{d.x / (1.5 * 1.5), d.y / (0.3 * 0.3), d.z / (0.7 * 0.7)};
    EXPECT_NEAR(norm(cross(n, normalized(g))), 0.0, 1e-12);
  }
}

TEST(MeshEllipsoid, TrianglesCounterClockwiseFromOutside)
{
  const Ellipsoid e{{0, 0, 0}, {1, 0.6, 0.4}};
  const TriangleMesh m = mesh_ellipsoid(e, 0.2);
  for (std::size_t t = 0; t < m.triangle_count(); ++t)
  {
    const auto &tri = m.triangles[t];
    const Vec3 n = cross(m.vertices[tri[1]] - m.vertices[tri[0]], m.vertices[tri[2]] - m.vertices[tri[0]]);
    EXPECT_GT(dot(n, m.triangle_centroids[t] - e.center), 0.0);
    EXPECT_GT(m.triangle_areas[t], 0.0);
  }
}

TEST(MeshEllipsoid, DepthCapIsEnforced)
{
  EXPECT_THROW(mesh_ellipsoid({{0, 0, 0}, {1, 1, 1}}, MeshingOptions{1e-4, 3}), Error);
  EXPECT_THROW(mesh_ellipsoid({{0, 0, 0}, {1, 1, 1}}, 0.0), PreconditionError);
}

TEST(MeshEllipsoid, AreaErrorDecreasesWithDepth)
{
  double prev = std::numeric_limits<double>::infinity();
  for (int d = 0; d <= 4; ++d)
  {
    const double err = std::abs(mesh_ellipsoid_at_depth({{0, 0, 0}, {1, 1, 1}}, d).total_area() - 4.0 * kPi);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(MeshEllipsoid, RotatedAxesMatchRotatedMesh)
{
  Rng rng(3);
  const Mat3 R = random_rotation(rng);
  const Ellipsoid e{{1, 2, -0.5}, {1.1, 0.4, 0.7}};
  const TriangleMesh a = mesh_ellipsoid_at_depth(e, 2);
  const TriangleMesh b = mesh_ellipsoid_at_depth(e.rotated(R), 2);
  for (std::size_t i = 0; i < a.vertex_count(); ++i)
  {
    EXPECT_NEAR(distance(mscat::apply(R, a.vertices[i]), b.vertices[i]), 0.0, 1e-12);
    EXPECT_NEAR(distance(mscat::apply(R, a.vertex_normals[i]), b.vertex_normals[i]), 0.0, 1e-12);
  }
}

TEST(SampleScene, SingleObstacleInsideBox)
{
  for (std::uint64_t seed = 0; seed < 10; ++seed)
  {
    const Scene s = sample_scene(1, seed, 0.3);
    ASSERT_EQ(s.ellipsoids.size(), 1u);
    for (const Vec3 &v : s.mesh.vertices)
    {
      EXPECT_LE(std::max({std::abs(v.x), std::abs(v.y), std::abs(v.z)}), 5.0);
    }
  }
}

TEST(SampleScene, SameSeedBitIdentical)
{
  EXPECT_EQ(sample_scene(3, 7, 0.3), sample_scene(3, 7, 0.3));
  EXPECT_FALSE(sample_scene(3, 7, 0.3) == sample_scene(3, 8, 0.3));
}

TEST(SampleScene, HundredSeedsAreSeparatedAndValid)
{
  SceneOptions opt;
  opt.meshing.target_edge_length = 10.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
  {
    const Scene s = sample_scene(3, seed, opt);
    ASSERT_EQ(s.ellipsoids.size(), 3u);
    for (std::size_t a = 0; a < 3; ++a)
    {
      const Vec3 &ax = s.ellipsoids[a].semi_axes;
      for (double v : {ax.x, ax.y, ax.z})
      {
        EXPECT_GE(v, 0.3);
        EXPECT_LE(v, 1.5);
      }
      for (std::size_t b = a + 1; b < 3; ++b)
      {
        const Ellipsoid &p = s.ellipsoids[a], &q = s.ellipsoids[b];
        EXPECT_GT(distance(p.center, q.center), p.max_semi_axis() + q.max_semi_axis() + 0.05);
      }
    }
    EXPECT_TRUE(is_watertight(s.mesh));
  }
}

TEST(SampleScene, EachObstacleMeshIsWatertight)
{
  const Scene s = sample_scene(3, 11, 0.3);
  for (std::uint32_t o = 0; o < 3; ++o)
  {
    TriangleMesh part;
    part.vertices = s.mesh.vertices;
    for (std::size_t t = 0; t < s.mesh.triangle_count(); ++t)
    {
      if (s.mesh.triangle_obstacle[t] == o)
      {
        part.triangles.push_back(s.mesh.triangles[t]);
      }
    }
    EXPECT_TRUE(is_watertight(part));
  }
}

TEST(SampleScene, RejectionCapReported)
{
  SceneOptions opt;
  opt.environment_half_extent = 1.6;
  opt.max_consecutive_rejections = 50;
  opt.meshing.target_edge_length = 10.0;
  try
  {
    sample_scene(20, 4, opt);
    FAIL() << "expected a sampling error";
  }
  catch (const SamplingError &e)
  {
    EXPECT_NE(std::string(e.what()).find("seed 4"), std::string::npos);
  }
  EXPECT_THROW(sample_scene(0, 1, 0.3), PreconditionError);
}
