// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mscat/features.hpp"

using namespace mscat;

namespace
{

ProblemSpec spec_for(ProblemVariant v, const Scene &s, std::uint64_t seed)
{
  return sample_problem(v, s, seed);
}

GraphConfig desk_graphs() { return GraphConfig{3, 0.1, 2, 0.8, 5.0}; }

}  // namespace

TEST(PositionalEncoding, ZeroDistanceAndPeriodicity)
{
  const FeatureConfig cfg;
  const auto z = sinusoidal_pe(0.0, cfg);
  ASSERT_EQ(z.size(), 16u);
  for (std::size_t f = 0; f < 8; ++f)
  {
    EXPECT_EQ(z[2 * f], 0.0);
    EXPECT_EQ(z[2 * f + 1], 1.0);
  }
  const auto p = sinusoidal_pe(pe_wavelength(0, cfg), cfg);
  EXPECT_NEAR(p[0], 0.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(pe_wavelength(0, cfg), 0.1);
  EXPECT_DOUBLE_EQ(pe_wavelength(7, cfg), 20.0);
  // Geometric ladder: constant ratio between consecutive wavelengths.
  const double ratio = std::pow(200.0, 1.0 / 7.0);
  for (int f = 1; f < 8; ++f)
  {
    EXPECT_NEAR(pe_wavelength(f, cfg) / pe_wavelength(f - 1, cfg), ratio, 1e-12);
  }
  EXPECT_THROW(sinusoidal_pe(-1.0, cfg), PreconditionError);
  EXPECT_THROW(sinusoidal_pe(std::numeric_limits<double>::infinity(), cfg), PreconditionError);
}

TEST(Features, Dimensions)
{
  EXPECT_EQ(node_feature_dim(ProblemVariant::HelmholtzDirichlet), 22u);
  EXPECT_EQ(node_feature_dim(ProblemVariant::LaplaceDirichlet), 25u);
  EXPECT_EQ(node_feature_dim(ProblemVariant::HelmholtzNeumann), 25u);
  EXPECT_EQ(edge_feature_dim(ProblemVariant::LaplaceDirichlet), 19u);
  EXPECT_EQ(edge_feature_dim(ProblemVariant::HelmholtzDirichlet), 22u);
  EXPECT_EQ(edge_feature_dim(ProblemVariant::HelmholtzNeumann), 22u);
}

TEST(Features, HelmholtzDirichletNodeAtUnitDistance)
{
  ProblemSpec s;
  s.variant = ProblemVariant::HelmholtzDirichlet;
  s.source = {1.0, 2.0, 3.0};
  s.wavenumber = 2.0 * kPi;
  const std::vector<Vec3> x{{1.0, 2.0, 2.0}};
  const FeatureMatrix m = node_features(s.variant, s, x);
  ASSERT_EQ(m.cols, 22u);
  EXPECT_NEAR(m(0, 20), 0.0, 1e-12);
  EXPECT_NEAR(m(0, 21), 1.0, 1e-12);
  EXPECT_EQ(m(0, 19), 2.0 * kPi);
  EXPECT_NEAR(m(0, 16), 0.0, 1e-15);
  EXPECT_NEAR(m(0, 18), 1.0, 1e-15);
  const auto pe = sinusoidal_pe(1.0);
  for (std::size_t i = 0; i < 16; ++i)
  {
    EXPECT_EQ(m(0, i), pe[i]);
  }
}

TEST(Features, LaplaceBoundaryConditionSlots)
{
  ProblemSpec s;
  s.variant = ProblemVariant::LaplaceDirichlet;
  s.phi0 = 1.0;
  s.source = {0.0, 0.0, 0.0};
  s.direction = {0.0, 1.0, 0.0};
  const std::vector<Vec3> x{{0.3, -0.4, 1.2}};
  const FeatureMatrix m = node_features(s.variant, s, x);
  ASSERT_EQ(m.cols, 25u);
  EXPECT_EQ(m(0, 22), -1.0);
  EXPECT_EQ(m(0, 23), 0.0);
  EXPECT_EQ(m(0, 24), 0.0);
  EXPECT_EQ(m(0, 19), 0.0);
  EXPECT_EQ(m(0, 20), 1.0);
  // The three slots sum to the boundary value.
  s.phi1 = 0.7;
  s.phi2 = -0.3;
  const FeatureMatrix n = node_features(s.variant, s, x);
  EXPECT_NEAR(n(0, 22) + n(0, 23) + n(0, 24), laplace_dirichlet_bc(s, x)[0], 1e-14);
}

TEST(Features, NeumannUsesMeanPosition)
{
  ProblemSpec s;
  s.variant = ProblemVariant::HelmholtzNeumann;
  s.direction = {0.0, 0.0, 1.0};
  s.wavenumber = 2.0;
  const std::vector<Vec3> x{{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
  const FeatureMatrix m = node_features(s.variant, s, x);
  ASSERT_EQ(m.cols, 25u);
  EXPECT_EQ(m(0, 2), 1.0);
  EXPECT_EQ(m(0, 3), 2.0);
  EXPECT_EQ(m(0, 5), 1.0);  // x . v = 0
  EXPECT_EQ(m(0, 22), -1.0);
  EXPECT_EQ(m(1, 22), 1.0);
  const auto pe = sinusoidal_pe(1.0);
  EXPECT_EQ(m(0, 6), pe[0]);
}

TEST(Features, EdgeExamples)
{
  EdgeList e;
  e.push(0, 1);
  const std::vector<Vec3> p{{0, 0, 0}, {0, 0, 2}};
  const double k = kPi;  // wavelength 2 equals the edge length
  const FeatureMatrix h = edge_features(ProblemVariant::HelmholtzDirichlet, k, e, p, p);
  ASSERT_EQ(h.cols, 22u);
  EXPECT_EQ(h(0, 16), 0.0);
  EXPECT_EQ(h(0, 17), 0.0);
  EXPECT_EQ(h(0, 18), 1.0);
  EXPECT_EQ(h(0, 19), k);
  EXPECT_NEAR(h(0, 20), 0.0, 1e-12);
  EXPECT_NEAR(h(0, 21), 1.0, 1e-12);
  const FeatureMatrix l = edge_features(ProblemVariant::LaplaceDirichlet, 0.0, e, p, p);
  ASSERT_EQ(l.cols, 19u);
  EXPECT_EQ(l(0, 18), 1.0);
  const std::vector<Vec3> same{{1, 1, 1}, {1, 1, 1}};
  EXPECT_THROW(edge_features(ProblemVariant::LaplaceDirichlet, 0.0, e, same, same), SingularityError);
  const FeatureMatrix z = edge_features(ProblemVariant::LaplaceDirichlet, 0.0, e, same, same, {}, true);
  EXPECT_EQ(z(0, 16), 0.0);
}

TEST(Features, TensorShapesFollowGraphs)
{
  const Scene scene = sample_scene(3, 4, 0.4);
  const MultiscaleGraphSet g = build_multiscale_graphs(scene.mesh, desk_graphs(), 3);
  for (ProblemVariant v :
       {ProblemVariant::HelmholtzDirichlet, ProblemVariant::LaplaceDirichlet, ProblemVariant::HelmholtzNeumann})
  {
    const ProblemSpec s = spec_for(v, scene, 9);
    const FeatureTensors f = compute_features(v, s, scene.mesh.vertices, g);
    EXPECT_EQ(f.nodes.rows, scene.mesh.vertex_count());
    EXPECT_EQ(f.nodes.cols, node_feature_dim(v));
    EXPECT_EQ(f.boundary_edges.rows, g.boundary.edges.size());
    ASSERT_EQ(f.down_edges.size(), 2u);
    EXPECT_EQ(f.down_edges[1].rows, g.down[1].size());
    EXPECT_EQ(f.up_edges[0].rows, g.up[0].size());
    EXPECT_EQ(f.distant_edges.rows, g.distant.edges.size());
    for (double x : f.nodes.data)
    {
      EXPECT_TRUE(std::isfinite(x));
    }
  }
}

TEST(Features, RotationInvariantScalarsAndEquivariantDirections)
{
  const Scene scene = sample_scene(3, 8, 0.4);
  const MultiscaleGraphSet g = build_multiscale_graphs(scene.mesh, desk_graphs(), 3);
  Rng rng(77);
  for (ProblemVariant v :
       {ProblemVariant::HelmholtzDirichlet, ProblemVariant::LaplaceDirichlet, ProblemVariant::HelmholtzNeumann})
  {
    const ProblemSpec s = spec_for(v, scene, 2);
    const Mat3 R = random_rotation(rng);
    std::vector<Vec3> rp;
    for (const Vec3 &x : scene.mesh.vertices)
    {
      rp.push_back(mscat::apply(R, x));
    }
    ProblemSpec rs = s;
    rs.source = mscat::apply(R, s.source);
    rs.direction = mscat::apply(R, s.direction);
    const FeatureTensors a = compute_features(v, s, scene.mesh.vertices, g);
    const FeatureTensors b = compute_features(v, rs, rp, g);
    FeatureTensors a_rot = a;
    rotate_direction_slots(a_rot, R);
    auto close = [](const FeatureMatrix &x, const FeatureMatrix &y)
    {
      ASSERT_EQ(x.data.size(), y.data.size());
      for (std::size_t i = 0; i < x.data.size(); ++i)
      {
        ASSERT_NEAR(x.data[i], y.data[i], 1e-9) << "entry " << i;
      }
    };
    close(a_rot.nodes, b.nodes);
    close(a_rot.boundary_edges, b.boundary_edges);
    close(a_rot.distant_edges, b.distant_edges);
    close(a_rot.down_edges[0], b.down_edges[0]);
    close(a_rot.up_edges[1], b.up_edges[1]);
    // rotate_direction_slots leaves every scalar slot bitwise unchanged.
    for (std::size_t c = 0; c < a.nodes.cols; ++c)
    {
      bool direction = false;
      for (std::size_t s0 : a.node_direction_slots)
      {
        direction = direction || (c >= s0 && c < s0 + 3);
      }
      if (!direction)
      {
        for (std::size_t r = 0; r < a.nodes.rows; ++r)
        {
          ASSERT_EQ(a.nodes(r, c), a_rot.nodes(r, c));
        }
      }
    }
  }
}

TEST(Features, TranslationInvariance)
{
  const Scene scene = sample_scene(2, 1, 0.4);
  const MultiscaleGraphSet g = build_multiscale_graphs(scene.mesh, desk_graphs(), 3);
  const Vec3 t{0.7, -1.1, 0.4};
  for (ProblemVariant v :
       {ProblemVariant::HelmholtzDirichlet, ProblemVariant::LaplaceDirichlet, ProblemVariant::HelmholtzNeumann})
  {
    ProblemSpec s = spec_for(v, scene, 5);
    std::vector<Vec3> tp;
    for (const Vec3 &x : scene.mesh.vertices)
    {
      tp.push_back(x + t);
    }
    ProblemSpec ts = s;
    ts.source = s.source + t;
    const FeatureTensors a = compute_features(v, s, scene.mesh.vertices, g);
    const FeatureTensors b = compute_features(v, ts, tp, g);
    // The Neumann plane-wave phase k x.v is the one slot that references the origin.
    for (std::size_t r = 0; r < a.nodes.rows; ++r)
    {
      for (std::size_t c = 0; c < a.nodes.cols; ++c)
      {
        if (v == ProblemVariant::HelmholtzNeumann && (c == 4 || c == 5))
        {
          continue;
        }
        ASSERT_NEAR(a.nodes(r, c), b.nodes(r, c), 1e-9);
      }
    }
    for (std::size_t i = 0; i < a.boundary_edges.data.size(); ++i)
    {
      ASSERT_NEAR(a.boundary_edges.data[i], b.boundary_edges.data[i], 1e-9);
    }
  }
}
