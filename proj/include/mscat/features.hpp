// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_FEATURES_HPP
#define MSCAT_FEATURES_HPP

#include "mscat/dataset.hpp"
#include "mscat/graphs.hpp"
#include "mscat/nn/tensor.hpp"

namespace mscat
{

using FeatureMatrix = nn::Matrix<double>;

struct FeatureConfig
{
  int pe_pairs = 8;
  double pe_min_wavelength = 0.1;
  double pe_max_wavelength = 20.0;

  void validate() const
  {
    MSCAT_REQUIRE(pe_pairs >= 1, "pe_pairs must be >= 1");
    MSCAT_REQUIRE(pe_min_wavelength > 0.0 && pe_min_wavelength < pe_max_wavelength,
                  "PE wavelengths must satisfy 0 < min < max");
  }
  friend bool operator==(const FeatureConfig &, const FeatureConfig &) = default;
};

//
// Per-sample network inputs. Direction slots list the first column of each
// 3-vector that transforms as a direction under rotations.
//
struct FeatureTensors
{
  FeatureMatrix nodes;
  FeatureMatrix boundary_edges;
  std::vector<FeatureMatrix> down_edges;
  std::vector<FeatureMatrix> up_edges;
  FeatureMatrix distant_edges;
  std::vector<std::size_t> node_direction_slots;
  std::vector<std::size_t> edge_direction_slots;

  friend bool operator==(const FeatureTensors &, const FeatureTensors &) = default;
};

inline double pe_wavelength(int f, const FeatureConfig &cfg)
{
  if (cfg.pe_pairs == 1)
  {
    return cfg.pe_min_wavelength;
  }
  return cfg.pe_min_wavelength *
         std::pow(cfg.pe_max_wavelength / cfg.pe_min_wavelength, static_cast<double>(f) / (cfg.pe_pairs - 1));
}

inline void sinusoidal_pe(double d, const FeatureConfig &cfg, double *out)
{
  MSCAT_REQUIRE(std::isfinite(d) && d >= 0.0, "sinusoidal_pe: distance must be finite and >= 0, got ", d);
  for (int f = 0; f < cfg.pe_pairs; ++f)
  {
    const double ph = 2.0 * kPi * d / pe_wavelength(f, cfg);
    out[2 * f] = std::sin(ph);
    out[2 * f + 1] = std::cos(ph);
  }
}

inline std::vector<double> sinusoidal_pe(double d, const FeatureConfig &cfg = {})
{
  std::vector<double> out(static_cast<std::size_t>(2 * cfg.pe_pairs));
  sinusoidal_pe(d, cfg, out.data());
  return out;
}

inline std::size_t node_feature_dim(ProblemVariant v, const FeatureConfig &cfg = {})
{
  const auto pe = static_cast<std::size_t>(2 * cfg.pe_pairs);
  switch (v)
  {
  case ProblemVariant::HelmholtzDirichlet:
    return pe + 3 + 1 + 2;
  case ProblemVariant::LaplaceDirichlet:
    return pe + 3 + 3 + 3;
  case ProblemVariant::HelmholtzNeumann:
    return 3 + 1 + 2 + pe + 3;
  }
  return 0;
}

inline std::size_t edge_feature_dim(ProblemVariant v, const FeatureConfig &cfg = {})
{
  const auto pe = static_cast<std::size_t>(2 * cfg.pe_pairs);
  return v == ProblemVariant::LaplaceDirichlet ? pe + 3 : pe + 3 + 1 + 2;
}

inline std::vector<std::size_t> node_direction_slots(ProblemVariant v, const FeatureConfig &cfg = {})
{
  const auto pe = static_cast<std::size_t>(2 * cfg.pe_pairs);
  switch (v)
  {
  case ProblemVariant::HelmholtzDirichlet:
    return {pe};
  case ProblemVariant::LaplaceDirichlet:
    return {pe, pe + 3};
  case ProblemVariant::HelmholtzNeumann:
    return {0, 6 + pe};
  }
  return {};
}

inline std::vector<std::size_t> edge_direction_slots(const FeatureConfig &cfg = {})
{
  return {static_cast<std::size_t>(2 * cfg.pe_pairs)};
}

namespace detail
{

inline void put3(double *out, const Vec3 &v)
{
  out[0] = v.x;
  out[1] = v.y;
  out[2] = v.z;
}

}  // namespace detail

//
// Node inputs on the boundary nodes. positions may differ from the mesh
// vertices (e.g. a rotated copy); the problem parameters must match them.
//
inline FeatureMatrix node_features(ProblemVariant variant, const ProblemSpec &spec, std::span<const Vec3> positions,
                                   const FeatureConfig &cfg = {})
{
  cfg.validate();
  const std::size_t dim = node_feature_dim(variant, cfg);
  const auto pe = static_cast<std::size_t>(2 * cfg.pe_pairs);
  FeatureMatrix m(positions.size(), dim);
  const double k = spec.wavenumber;
  Vec3 mean;
  if (variant == ProblemVariant::HelmholtzNeumann)
  {
    MSCAT_REQUIRE(!positions.empty(), "node_features: no nodes");
    for (const Vec3 &x : positions)
    {
      mean += x;
    }
    mean = mean / static_cast<double>(positions.size());
  }
  for (std::size_t i = 0; i < positions.size(); ++i)
  {
    const Vec3 &x = positions[i];
    double *row = m.row(i);
    switch (variant)
    {
    case ProblemVariant::HelmholtzDirichlet:
    {
      const double r = detail::source_distance(spec, x);
      sinusoidal_pe(r, cfg, row);
      detail::put3(row + pe, (spec.source - x) / r);
      row[pe + 3] = k;
      row[pe + 4] = std::sin(k * r);
      row[pe + 5] = std::cos(k * r);
      break;
    }
    case ProblemVariant::LaplaceDirichlet:
    {
      const double r = detail::source_distance(spec, x);
      sinusoidal_pe(r, cfg, row);
      detail::put3(row + pe, (spec.source - x) / r);
      detail::put3(row + pe + 3, spec.direction);
      const LaplaceBcTerms t = laplace_bc_terms(spec, x);
      row[pe + 6] = t.constant;
      row[pe + 7] = t.monopole;
      row[pe + 8] = t.dipole;
      break;
    }
    case ProblemVariant::HelmholtzNeumann:
    {
      detail::put3(row, spec.direction);
      row[3] = k;
      const double ph = k * dot(x, spec.direction);
      row[4] = std::sin(ph);
      row[5] = std::cos(ph);
      const double r = distance(x, mean);
      sinusoidal_pe(r, cfg, row + 6);
      const Vec3 u = r > 0.0 ? (mean - x) / r : Vec3{};
      detail::put3(row + 6 + pe, u);
      break;
    }
    }
  }
  return m;
}

//
// Edge inputs for a graph whose sources index src_pos and destinations
// index dst_pos. Zero-length edges only occur between a fine node and the
// coarse copy of itself; they are rejected unless allowed, and then carry
// a zero direction.
//
inline FeatureMatrix edge_features(ProblemVariant variant, double wavenumber, const EdgeList &edges,
                                   std::span<const Vec3> src_pos, std::span<const Vec3> dst_pos,
                                   const FeatureConfig &cfg = {}, bool allow_zero_length = false)
{
  cfg.validate();
  const std::size_t dim = edge_feature_dim(variant, cfg);
  const auto pe = static_cast<std::size_t>(2 * cfg.pe_pairs);
  FeatureMatrix m(edges.size(), dim);
  for (std::size_t e = 0; e < edges.size(); ++e)
  {
    MSCAT_REQUIRE(edges.src[e] < src_pos.size() && edges.dst[e] < dst_pos.size(), "edge_features: edge ", e,
                  " indexes outside the node sets");
    const Vec3 d = dst_pos[edges.dst[e]] - src_pos[edges.src[e]];
    const double len = norm(d);
    if (len == 0.0 && !allow_zero_length)
    {
      throw SingularityError(concat("edge_features: zero-length edge ", e));
    }
    double *row = m.row(e);
    sinusoidal_pe(len, cfg, row);
    detail::put3(row + pe, len > 0.0 ? d / len : Vec3{});
    if (variant != ProblemVariant::LaplaceDirichlet)
    {
      row[pe + 3] = wavenumber;
      row[pe + 4] = std::sin(wavenumber * len);
      row[pe + 5] = std::cos(wavenumber * len);
    }
  }
  return m;
}

inline FeatureTensors compute_features(ProblemVariant variant, const ProblemSpec &spec,
                                       std::span<const Vec3> positions, const MultiscaleGraphSet &graphs,
                                       const FeatureConfig &cfg = {})
{
  MSCAT_REQUIRE(positions.size() == graphs.boundary.nodes.size(), "compute_features: ", positions.size(),
                " positions for ", graphs.boundary.nodes.size(), " boundary nodes");
  FeatureTensors f;
  f.nodes = node_features(variant, spec, positions, cfg);
  const double k = spec.wavenumber;
  f.boundary_edges = edge_features(variant, k, graphs.boundary.edges, positions, positions, cfg);
  // Coarse nodes are copies of boundary nodes; look positions up through V^0.
  std::vector<std::vector<Vec3>> level_pos(graphs.level_nodes.size());
  level_pos[0].assign(positions.begin(), positions.end());
  for (std::size_t j = 1; j < graphs.level_nodes.size(); ++j)
  {
    for (std::uint32_t o : graphs.level_nodes[j].origin)
    {
      level_pos[j].push_back(level_pos[j - 1][o]);
    }
  }
  for (std::size_t j = 0; j < graphs.down.size(); ++j)
  {
    f.down_edges.push_back(edge_features(variant, k, graphs.down[j], level_pos[j], level_pos[j + 1], cfg, true));
    f.up_edges.push_back(edge_features(variant, k, graphs.up[j], level_pos[j + 1], level_pos[j], cfg, true));
  }
  f.distant_edges = edge_features(variant, k, graphs.distant.edges, level_pos.back(), level_pos.back(), cfg);
  f.node_direction_slots = node_direction_slots(variant, cfg);
  f.edge_direction_slots = edge_direction_slots(cfg);
  return f;
}

inline FeatureTensors compute_features(const SampleRecord &s, const MultiscaleGraphSet &graphs,
                                       const FeatureConfig &cfg = {})
{
  return compute_features(s.problem.variant, s.problem, s.scene.mesh.vertices, graphs, cfg);
}

namespace detail
{

inline void rotate_slots(FeatureMatrix &m, const std::vector<std::size_t> &slots, const Mat3 &R)
{
  for (std::size_t i = 0; i < m.rows; ++i)
  {
    double *row = m.row(i);
    for (std::size_t s : slots)
    {
      const Vec3 v = mscat::apply(R, Vec3{row[s], row[s + 1], row[s + 2]});
      put3(row + s, v);
    }
  }
}

}  // namespace detail

// Applies R to every direction slot; scalar slots are left untouched.
inline void rotate_direction_slots(FeatureTensors &f, const Mat3 &R)
{
  detail::rotate_slots(f.nodes, f.node_direction_slots, R);
  detail::rotate_slots(f.boundary_edges, f.edge_direction_slots, R);
  for (auto &m : f.down_edges)
  {
    detail::rotate_slots(m, f.edge_direction_slots, R);
  }
  for (auto &m : f.up_edges)
  {
    detail::rotate_slots(m, f.edge_direction_slots, R);
  }
  detail::rotate_slots(f.distant_edges, f.edge_direction_slots, R);
}

}  // namespace mscat

#endif  // MSCAT_FEATURES_HPP
