// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_GEOMETRY_HPP
#define MSCAT_GEOMETRY_HPP

#include <map>
#include <utility>

#include "mscat/core.hpp"

namespace mscat
{

struct Ellipsoid
{
  Vec3 center;
  Vec3 semi_axes{1.0, 1.0, 1.0};
  // Columns are the principal directions (local to world rotation).
  Mat3 axes = identity3();

  double max_semi_axis() const { return std::max({semi_axes.x, semi_axes.y, semi_axes.z}); }

  Vec3 to_local(const Vec3 &p) const { return mscat::apply(transpose(axes), p - center); }

  // Value of the implicit function sum(l_i^2 / a_i^2) in local coordinates; < 1 inside.
  double implicit(const Vec3 &p) const
  {
    const Vec3 d = to_local(p);
    return d.x * d.x / (semi_axes.x * semi_axes.x) + d.y * d.y / (semi_axes.y * semi_axes.y) +
           d.z * d.z / (semi_axes.z * semi_axes.z);
  }

  bool contains(const Vec3 &p) const { return implicit(p) < 1.0; }

  // Outward unit normal of the level set through p.
  Vec3 normal_at(const Vec3 &p) const
  {
    const Vec3 d = to_local(p);
    return normalized(mscat::apply(axes, Vec3{d.x / (semi_axes.x * semi_axes.x), d.y / (semi_axes.y * semi_axes.y),
                                   d.z / (semi_axes.z * semi_axes.z)}));
  }

  // Same surface after the rigid rotation x -> R x about the origin.
  Ellipsoid rotated(const Mat3 &R) const { return {mscat::apply(R, center), semi_axes, multiply(R, axes)}; }

  friend bool operator==(const Ellipsoid &, const Ellipsoid &) = default;
};

using Triangle = std::array<std::uint32_t, 3>;

//
// Closed triangulated surface, possibly made of several obstacles. Triangles
// are counter-clockwise seen from outside.
//
struct TriangleMesh
{
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> vertex_normals;
  std::vector<double> triangle_areas;
  std::vector<Vec3> triangle_centroids;
  std::vector<std::uint32_t> vertex_obstacle;
  std::vector<std::uint32_t> triangle_obstacle;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  // Recomputes areas and centroids from vertices and triangles.
  void update_triangle_data()
  {
    triangle_areas.resize(triangles.size());
    triangle_centroids.resize(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t)
    {
      const Vec3 &a = vertices[triangles[t][0]];
      const Vec3 &b = vertices[triangles[t][1]];
      const Vec3 &c = vertices[triangles[t][2]];
      triangle_areas[t] = 0.5 * norm(cross(b - a, c - a));
      triangle_centroids[t] = (a + b + c) / 3.0;
    }
  }

  double total_area() const
  {
    double s = 0.0;
    for (double a : triangle_areas)
    {
      s += a;
    }
    return s;
  }

  // Largest distance between two vertices of triangle t.
  double triangle_diameter(std::size_t t) const
  {
    const Vec3 &a = vertices[triangles[t][0]];
    const Vec3 &b = vertices[triangles[t][1]];
    const Vec3 &c = vertices[triangles[t][2]];
    return std::max({distance(a, b), distance(b, c), distance(c, a)});
  }

  friend bool operator==(const TriangleMesh &, const TriangleMesh &) = default;
};

struct Scene
{
  std::vector<Ellipsoid> ellipsoids;
  TriangleMesh mesh;
  double environment_half_extent = 5.0;

  std::size_t obstacle_count() const { return ellipsoids.size(); }

  bool inside_any(const Vec3 &p) const
  {
    return std::any_of(ellipsoids.begin(), ellipsoids.end(),
                       [&](const Ellipsoid &e) { return e.contains(p); });
  }

  friend bool operator==(const Scene &, const Scene &) = default;
};

struct MeshingOptions
{
  double target_edge_length = 0.1;
  int max_depth = 7;
};

namespace detail
{

struct Icosphere
{
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

inline Icosphere icosahedron()
{
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere s;
  s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto &v : s.vertices)
  {
    v = normalized(v);
  }
  s.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return s;
}

// One 1-to-4 split with midpoints projected back onto the unit sphere.
inline Icosphere subdivide(const Icosphere &in)
{
  Icosphere out;
  out.vertices = in.vertices;
  out.triangles.reserve(in.triangles.size() * 4);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
  auto mid = [&](std::uint32_t a, std::uint32_t b)
  {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end())
    {
      return it->second;
    }
    const auto id = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(normalized(out.vertices[a] + out.vertices[b]));
    midpoint.emplace(key, id);
    return id;
  };
  for (const auto &tri : in.triangles)
  {
    const std::uint32_t ab = mid(tri[0], tri[1]);
    const std::uint32_t bc = mid(tri[1], tri[2]);
    const std::uint32_t ca = mid(tri[2], tri[0]);
    out.triangles.push_back({tri[0], ab, ca});
    out.triangles.push_back({tri[1], bc, ab});
    out.triangles.push_back({tri[2], ca, bc});
    out.triangles.push_back({ab, bc, ca});
  }
  return out;
}

inline const Icosphere &unit_icosphere(int depth)
{
  static const std::vector<Icosphere> cache = []
  {
    std::vector<Icosphere> v{icosahedron()};
    for (int d = 1; d <= 8; ++d)
    {
      v.push_back(subdivide(v.back()));
    }
    return v;
  }();
  MSCAT_REQUIRE(depth >= 0 && depth < static_cast<int>(cache.size()),
                "icosphere depth ", depth, " out of range");
  return cache[static_cast<std::size_t>(depth)];
}

inline Vec3 map_to_ellipsoid(const Ellipsoid &e, const Vec3 &unit)
{
  return e.center + mscat::apply(e.axes, Vec3{e.semi_axes.x * unit.x, e.semi_axes.y * unit.y, e.semi_axes.z * unit.z});
}

inline double mean_edge_length(const Ellipsoid &e, const Icosphere &s)
{
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto &tri : s.triangles)
  {
    for (int k = 0; k < 3; ++k)
    {
      const std::uint32_t a = tri[k], b = tri[(k + 1) % 3];
      // Each undirected edge appears once with a < b across the closed mesh.
      if (a < b)
      {
        sum += distance(map_to_ellipsoid(e, s.vertices[a]), map_to_ellipsoid(e, s.vertices[b]));
        ++count;
      }
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace detail

// Icosphere mesh of an ellipsoid at a fixed subdivision depth.
inline TriangleMesh mesh_ellipsoid_at_depth(const Ellipsoid &e, int depth,
                                            std::uint32_t obstacle_id = 0)
{
  MSCAT_REQUIRE(e.semi_axes.x > 0 && e.semi_axes.y > 0 && e.semi_axes.z > 0,
                "ellipsoid semi-axes must be positive");
  const auto &s = detail::unit_icosphere(depth);
  TriangleMesh m;
  m.vertices.reserve(s.vertices.size());
  m.vertex_normals.reserve(s.vertices.size());
  for (const auto &u : s.vertices)
  {
    const Vec3 p = detail::map_to_ellipsoid(e, u);
    m.vertices.push_back(p);
    m.vertex_normals.push_back(e.normal_at(p));
  }
  m.triangles = s.triangles;
  m.vertex_obstacle.assign(m.vertices.size(), obstacle_id);
  m.triangle_obstacle.assign(m.triangles.size(), obstacle_id);
  m.update_triangle_data();
  return m;
}

// Smallest subdivision depth whose scaled mean edge length is at most target.
inline int ellipsoid_depth(const Ellipsoid &e, const MeshingOptions &opt)
{
  MSCAT_REQUIRE(opt.target_edge_length > 0, "target edge length must be positive");
  for (int depth = 0; depth <= opt.max_depth; ++depth)
  {
    if (detail::mean_edge_length(e, detail::unit_icosphere(depth)) <= opt.target_edge_length)
    {
      return depth;
    }
  }
  throw Error(concat("mesh_ellipsoid: target edge length ", opt.target_edge_length,
                     " needs subdivision depth above the cap ", opt.max_depth));
}

inline TriangleMesh mesh_ellipsoid(const Ellipsoid &e, const MeshingOptions &opt,
                                   std::uint32_t obstacle_id = 0)
{
  return mesh_ellipsoid_at_depth(e, ellipsoid_depth(e, opt), obstacle_id);
}

inline TriangleMesh mesh_ellipsoid(const Ellipsoid &e, double target_edge_length)
{
  return mesh_ellipsoid(e, MeshingOptions{target_edge_length, 7});
}

// Concatenates meshes, offsetting indices.
inline TriangleMesh merge_meshes(const std::vector<TriangleMesh> &parts)
{
  TriangleMesh out;
  for (const auto &p : parts)
  {
    const auto offset = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
    out.vertex_normals.insert(out.vertex_normals.end(), p.vertex_normals.begin(),
                              p.vertex_normals.end());
    out.vertex_obstacle.insert(out.vertex_obstacle.end(), p.vertex_obstacle.begin(),
                               p.vertex_obstacle.end());
    for (const auto &t : p.triangles)
    {
      out.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
    }
    out.triangle_obstacle.insert(out.triangle_obstacle.end(), p.triangle_obstacle.begin(),
                                 p.triangle_obstacle.end());
    out.triangle_areas.insert(out.triangle_areas.end(), p.triangle_areas.begin(),
                              p.triangle_areas.end());
    out.triangle_centroids.insert(out.triangle_centroids.end(), p.triangle_centroids.begin(),
                                  p.triangle_centroids.end());
  }
  return out;
}

// Rebuilds the union mesh of a scene from its ellipsoids.
inline TriangleMesh mesh_scene(const std::vector<Ellipsoid> &ellipsoids, const MeshingOptions &opt)
{
  std::vector<TriangleMesh> parts;
  parts.reserve(ellipsoids.size());
  for (std::size_t i = 0; i < ellipsoids.size(); ++i)
  {
    parts.push_back(mesh_ellipsoid(ellipsoids[i], opt, static_cast<std::uint32_t>(i)));
  }
  return merge_meshes(parts);
}

// Number of triangles incident to each undirected edge, keyed by (min, max).
inline std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_incidence(const TriangleMesh &m)
{
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (const auto &t : m.triangles)
  {
    for (int k = 0; k < 3; ++k)
    {
      ++count[std::minmax(t[k], t[(k + 1) % 3])];
    }
  }
  return count;
}

inline bool is_watertight(const TriangleMesh &m)
{
  const auto inc = edge_incidence(m);
  return !inc.empty() &&
         std::all_of(inc.begin(), inc.end(), [](const auto &kv) { return kv.second == 2; });
}

struct SceneOptions
{
  double environment_half_extent = 5.0;
  double min_semi_axis = 0.3;
  double max_semi_axis = 1.5;
  double separation_margin = 0.05;
  int max_consecutive_rejections = 10000;
  MeshingOptions meshing;
};

// True when the bounding spheres of a and b are disjoint with the margin.
inline bool bounding_spheres_disjoint(const Ellipsoid &a, const Ellipsoid &b, double margin)
{
  return distance(a.center, b.center) > a.max_semi_axis() + b.max_semi_axis() + margin;
}

//
// Rejection sampler for non-overlapping random ellipsoids. Deterministic in the
// seed; the mesh is generated after all obstacles have been accepted.
//
inline Scene sample_scene(int n_obstacles, std::uint64_t seed, const SceneOptions &opt)
{
  MSCAT_REQUIRE(n_obstacles >= 1, "sample_scene: need at least one obstacle");
  Rng rng(seed);
  Scene scene;
  scene.environment_half_extent = opt.environment_half_extent;
  int rejections = 0;
  while (static_cast<int>(scene.ellipsoids.size()) < n_obstacles)
  {
    Ellipsoid e;
    e.semi_axes = {rng.uniform(opt.min_semi_axis, opt.max_semi_axis),
                   rng.uniform(opt.min_semi_axis, opt.max_semi_axis),
                   rng.uniform(opt.min_semi_axis, opt.max_semi_axis)};
    const double lim = opt.environment_half_extent - e.max_semi_axis();
    e.center = {rng.uniform(-lim, lim), rng.uniform(-lim, lim), rng.uniform(-lim, lim)};
    const bool ok = std::all_of(scene.ellipsoids.begin(), scene.ellipsoids.end(),
                                [&](const Ellipsoid &o)
                                { return bounding_spheres_disjoint(e, o, opt.separation_margin); });
    if (ok)
    {
      scene.ellipsoids.push_back(e);
      rejections = 0;
    }
    else if (++rejections >= opt.max_consecutive_rejections)
    {
      throw SamplingError(concat("sample_scene: ", rejections,
                                 " consecutive rejections (seed ", seed, ", placed ",
                                 scene.ellipsoids.size(), " of ", n_obstacles, ")"));
    }
  }
  scene.mesh = mesh_scene(scene.ellipsoids, opt.meshing);
  return scene;
}

inline Scene sample_scene(int n_obstacles, std::uint64_t seed, double target_edge_length)
{
  SceneOptions opt;
  opt.meshing.target_edge_length = target_edge_length;
  return sample_scene(n_obstacles, seed, opt);
}

}  // namespace mscat

#endif  // MSCAT_GEOMETRY_HPP
