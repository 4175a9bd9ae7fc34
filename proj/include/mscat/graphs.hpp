// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_GRAPHS_HPP
#define MSCAT_GRAPHS_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mscat/geometry.hpp"

namespace mscat
{

struct EdgeList
{
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;

  std::size_t size() const { return src.size(); }
  void push(std::uint32_t s, std::uint32_t d)
  {
    src.push_back(s);
    dst.push_back(d);
  }
  friend bool operator==(const EdgeList &, const EdgeList &) = default;
};

struct NodeSet
{
  std::vector<Vec3> positions;
  // Index of the node in the parent set (mesh vertex index at level 0).
  std::vector<std::uint32_t> origin;

  std::size_t size() const { return positions.size(); }
  friend bool operator==(const NodeSet &, const NodeSet &) = default;
};

// Graph whose edges connect nodes of a single node set.
struct DirectedGraph
{
  NodeSet nodes;
  EdgeList edges;
  friend bool operator==(const DirectedGraph &, const DirectedGraph &) = default;
};

//
// Multiscale hierarchy. levels[0] is the boundary node set V^0; levels[j] for
// 0 < j < L are the octree representatives. down[j - 1] links V^(j-1) to V^j
// (source indices in V^(j-1), destination indices in V^j); up[j - 1] is its
// transpose. The distant graph lives on V^(L-1).
//
struct MultiscaleGraphSet
{
  int levels = 1;
  DirectedGraph boundary;
  std::vector<NodeSet> level_nodes;
  std::vector<EdgeList> down;
  std::vector<EdgeList> up;
  DirectedGraph distant;

  // shared[j - 1][i]: index in V^j of node i of V^(j-1) when it is the cell
  // representative, -1 otherwise.
  std::vector<std::vector<std::int32_t>> shared;

  std::size_t node_count(int level) const { return level_nodes[static_cast<std::size_t>(level)].size(); }
  friend bool operator==(const MultiscaleGraphSet &, const MultiscaleGraphSet &) = default;
};

struct GraphConfig
{
  int levels = 3;
  double alpha = 0.1;
  int candidates = 2;  // n_c
  double base_cell = 0.2;
  double half_extent = 5.0;
};

// Nodes are the mesh vertices; every undirected mesh edge is present in both
// directions.
inline DirectedGraph build_boundary_graph(const TriangleMesh &mesh)
{
  DirectedGraph g;
  g.nodes.positions = mesh.vertices;
  g.nodes.origin.resize(mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
  {
    g.nodes.origin[i] = static_cast<std::uint32_t>(i);
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> undirected;
  for (const auto &t : mesh.triangles)
  {
    for (int k = 0; k < 3; ++k)
    {
      undirected.insert(std::minmax(t[k], t[(k + 1) % 3]));
    }
  }
  for (const auto &[a, b] : undirected)
  {
    g.edges.push(a, b);
    g.edges.push(b, a);
  }
  return g;
}

// Number of weakly connected components of a graph with n nodes.
inline std::size_t connected_components(std::size_t n, const EdgeList &edges)
{
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    parent[i] = i;
  }
  auto find = [&](std::size_t x)
  {
    while (parent[x] != x)
    {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t e = 0; e < edges.size(); ++e)
  {
    parent[find(edges.src[e])] = find(edges.dst[e]);
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i)
  {
    count += find(i) == i;
  }
  return count;
}

//
// Octree depth used by coarse level j >= 1. Level 1 uses the depth whose cell
// side is closest to base_cell; each further level drops two octree depths.
//
inline int octree_depth_for_level(int level, const GraphConfig &cfg)
{
  const int finest = std::max(0, static_cast<int>(std::lround(std::log2(2.0 * cfg.half_extent / cfg.base_cell))));
  return std::max(0, finest - 2 * (level - 1));
}

struct OctreeLevels
{
  std::vector<NodeSet> nodes;  // V^1 .. V^(L-1)
  std::vector<EdgeList> down;
  std::vector<EdgeList> up;
};

//
// Coarsens a point set through L - 1 octree levels. Within each occupied cell
// the node closest to the cell center (lowest index on ties) represents the
// cell; coarse nodes are ordered by cell key.
//
inline OctreeLevels octree_coarsen(const std::vector<Vec3> &positions, const GraphConfig &cfg)
{
  MSCAT_REQUIRE(cfg.levels >= 1, "octree_coarsen: levels must be >= 1");
  MSCAT_REQUIRE(!positions.empty(), "octree_coarsen: empty point set");
  OctreeLevels out;
  const std::vector<Vec3> *fine = &positions;
  for (int j = 1; j < cfg.levels; ++j)
  {
    const int depth = octree_depth_for_level(j, cfg);
    const std::uint64_t cells = std::uint64_t{1} << depth;
    const double side = 2.0 * cfg.half_extent / static_cast<double>(cells);
    auto coord = [&](double v)
    {
      const double c = std::floor((v + cfg.half_extent) / side);
      return static_cast<std::uint64_t>(std::clamp(c, 0.0, static_cast<double>(cells - 1)));
    };
    std::map<std::uint64_t, std::vector<std::uint32_t>> members;
    std::vector<std::uint64_t> key_of(fine->size());
    for (std::size_t i = 0; i < fine->size(); ++i)
    {
      const Vec3 &p = (*fine)[i];
      const std::uint64_t key = (coord(p.x) * cells + coord(p.y)) * cells + coord(p.z);
      key_of[i] = key;
      members[key].push_back(static_cast<std::uint32_t>(i));
    }
    NodeSet level;
    std::map<std::uint64_t, std::uint32_t> coarse_index;
    for (const auto &[key, ids] : members)
    {
      const std::uint64_t iz = key % cells, iy = (key / cells) % cells, ix = key / (cells * cells);
      const Vec3 center{-cfg.half_extent + (static_cast<double>(ix) + 0.5) * side,
                        -cfg.half_extent + (static_cast<double>(iy) + 0.5) * side,
                        -cfg.half_extent + (static_cast<double>(iz) + 0.5) * side};
      std::uint32_t best = ids.front();
      double best_d = distance((*fine)[best], center);
      for (std::uint32_t id : ids)
      {
        const double d = distance((*fine)[id], center);
        if (d < best_d)
        {
          best = id;
          best_d = d;
        }
      }
      coarse_index[key] = static_cast<std::uint32_t>(level.size());
      level.positions.push_back((*fine)[best]);
      level.origin.push_back(best);
    }
    EdgeList down, up;
    for (std::size_t i = 0; i < fine->size(); ++i)
    {
      down.push(static_cast<std::uint32_t>(i), coarse_index[key_of[i]]);
    }
    up.src = down.dst;
    up.dst = down.src;
    out.nodes.push_back(std::move(level));
    out.down.push_back(std::move(down));
    out.up.push_back(std::move(up));
    fine = &out.nodes.back().positions;
  }
  return out;
}

inline std::size_t required_distant_edges(std::size_t n, double alpha)
{
  if (n < 2)
  {
    return 0;
  }
  const auto r = static_cast<long long>(std::llround(alpha * static_cast<double>(n - 1)));
  return static_cast<std::size_t>(std::clamp<long long>(r, 1, static_cast<long long>(n - 1)));
}

//
// Shortest-of-candidates edge selection. For each node, every required edge
// draws n_c distinct unlinked targets uniformly and keeps the closest one.
// Returns the per-node selections in order (before symmetrization).
//
inline EdgeList select_distant_edges_directed(const std::vector<Vec3> &positions, double alpha,
                                              int n_candidates, std::uint64_t seed)
{
  MSCAT_REQUIRE(alpha > 0.0 && alpha <= 1.0, "select_distant_edges: alpha must be in (0, 1]");
  MSCAT_REQUIRE(n_candidates >= 1, "select_distant_edges: n_c must be >= 1");
  const std::size_t n = positions.size();
  EdgeList out;
  if (n < 2)
  {
    return out;
  }
  const std::size_t required = required_distant_edges(n, alpha);
  Rng rng(seed);
  std::vector<std::uint32_t> pool;
  pool.reserve(n);
  for (std::size_t u = 0; u < n; ++u)
  {
    pool.clear();
    for (std::size_t v = 0; v < n; ++v)
    {
      if (v != u)
      {
        pool.push_back(static_cast<std::uint32_t>(v));
      }
    }
    for (std::size_t e = 0; e < required && !pool.empty(); ++e)
    {
      const std::size_t nc = std::min<std::size_t>(static_cast<std::size_t>(n_candidates), pool.size());
      // Partial Fisher-Yates: pool[0, nc) becomes a uniform draw without replacement.
      for (std::size_t i = 0; i < nc; ++i)
      {
        std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
      }
      std::size_t best = 0;
      for (std::size_t i = 1; i < nc; ++i)
      {
        const double di = distance(positions[u], positions[pool[i]]);
        const double db = distance(positions[u], positions[pool[best]]);
        if (di < db || (di == db && pool[i] < pool[best]))
        {
          best = i;
        }
      }
      out.push(static_cast<std::uint32_t>(u), pool[best]);
      pool[best] = pool.back();
      pool.pop_back();
    }
  }
  return out;
}

// Symmetric, loop-free, de-duplicated edge set sorted by (src, dst).
inline EdgeList symmetrize(const EdgeList &edges)
{
  std::set<std::pair<std::uint32_t, std::uint32_t>> s;
  for (std::size_t e = 0; e < edges.size(); ++e)
  {
    if (edges.src[e] != edges.dst[e])
    {
      s.emplace(edges.src[e], edges.dst[e]);
      s.emplace(edges.dst[e], edges.src[e]);
    }
  }
  EdgeList out;
  for (const auto &[a, b] : s)
  {
    out.push(a, b);
  }
  return out;
}

inline EdgeList select_distant_edges(const std::vector<Vec3> &positions, double alpha, int n_candidates,
                                     std::uint64_t seed)
{
  return symmetrize(select_distant_edges_directed(positions, alpha, n_candidates, seed));
}

inline MultiscaleGraphSet build_multiscale_graphs(const TriangleMesh &mesh, const GraphConfig &cfg,
                                                  std::uint64_t seed)
{
  MSCAT_REQUIRE(cfg.levels >= 1, "build_multiscale_graphs: levels must be >= 1");
  MultiscaleGraphSet g;
  g.levels = cfg.levels;
  g.boundary = build_boundary_graph(mesh);
  g.level_nodes.push_back(g.boundary.nodes);
  auto oct = octree_coarsen(mesh.vertices, cfg);
  for (std::size_t j = 0; j < oct.nodes.size(); ++j)
  {
    std::vector<std::int32_t> shared(g.level_nodes.back().size(), -1);
    for (std::size_t c = 0; c < oct.nodes[j].size(); ++c)
    {
      shared[oct.nodes[j].origin[c]] = static_cast<std::int32_t>(c);
    }
    g.shared.push_back(std::move(shared));
    g.level_nodes.push_back(std::move(oct.nodes[j]));
    g.down.push_back(std::move(oct.down[j]));
    g.up.push_back(std::move(oct.up[j]));
  }
  g.distant.nodes = g.level_nodes.back();
  g.distant.edges = select_distant_edges(g.distant.nodes.positions, cfg.alpha, cfg.candidates, seed);
  return g;
}

// Replaces the distant graph with a fresh draw (used for seed sweeps).
inline void resample_distant_graph(MultiscaleGraphSet &g, const GraphConfig &cfg, std::uint64_t seed)
{
  g.distant.edges = select_distant_edges(g.distant.nodes.positions, cfg.alpha, cfg.candidates, seed);
}

//
// Relabels V^0 by perm (new index of old node i is perm[i]) keeping edge order.
// Coarse levels keep their labels; their origin indices into V^0 are remapped.
//
inline MultiscaleGraphSet permute_boundary_nodes(const MultiscaleGraphSet &g, const std::vector<std::uint32_t> &perm)
{
  const std::size_t n = g.boundary.nodes.size();
  MSCAT_REQUIRE(perm.size() == n, "permutation size mismatch");
  MultiscaleGraphSet out = g;
  auto permute_nodes = [&](const NodeSet &in)
  {
    NodeSet o = in;
    for (std::size_t i = 0; i < n; ++i)
    {
      o.positions[perm[i]] = in.positions[i];
      o.origin[perm[i]] = in.origin[i];
    }
    return o;
  };
  out.boundary.nodes = permute_nodes(g.boundary.nodes);
  for (std::size_t e = 0; e < g.boundary.edges.size(); ++e)
  {
    out.boundary.edges.src[e] = perm[g.boundary.edges.src[e]];
    out.boundary.edges.dst[e] = perm[g.boundary.edges.dst[e]];
  }
  out.level_nodes[0] = out.boundary.nodes;
  if (g.levels > 1)
  {
    for (auto &o : out.level_nodes[1].origin)
    {
      o = perm[o];
    }
    for (auto &s : out.down[0].src)
    {
      s = perm[s];
    }
    for (auto &d : out.up[0].dst)
    {
      d = perm[d];
    }
    for (std::size_t i = 0; i < n; ++i)
    {
      out.shared[0][perm[i]] = g.shared[0][i];
    }
  }
  else
  {
    out.distant.nodes = out.boundary.nodes;
    for (std::size_t e = 0; e < g.distant.edges.size(); ++e)
    {
      out.distant.edges.src[e] = perm[g.distant.edges.src[e]];
      out.distant.edges.dst[e] = perm[g.distant.edges.dst[e]];
    }
  }
  return out;
}

namespace detail
{

inline void write_nodes_csv(const std::filesystem::path &path, const NodeSet &nodes)
{
  std::ofstream f(path);
  MSCAT_REQUIRE(f.good(), "cannot write '", path.string(), "'");
  f.precision(17);
  f << "node_id,x,y,z\n";
  for (std::size_t i = 0; i < nodes.size(); ++i)
  {
    f << i << ',' << nodes.positions[i].x << ',' << nodes.positions[i].y << ',' << nodes.positions[i].z << '\n';
  }
}

inline void write_edges_csv(const std::filesystem::path &path, const EdgeList &edges)
{
  std::ofstream f(path);
  MSCAT_REQUIRE(f.good(), "cannot write '", path.string(), "'");
  f << "src,dst\n";
  for (std::size_t e = 0; e < edges.size(); ++e)
  {
    f << edges.src[e] << ',' << edges.dst[e] << '\n';
  }
}

}  // namespace detail

// Debug dump: one nodes CSV per level and one edges CSV per graph.
inline void dump_graphs_csv(const MultiscaleGraphSet &g, const std::filesystem::path &dir)
{
  std::filesystem::create_directories(dir);
  for (std::size_t j = 0; j < g.level_nodes.size(); ++j)
  {
    detail::write_nodes_csv(dir / concat("nodes_level", j, ".csv"), g.level_nodes[j]);
  }
  detail::write_edges_csv(dir / "edges_boundary.csv", g.boundary.edges);
  for (std::size_t j = 0; j < g.down.size(); ++j)
  {
    detail::write_edges_csv(dir / concat("edges_down_", j, "_to_", j + 1, ".csv"), g.down[j]);
    detail::write_edges_csv(dir / concat("edges_up_", j + 1, "_to_", j, ".csv"), g.up[j]);
  }
  detail::write_edges_csv(dir / "edges_distant.csv", g.distant.edges);
}

}  // namespace mscat

#endif  // MSCAT_GRAPHS_HPP
