// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_DATASET_HPP
#define MSCAT_DATASET_HPP

#include <atomic>
#include <cstdio>
#include <iostream>

#include "mscat/bem.hpp"
#include "mscat/container.hpp"
#include "mscat/problems.hpp"

namespace mscat
{

inline constexpr std::string_view kSampleMagic{"MSCAT01\n", 8};
inline constexpr int kDatasetFormatVersion = 1;

//
// One benchmark sample: scene, boundary-condition parameters, ground-truth
// per-vertex trace and the GMRES iteration count of the reference solve.
//
struct SampleRecord
{
  Scene scene;
  ProblemSpec problem;
  BoundaryTrace trace;
  int gmres_iterations = 0;
  double gmres_residual = 0.0;
  double target_edge_length = 0.0;
  std::uint64_t seed = 0;

  bool is_complex() const { return is_helmholtz(problem.variant); }
  double wavenumber() const { return problem.wavenumber; }
};

inline Json problem_to_json(const ProblemSpec &p)
{
  return {{"variant", std::string(to_string(p.variant))},
          {"phi", Json::array({p.phi0, p.phi1, p.phi2})},
          {"source", to_json(p.source)},
          {"direction", to_json(p.direction)},
          {"wavenumber", p.wavenumber}};
}

inline ProblemSpec problem_from_json(const Json &j)
{
  ProblemSpec p;
  p.variant = parse_variant(j.at("variant").get<std::string>());
  const auto &phi = j.at("phi");
  p.phi0 = phi.at(0).get<double>();
  p.phi1 = phi.at(1).get<double>();
  p.phi2 = phi.at(2).get<double>();
  p.source = vec3_from_json(j.at("source"));
  p.direction = vec3_from_json(j.at("direction"));
  p.wavenumber = j.at("wavenumber").get<double>();
  return p;
}

inline std::vector<char> encode_sample(const SampleRecord &rec)
{
  const auto &mesh = rec.scene.mesh;
  MSCAT_REQUIRE(rec.trace.values.size() == mesh.vertex_count(), "trace length != vertex count");
  Json ellipsoids = Json::array();
  for (const auto &e : rec.scene.ellipsoids)
  {
    Json item = {{"center", to_json(e.center)}, {"semi_axes", to_json(e.semi_axes)}};
    if (e.axes != identity3())
    {
      item["axes"] = e.axes;
    }
    ellipsoids.push_back(item);
  }
  const Json header = {
      {"format_version", kDatasetFormatVersion},
      {"problem", problem_to_json(rec.problem)},
      {"ellipsoids", ellipsoids},
      {"environment_half_extent", rec.scene.environment_half_extent},
      {"counts", {{"vertices", mesh.vertex_count()}, {"triangles", mesh.triangle_count()}}},
      {"flags", {{"complex", rec.is_complex()}}},
      {"gmres", {{"iterations", rec.gmres_iterations}, {"relative_residual", rec.gmres_residual}}},
      {"target_edge_length", rec.target_edge_length},
      {"seed", rec.seed}};
  ByteWriter w;
  begin_container(w, kSampleMagic, header);
  for (const Vec3 &v : mesh.vertices)
  {
    w.f64(v.x);
    w.f64(v.y);
    w.f64(v.z);
  }
  for (const auto &t : mesh.triangles)
  {
    w.u32(t[0]);
    w.u32(t[1]);
    w.u32(t[2]);
  }
  for (std::uint32_t id : mesh.vertex_obstacle)
  {
    w.u32(id);
  }
  for (const Complex &z : rec.trace.values)
  {
    w.f64(z.real());
  }
  if (rec.is_complex())
  {
    for (const Complex &z : rec.trace.values)
    {
      w.f64(z.imag());
    }
  }
  return w.bytes();
}

inline SampleRecord decode_sample(std::span<const char> bytes)
{
  ByteReader r(bytes);
  const Json header = open_container(r, kSampleMagic);
  SampleRecord rec;
  std::size_t nv = 0, nt = 0;
  bool complex_trace = false;
  try
  {
    rec.problem = problem_from_json(header.at("problem"));
    for (const auto &e : header.at("ellipsoids"))
    {
      Ellipsoid el{vec3_from_json(e.at("center")), vec3_from_json(e.at("semi_axes"))};
      if (e.contains("axes"))
      {
        el.axes = e.at("axes").get<Mat3>();
      }
      rec.scene.ellipsoids.push_back(el);
    }
    rec.scene.environment_half_extent = header.at("environment_half_extent").get<double>();
    nv = header.at("counts").at("vertices").get<std::size_t>();
    nt = header.at("counts").at("triangles").get<std::size_t>();
    complex_trace = header.at("flags").at("complex").get<bool>();
    rec.gmres_iterations = header.at("gmres").at("iterations").get<int>();
    rec.gmres_residual = header.at("gmres").at("relative_residual").get<double>();
    rec.target_edge_length = header.at("target_edge_length").get<double>();
    rec.seed = header.at("seed").get<std::uint64_t>();
  }
  catch (const Json::exception &e)
  {
    throw FormatError(FormatError::Kind::BadHeader, concat("sample header: ", e.what()));
  }
  if (complex_trace != is_helmholtz(rec.problem.variant))
  {
    throw FormatError(FormatError::Kind::CountMismatch, "complex flag disagrees with the problem variant");
  }
  const std::size_t expected = nv * 24 + nt * 12 + nv * 4 + nv * 8 * (complex_trace ? 2 : 1);
  if (r.remaining() < expected)
  {
    throw FormatError(FormatError::Kind::Truncated,
                      concat("truncated payload: header declares ", expected, " bytes, file has ",
                             r.remaining()));
  }
  if (r.remaining() > expected)
  {
    throw FormatError(FormatError::Kind::CountMismatch,
                      concat("payload has ", r.remaining() - expected, " bytes beyond the declared arrays"));
  }
  auto &mesh = rec.scene.mesh;
  mesh.vertices.resize(nv);
  for (Vec3 &v : mesh.vertices)
  {
    v.x = r.f64();
    v.y = r.f64();
    v.z = r.f64();
  }
  mesh.triangles.resize(nt);
  for (auto &t : mesh.triangles)
  {
    for (auto &i : t)
    {
      i = r.u32();
      if (i >= nv)
      {
        throw FormatError(FormatError::Kind::CountMismatch, concat("triangle index ", i, " >= vertex count ", nv));
      }
    }
  }
  mesh.vertex_obstacle.resize(nv);
  for (auto &id : mesh.vertex_obstacle)
  {
    id = r.u32();
    if (id >= rec.scene.ellipsoids.size())
    {
      throw FormatError(FormatError::Kind::CountMismatch,
                        concat("obstacle id ", id, " >= ellipsoid count ", rec.scene.ellipsoids.size()));
    }
  }
  rec.trace.values.assign(nv, Complex{});
  for (auto &z : rec.trace.values)
  {
    z.real(r.f64());
  }
  if (complex_trace)
  {
    for (auto &z : rec.trace.values)
    {
      z.imag(r.f64());
    }
  }
  mesh.vertex_normals.resize(nv);
  for (std::size_t v = 0; v < nv; ++v)
  {
    mesh.vertex_normals[v] = rec.scene.ellipsoids[mesh.vertex_obstacle[v]].normal_at(mesh.vertices[v]);
  }
  mesh.triangle_obstacle.resize(nt);
  for (std::size_t t = 0; t < nt; ++t)
  {
    mesh.triangle_obstacle[t] = mesh.vertex_obstacle[mesh.triangles[t][0]];
  }
  mesh.update_triangle_data();
  return rec;
}

inline void write_sample(const SampleRecord &rec, const std::filesystem::path &path)
{
  write_file(path, encode_sample(rec));
}

inline SampleRecord read_sample(const std::filesystem::path &path) { return decode_sample(read_file(path)); }

struct GenerationOptions
{
  int n_obstacles = 3;
  double target_edge_length = 0.1;
  double rtol = 1e-5;
  int max_iter = 2000;
  int threads = 1;
  double max_redraw_fraction = 0.1;
  bool verbose = false;
};

// Record plus the per-triangle system data, kept for residual verification.
struct GeneratedSample
{
  SampleRecord record;
  std::vector<Complex> density;
  std::vector<Complex> rhs;
};

inline GeneratedSample generate_sample(ProblemVariant variant, std::uint64_t seed,
                                       const GenerationOptions &opt, int inner_threads = 1)
{
  MSCAT_REQUIRE(variant != ProblemVariant::HelmholtzNeumann,
                "ground truth for the Helmholtz Neumann problem is not generated here");
  GeneratedSample g;
  auto &rec = g.record;
  rec.seed = seed;
  rec.target_edge_length = opt.target_edge_length;
  rec.scene = sample_scene(opt.n_obstacles, seed, opt.target_edge_length);
  rec.problem = sample_problem(variant, rec.scene, derive_seed(seed, 1));
  const auto &mesh = rec.scene.mesh;
  g.rhs = dirichlet_bc(rec.problem, mesh.triangle_centroids);
  SolveOptions sopt;
  sopt.rtol = opt.rtol;
  sopt.max_iter = opt.max_iter;
  sopt.threads = inner_threads;
  auto sol = solve_dirichlet(mesh, Kernel::for_wavenumber(rec.problem.wavenumber), g.rhs, sopt);
  rec.trace = std::move(sol.trace);
  rec.gmres_iterations = sol.report.iterations;
  rec.gmres_residual = sol.report.final_relative_residual;
  g.density = std::move(sol.density);
  return g;
}

struct DatasetManifest
{
  ProblemVariant variant = ProblemVariant::LaplaceDirichlet;
  std::size_t count = 0;
  int n_obstacles = 0;
  double target_edge_length = 0.0;
  std::uint64_t seed = 0;
  int format_version = kDatasetFormatVersion;
  int redraws = 0;
  std::vector<std::string> files;
};

inline Json manifest_to_json(const DatasetManifest &m)
{
  return {{"format_version", m.format_version}, {"variant", std::string(to_string(m.variant))},
          {"count", m.count},                   {"n_obstacles", m.n_obstacles},
          {"target_edge_length", m.target_edge_length},
          {"seed", m.seed},                     {"redraws", m.redraws},
          {"files", m.files}};
}

inline DatasetManifest read_manifest(const std::filesystem::path &dir)
{
  const auto bytes = read_file(dir / "manifest.json");
  DatasetManifest m;
  try
  {
    const Json j = Json::parse(bytes.begin(), bytes.end());
    m.format_version = j.at("format_version").get<int>();
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.count = j.at("count").get<std::size_t>();
    m.n_obstacles = j.value("n_obstacles", 0);
    m.target_edge_length = j.value("target_edge_length", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.redraws = j.value("redraws", 0);
    m.files = j.at("files").get<std::vector<std::string>>();
  }
  catch (const Json::exception &e)
  {
    throw FormatError(FormatError::Kind::BadHeader, concat("manifest: ", e.what()));
  }
  if (m.files.size() != m.count)
  {
    throw FormatError(FormatError::Kind::CountMismatch,
                      concat("manifest count ", m.count, " but ", m.files.size(), " files listed"));
  }
  return m;
}

inline void write_manifest(const DatasetManifest &m, const std::filesystem::path &dir)
{
  const std::string text = manifest_to_json(m).dump(2) + "\n";
  write_file(dir / "manifest.json", text);
}

inline std::string sample_file_name(std::size_t i)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%06zu.msc", i);
  return buf;
}

//
// Generates n_samples records into out_dir. Sample i uses seed + i; a sample
// whose sampling or solve fails is redrawn with a shifted seed. Samples are
// independent, so the output does not depend on the thread count.
//
inline DatasetManifest generate_dataset(ProblemVariant variant, std::size_t n_samples, std::uint64_t seed,
                                        const std::filesystem::path &out_dir, const GenerationOptions &opt)
{
  MSCAT_REQUIRE(variant != ProblemVariant::HelmholtzNeumann,
                "generate_dataset: Helmholtz Neumann ground truth is out of scope");
  MSCAT_REQUIRE(n_samples >= 1, "generate_dataset: need at least one sample");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  {
    const auto probe = out_dir / ".write_probe";
    std::ofstream f(probe);
    if (!f)
    {
      throw FormatError(FormatError::Kind::Io, concat("output directory '", out_dir.string(), "' is not writable"));
    }
    f.close();
    std::filesystem::remove(probe, ec);
  }

  const int max_redraws = static_cast<int>(opt.max_redraw_fraction * static_cast<double>(n_samples));
  std::atomic<int> redraws{0};
  std::vector<int> sample_redraws(n_samples, 0);
  const int workers = std::max(1, opt.threads);
  const bool per_sample_parallel = n_samples >= static_cast<std::size_t>(workers) && workers > 1;
  parallel_for(n_samples, per_sample_parallel ? workers : 1,
               [&](std::size_t i)
               {
                 for (std::uint64_t attempt = 0;; ++attempt)
                 {
                   const std::uint64_t s = seed + i + attempt * 1000003ull;
                   try
                   {
                     auto g = generate_sample(variant, s, opt, per_sample_parallel ? 1 : workers);
                     write_sample(g.record, out_dir / sample_file_name(i));
                     if (opt.verbose)
                     {
                       std::cerr << "sample " << i << ": " << g.record.scene.mesh.vertex_count()
                                 << " vertices, " << g.record.gmres_iterations << " GMRES iterations\n";
                     }
                     return;
                   }
                   catch (const FormatError &)
                   {
                     throw;
                   }
                   catch (const Error &e)
                   {
                     sample_redraws[i] += 1;
                     const int total = ++redraws;
                     std::cerr << "sample " << i << " seed " << s << " failed (" << e.what() << "); redrawing\n";
                     if (total > max_redraws)
                     {
                       throw Error(concat("generate_dataset: ", total, " redraws exceed ",
                                          opt.max_redraw_fraction * 100.0, "% of ", n_samples,
                                          " samples; last failure at sample ", i, " seed ", s, ": ",
                                          e.what()));
                     }
                   }
                 }
               });

  DatasetManifest m;
  m.variant = variant;
  m.count = n_samples;
  m.n_obstacles = opt.n_obstacles;
  m.target_edge_length = opt.target_edge_length;
  m.seed = seed;
  m.redraws = redraws.load();
  for (std::size_t i = 0; i < n_samples; ++i)
  {
    m.files.push_back(sample_file_name(i));
  }
  write_manifest(m, out_dir);
  return m;
}

inline std::vector<SampleRecord> load_dataset(const std::filesystem::path &dir, DatasetManifest *manifest = nullptr)
{
  const DatasetManifest m = read_manifest(dir);
  std::vector<SampleRecord> out;
  out.reserve(m.count);
  for (const auto &f : m.files)
  {
    out.push_back(read_sample(dir / f));
    if (out.back().problem.variant != m.variant)
    {
      throw FormatError(FormatError::Kind::CountMismatch, concat("sample '", f, "' variant differs from manifest"));
    }
  }
  if (manifest)
  {
    *manifest = m;
  }
  return out;
}

}  // namespace mscat

#endif  // MSCAT_DATASET_HPP
