// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_CLI_HPP
#define MSCAT_CLI_HPP

#include <CLI11.hpp>
#include <iostream>
#include <variant>

#include "mscat/fieldgrid.hpp"
#include "mscat/metrics.hpp"
#include "mscat/nn/train.hpp"
#include "mscat/selftest.hpp"

namespace mscat::cli
{

using namespace mscat::nn;

// Raised for invalid configurations; carries every offending key.
class ConfigError : public Error
{
public:
  ConfigError(std::vector<std::string> keys, const std::string &what) : Error(what), keys_(std::move(keys)) {}
  const std::vector<std::string> &keys() const { return keys_; }

private:
  std::vector<std::string> keys_;
};

//
// Every knob of every subcommand. A JSON config file may set any key; flags
// given on the command line win over the file.
//
struct RunConfig
{
  std::string subcommand;
  std::string out = "run";
  std::uint64_t seed = 0;
  bool deterministic = false;
  int threads = 0;  // 0: MSCAT_THREADS, else all cores
  bool verbose = false;

  // generate / solve
  std::string problem = "laplace";
  int samples = 4;
  std::vector<int> obstacles{3};  // eval: filter list, empty = all
  double edge = 0.1;
  double rtol = 1e-5;
  int max_iter = 2000;

  // graphs / features
  int levels = 3;
  double alpha = 0.1;
  std::vector<int> nc{2};  // eval: sweep list, empty = checkpoint value
  double base_cell = 0.0;  // <= 0: twice the edge length
  double half_extent = 5.0;
  int pe_pairs = 8;
  double pe_min = 0.1;
  double pe_max = 20.0;

  // train
  std::string data;
  int epochs = 50;
  int batch = 16;
  double lr_start = 1e-4;
  double lr_end = 1e-7;
  double huber_delta = 1.0;
  double clip_norm = 1.0;
  double weight_decay = 0.01;
  int d0 = 64;
  int boundary_blocks = 2;
  int distant_blocks = 4;
  bool augment = false;
  bool normalize_targets = false;
  bool resample_distant = true;
  std::string precision = "f32";

  // eval / field
  std::string checkpoint;
  int seeds = 1;
  std::string sample;
  int index = 0;
  double z0 = 0.0;
  double side = 10.0;
  int resolution = 101;
  std::string format = "csv";
};

namespace detail
{

using FieldRef = std::variant<std::string *, std::uint64_t *, bool *, int *, double *, std::vector<int> *>;

inline std::vector<std::pair<std::string, FieldRef>> fields(RunConfig &c)
{
  return {{"subcommand", &c.subcommand},
          {"seed", &c.seed},
          {"deterministic", &c.deterministic},
          {"threads", &c.threads},
          {"verbose", &c.verbose},
          {"problem", &c.problem},
          {"samples", &c.samples},
          {"obstacles", &c.obstacles},
          {"edge", &c.edge},
          {"rtol", &c.rtol},
          {"max_iter", &c.max_iter},
          {"levels", &c.levels},
          {"alpha", &c.alpha},
          {"nc", &c.nc},
          {"base_cell", &c.base_cell},
          {"half_extent", &c.half_extent},
          {"pe_pairs", &c.pe_pairs},
          {"pe_min", &c.pe_min},
          {"pe_max", &c.pe_max},
          {"data", &c.data},
          {"epochs", &c.epochs},
          {"batch", &c.batch},
          {"lr_start", &c.lr_start},
          {"lr_end", &c.lr_end},
          {"huber_delta", &c.huber_delta},
          {"clip_norm", &c.clip_norm},
          {"weight_decay", &c.weight_decay},
          {"d0", &c.d0},
          {"boundary_blocks", &c.boundary_blocks},
          {"distant_blocks", &c.distant_blocks},
          {"augment", &c.augment},
          {"normalize_targets", &c.normalize_targets},
          {"resample_distant", &c.resample_distant},
          {"precision", &c.precision},
          {"checkpoint", &c.checkpoint},
          {"seeds", &c.seeds},
          {"sample", &c.sample},
          {"index", &c.index},
          {"z0", &c.z0},
          {"side", &c.side},
          {"resolution", &c.resolution},
          {"format", &c.format}};
}

}  // namespace detail

//
// The output directory is not part of the record, so identical runs into
// different directories produce identical files.
//
inline Json config_to_json(const RunConfig &cfg)
{
  RunConfig c = cfg;
  Json j = Json::object();
  for (auto &[key, ref] : detail::fields(c))
  {
    std::visit([&, k = key](auto *p) { j[k] = *p; }, ref);
  }
  return j;
}

// Applies a JSON object on top of c; unknown keys and type errors are collected.
inline void apply_json(RunConfig &c, const Json &j)
{
  if (!j.is_object())
  {
    throw ConfigError({"<root>"}, "config file must hold a JSON object");
  }
  auto table = detail::fields(c);
  std::vector<std::string> bad;
  std::vector<std::string> why;
  for (auto it = j.begin(); it != j.end(); ++it)
  {
    if (it.key() == "out" && it.value().is_string())
    {
      c.out = it.value().get<std::string>();
      continue;
    }
    const auto f = std::find_if(table.begin(), table.end(), [&](const auto &e) { return e.first == it.key(); });
    if (f == table.end())
    {
      bad.push_back(it.key());
      why.push_back(concat(it.key(), ": unknown key"));
      continue;
    }
    try
    {
      std::visit(
          [&](auto *p)
          {
            using V = std::remove_pointer_t<decltype(p)>;
            const Json &v = it.value();
            const bool ok = std::is_same_v<V, std::string>     ? v.is_string()
                            : std::is_same_v<V, bool>          ? v.is_boolean()
                            : std::is_same_v<V, double>        ? v.is_number()
                            : std::is_same_v<V, std::uint64_t> ? v.is_number_unsigned()
                            : std::is_same_v<V, int>           ? v.is_number_integer()
                                                               : v.is_array();
            if (!ok)
            {
              throw ConfigError({}, "wrong type");
            }
            *p = v.get<V>();
          },
          f->second);
    }
    catch (const std::exception &)
    {
      bad.push_back(it.key());
      why.push_back(concat(it.key(), ": wrong type"));
    }
  }
  if (!bad.empty())
  {
    std::string msg;
    for (const auto &w : why)
    {
      msg += (msg.empty() ? "" : "; ") + w;
    }
    throw ConfigError(bad, msg);
  }
}

inline GraphConfig graph_config(const RunConfig &c)
{
  return {c.levels, c.alpha, c.nc.empty() ? 2 : c.nc.front(), c.base_cell, c.half_extent};
}

inline FeatureConfig feature_config(const RunConfig &c) { return {c.pe_pairs, c.pe_min, c.pe_max}; }

inline TrainConfig train_config(const RunConfig &c)
{
  TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch;
  t.lr_start = c.lr_start;
  t.lr_end = c.lr_end;
  t.huber_delta = c.huber_delta;
  t.clip_norm = c.clip_norm;
  t.adam.weight_decay = c.weight_decay;
  t.seed = c.seed;
  t.augment = c.augment;
  t.normalize_targets = c.normalize_targets;
  t.resample_distant = c.resample_distant;
  t.threads = resolve_threads(c.threads);
  t.d0 = static_cast<std::size_t>(std::max(c.d0, 1));
  t.boundary_blocks = c.boundary_blocks;
  t.distant_blocks = c.distant_blocks;
  t.graph = graph_config(c);
  t.features = feature_config(c);
  t.precision = parse_precision(c.precision);
  return t;
}

// Checks every key the subcommand reads; throws one ConfigError listing all failures.
inline void validate(const RunConfig &c)
{
  std::vector<std::string> bad;
  std::vector<std::string> why;
  auto check = [&](bool ok, const char *key, const std::string &msg)
  {
    if (!ok)
    {
      bad.emplace_back(key);
      why.push_back(concat(key, ": ", msg));
    }
  };
  const std::string &s = c.subcommand;
  const bool gen = s == "generate" || s == "solve";
  const bool uses_graph = s == "graphs" || s == "train";
  check(c.threads >= 0, "threads", "must be >= 0");
  check(!c.out.empty(), "out", "must not be empty");
  if (gen || s == "graphs")
  {
    check(c.obstacles.size() == 1 && c.obstacles.front() >= 1, "obstacles", "needs exactly one count >= 1");
    check(c.edge > 0.0, "edge", "must be positive");
  }
  if (gen)
  {
    bool known = true;
    try
    {
      const ProblemVariant v = parse_variant(c.problem);
      check(v != ProblemVariant::HelmholtzNeumann, "problem",
            "Neumann ground truth is not generated (hypersingular operator out of scope)");
    }
    catch (const Error &)
    {
      known = false;
    }
    check(known, "problem", "expected laplace, helmholtz or neumann");
    check(c.rtol > 0.0, "rtol", "must be positive");
    check(c.max_iter >= 1, "max_iter", "must be >= 1");
  }
  if (s == "generate")
  {
    check(c.samples >= 1, "samples", "must be >= 1");
  }
  if (uses_graph)
  {
    check(c.levels >= 1, "levels", "must be >= 1");
    check(c.alpha > 0.0 && c.alpha <= 1.0, "alpha", "must be in (0, 1]");
    check(c.nc.size() == 1 && c.nc.front() >= 1, "nc", "needs exactly one value >= 1");
    check(c.half_extent > 0.0, "half_extent", "must be positive");
  }
  if (s == "train")
  {
    check(!c.data.empty(), "data", "dataset directory required");
    check(c.epochs >= 1, "epochs", "must be >= 1");
    check(c.batch >= 1, "batch", "must be >= 1");
    check(c.lr_start > 0.0, "lr_start", "must be positive");
    check(c.lr_end >= 0.0 && c.lr_end <= c.lr_start, "lr_end", "must be in [0, lr_start]");
    check(c.huber_delta > 0.0, "huber_delta", "must be positive");
    check(c.clip_norm > 0.0, "clip_norm", "must be positive");
    check(c.weight_decay >= 0.0, "weight_decay", "must be >= 0");
    check(c.d0 >= 1, "d0", "must be >= 1");
    check(c.boundary_blocks >= 1, "boundary_blocks", "must be >= 1");
    check(c.distant_blocks >= 0, "distant_blocks", "must be >= 0");
    check(c.pe_pairs >= 1, "pe_pairs", "must be >= 1");
    check(c.pe_min > 0.0 && c.pe_min < c.pe_max, "pe_min", "need 0 < pe_min < pe_max");
    check(c.precision == "f32" || c.precision == "f64" || c.precision == "float" || c.precision == "double",
          "precision", "expected f32 or f64");
  }
  if (s == "eval")
  {
    check(!c.data.empty(), "data", "dataset directory required");
    check(!c.checkpoint.empty(), "checkpoint", "checkpoint file required");
    check(c.seeds >= 1, "seeds", "must be >= 1");
    check(std::all_of(c.nc.begin(), c.nc.end(), [](int v) { return v >= 1; }), "nc", "values must be >= 1");
    check(std::all_of(c.obstacles.begin(), c.obstacles.end(), [](int v) { return v >= 1; }), "obstacles",
          "values must be >= 1");
  }
  if (s == "field")
  {
    check(!c.sample.empty() || !c.data.empty(), "sample", "sample file or data directory required");
    check(c.index >= 0, "index", "must be >= 0");
    check(c.side > 0.0, "side", "must be positive");
    check(c.resolution >= 2, "resolution", "must be >= 2");
    check(c.format == "csv" || c.format == "pgm", "format", "expected csv or pgm");
  }
  if (!bad.empty())
  {
    std::string msg;
    for (const auto &w : why)
    {
      msg += (msg.empty() ? "" : "; ") + w;
    }
    throw ConfigError(bad, msg);
  }
}

namespace detail
{

inline void write_text(const std::filesystem::path &path, const std::string &text) { write_file(path, text); }

inline std::filesystem::path prepare_out(const RunConfig &c)
{
  const std::filesystem::path dir(c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
  {
    throw FormatError(FormatError::Kind::Io, concat("cannot create '", dir.string(), "': ", ec.message()));
  }
  write_text(dir / "config.json", config_to_json(c).dump(2) + "\n");
  return dir;
}

inline std::string fmt(double v)
{
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

inline std::vector<SampleRecord> filter_obstacles(std::vector<SampleRecord> data, int n)
{
  std::erase_if(data, [&](const SampleRecord &s) { return static_cast<int>(s.scene.ellipsoids.size()) != n; });
  return data;
}

// Distant-graph seed for sample i under evaluation seed index k.
inline std::uint64_t eval_seed(std::uint64_t seed, int k, std::size_t i)
{
  return derive_seed(derive_seed(seed, 0x4000 + static_cast<std::uint64_t>(k)), i);
}

}  // namespace detail

inline int cmd_generate(const RunConfig &c, std::ostream &out)
{
  GenerationOptions opt;
  opt.n_obstacles = c.obstacles.front();
  opt.target_edge_length = c.edge;
  opt.rtol = c.rtol;
  opt.max_iter = c.max_iter;
  opt.threads = resolve_threads(c.threads);
  opt.verbose = c.verbose;
  const auto dir = detail::prepare_out(c);
  const DatasetManifest m =
      generate_dataset(parse_variant(c.problem), static_cast<std::size_t>(c.samples), c.seed, dir, opt);
  out << "generated " << m.count << " samples into " << dir.string() << " (" << m.redraws << " redraws)\n";
  return 0;
}

inline int cmd_solve(const RunConfig &c, std::ostream &out)
{
  GenerationOptions opt;
  opt.n_obstacles = c.obstacles.front();
  opt.target_edge_length = c.edge;
  opt.rtol = c.rtol;
  opt.max_iter = c.max_iter;
  const auto dir = detail::prepare_out(c);
  const GeneratedSample g = generate_sample(parse_variant(c.problem), c.seed, opt, resolve_threads(c.threads));
  const SampleRecord &s = g.record;
  write_sample(s, dir / "sample.msc");
  std::ostringstream csv;
  csv << "vertex,x,y,z,re,im\n" << std::setprecision(17);
  for (std::size_t v = 0; v < s.scene.mesh.vertex_count(); ++v)
  {
    const Vec3 &p = s.scene.mesh.vertices[v];
    csv << v << ',' << p.x << ',' << p.y << ',' << p.z << ',' << s.trace.values[v].real() << ','
        << s.trace.values[v].imag() << '\n';
  }
  detail::write_text(dir / "trace.csv", csv.str());
  const Json report{{"vertices", s.scene.mesh.vertex_count()},
                    {"triangles", s.scene.mesh.triangle_count()},
                    {"wavenumber", s.wavenumber()},
                    {"gmres_iterations", s.gmres_iterations},
                    {"relative_residual", s.gmres_residual},
                    {"converged", s.gmres_residual <= c.rtol}};
  detail::write_text(dir / "report.json", report.dump(2) + "\n");
  out << "solved " << s.scene.mesh.triangle_count() << " triangles in " << s.gmres_iterations
      << " GMRES iterations, residual " << s.gmres_residual << "\n";
  return 0;
}

inline int cmd_graphs(const RunConfig &c, std::ostream &out)
{
  TriangleMesh mesh;
  double edge = c.edge;
  if (!c.sample.empty())
  {
    const SampleRecord s = read_sample(c.sample);
    mesh = s.scene.mesh;
    edge = s.target_edge_length;
  }
  else
  {
    mesh = sample_scene(c.obstacles.front(), c.seed, c.edge).mesh;
  }
  const GraphConfig gc = resolve_graph_config(graph_config(c), edge);
  const MultiscaleGraphSet g = build_multiscale_graphs(mesh, gc, derive_seed(c.seed, 0x5000));
  const auto dir = detail::prepare_out(c);
  dump_graphs_csv(g, dir);
  out << "levels";
  for (const auto &l : g.level_nodes)
  {
    out << ' ' << l.positions.size();
  }
  out << ", distant edges " << g.distant.edges.size() << "\n";
  return 0;
}

inline int cmd_train(const RunConfig &c, std::ostream &out)
{
  const TrainConfig tc = train_config(c);
  const std::vector<SampleRecord> data = load_dataset(c.data);
  const auto dir = detail::prepare_out(c);
  std::ostringstream log;
  log << "epoch,loss,lr,grad_norm\n";
  const TrainResult r = train(data, tc,
                              [&](const EpochLog &e)
                              {
                                log << e.epoch << ',' << detail::fmt(e.loss) << ',' << detail::fmt(e.lr) << ','
                                    << detail::fmt(e.grad_norm) << '\n';
                                if (c.verbose)
                                {
                                  out << "epoch " << e.epoch << " loss " << e.loss << " lr " << e.lr << "\n";
                                }
                              });
  detail::write_text(dir / "loss.csv", log.str());
  save_checkpoint(r.model, dir / "checkpoint.msnn");
  out << "trained " << r.model.params.size() << " parameters for " << r.log.size() << " epochs, final loss "
      << r.log.back().loss << "\n";
  return 0;
}

inline int cmd_eval(const RunConfig &c, std::ostream &out)
{
  const TrainedModel tm = load_checkpoint(c.checkpoint);
  const std::vector<SampleRecord> all = load_dataset(c.data);
  const auto dir = detail::prepare_out(c);
  const int threads = resolve_threads(c.threads);
  const std::vector<int> ncs = c.nc.empty() ? std::vector<int>{tm.graph.candidates} : c.nc;
  std::vector<std::pair<std::string, std::vector<SampleRecord>>> groups;
  if (c.obstacles.empty())
  {
    groups.emplace_back("all", all);
  }
  for (int n : c.obstacles)
  {
    groups.emplace_back(std::to_string(n), detail::filter_obstacles(all, n));
  }
  std::ostringstream summary;
  summary << "n_c,obstacles,samples,seeds,err_rel,err_ampl,err_angle,mae,rel_std_err_rel,rel_std_err_ampl,"
             "rel_std_err_angle,rel_std_mae\n";
  Json rows = Json::array();
  for (int nc : ncs)
  {
    TrainedModel m = tm;
    m.graph.candidates = nc;
    const Predictor predictor(std::move(m));
    for (const auto &[label, data] : groups)
    {
      if (data.empty())
      {
        out << "n_c " << nc << ", obstacles " << label << ": no samples\n";
        continue;
      }
      const MetricReport r = evaluate_predictions(
          data,
          [&, &d = data](std::size_t i, int k) { return predictor.predict(d[i], detail::eval_seed(c.seed, k, i)); },
          c.seeds, threads);
      write_metrics_csv(r, dir / concat("metrics_nc", nc, "_obs", label, ".csv"));
      summary << nc << ',' << label << ',' << data.size() << ',' << c.seeds << ',' << detail::fmt(r.mean.err_rel)
              << ',' << detail::fmt(r.mean.err_ampl) << ',' << detail::fmt(r.mean.err_angle) << ','
              << detail::fmt(r.mean.mae) << ',' << detail::fmt(r.relative_std.err_rel) << ','
              << detail::fmt(r.relative_std.err_ampl) << ',' << detail::fmt(r.relative_std.err_angle) << ','
              << detail::fmt(r.relative_std.mae) << '\n';
      rows.push_back({{"n_c", nc},
                      {"obstacles", label},
                      {"samples", data.size()},
                      {"err_rel", r.mean.err_rel},
                      {"err_ampl", r.mean.err_ampl},
                      {"err_angle", r.mean.err_angle},
                      {"mae", r.mean.mae},
                      {"rel_std_err_rel", r.relative_std.err_rel},
                      {"constant_predictor_err_rel", constant_predictor_err_rel(data)}});
      out << "n_c " << nc << ", obstacles " << label << ": err_rel " << r.mean.err_rel << " err_ampl "
          << r.mean.err_ampl << " err_angle " << r.mean.err_angle << " (rel std " << r.relative_std.err_rel
          << ")\n";
    }
  }
  detail::write_text(dir / "summary.csv", summary.str());
  detail::write_text(dir / "report.json", Json{{"rows", rows}}.dump(2) + "\n");
  return 0;
}

inline int cmd_field(const RunConfig &c, std::ostream &out)
{
  SampleRecord s;
  if (!c.sample.empty())
  {
    s = read_sample(c.sample);
  }
  else
  {
    DatasetManifest m = read_manifest(c.data);
    MSCAT_REQUIRE(static_cast<std::size_t>(c.index) < m.count, "index ", c.index, " out of range for ", m.count,
                  " samples");
    s = read_sample(std::filesystem::path(c.data) / m.files[static_cast<std::size_t>(c.index)]);
  }
  const GridSpec spec{c.z0, c.side, static_cast<std::size_t>(c.resolution)};
  const FieldFormat format = parse_field_format(c.format);
  const int threads = resolve_threads(c.threads);
  const auto dir = detail::prepare_out(c);
  const std::string ext = "." + c.format;
  const FieldGrid truth = evaluate_field(s, s.trace.values, spec, threads);
  export_field(truth, dir / ("field_truth" + ext), format);
  if (!c.checkpoint.empty())
  {
    const Predictor predictor(load_checkpoint(c.checkpoint));
    const auto pred = predictor.predict(s, detail::eval_seed(c.seed, 0, 0));
    const FieldGrid p = evaluate_field(s, pred, spec, threads);
    export_field(p, dir / ("field_pred" + ext), format);
    export_field(field_difference(p, truth), dir / ("field_error" + ext), format);
  }
  out << "field written to " << dir.string() << "\n";
  return 0;
}

inline int cmd_selftest(const RunConfig &c, std::ostream &out)
{
  bool ok = true;
  for (const OracleResult &r : run_selftest(resolve_threads(c.threads)))
  {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " error " << r.error << " tolerance " << r.tolerance << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

// One JSON object on one line.
inline void print_error(std::ostream &err, const std::string &code, const std::string &message,
                        const std::vector<std::string> &keys = {})
{
  Json j{{"error", code}, {"message", message}};
  if (!keys.empty())
  {
    j["keys"] = keys;
  }
  err << j.dump() << "\n";
}

namespace detail
{

// Value of --config, if present, read before flags are bound.
inline std::string find_config(int argc, const char *const *argv)
{
  for (int i = 1; i < argc; ++i)
  {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc)
    {
      return argv[i + 1];
    }
    if (a.starts_with("--config="))
    {
      return std::string(a.substr(9));
    }
  }
  return {};
}

inline void add_common(CLI::App *app, RunConfig &c, std::string &config_path)
{
  app->add_option("--config", config_path, "JSON config file; flags override its values");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "base random seed");
  app->add_flag("--deterministic,!--no-deterministic", c.deterministic, "bit-reproducible outputs");
  app->add_option("--threads", c.threads, "worker threads (0: MSCAT_THREADS or all cores)");
  app->add_flag("--verbose,!--quiet", c.verbose, "progress output");
}

inline void add_scene(CLI::App *app, RunConfig &c)
{
  app->add_option("--obstacles", c.obstacles, "number of obstacles")->delimiter(',');
  app->add_option("--edge", c.edge, "target mesh edge length");
}

inline void add_graph(CLI::App *app, RunConfig &c)
{
  app->add_option("--levels", c.levels, "number of graph levels L");
  app->add_option("--alpha", c.alpha, "distant edge fraction");
  app->add_option("--nc", c.nc, "candidate edges per distant edge")->delimiter(',');
  app->add_option("--base-cell", c.base_cell, "finest octree cell (<= 0: twice the edge length)");
  app->add_option("--half-extent", c.half_extent, "octree half extent");
}

}  // namespace detail

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
{
  RunConfig c;
  std::string config_path;
  CLI::App app{"mscat: multiple-scattering BEM data and multiscale graph surrogate workbench"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto *gen = app.add_subcommand("generate", "generate a ground-truth dataset");
  auto *solve = app.add_subcommand("solve", "solve one random scene");
  auto *graphs = app.add_subcommand("graphs", "dump multiscale graphs to CSV");
  auto *tr = app.add_subcommand("train", "train a surrogate");
  auto *ev = app.add_subcommand("eval", "evaluate a checkpoint");
  auto *field = app.add_subcommand("field", "export the total field on a plane");
  auto *self = app.add_subcommand("selftest", "run the analytic BEM oracles");
  for (auto *s : {gen, solve, graphs, tr, ev, field, self})
  {
    detail::add_common(s, c, config_path);
  }
  for (auto *s : {gen, solve})
  {
    s->add_option("--problem", c.problem, "laplace | helmholtz");
    detail::add_scene(s, c);
    s->add_option("--rtol", c.rtol, "GMRES relative tolerance");
    s->add_option("--max-iter", c.max_iter, "GMRES iteration cap");
  }
  gen->add_option("--samples", c.samples, "number of samples");
  detail::add_scene(graphs, c);
  graphs->add_option("--sample", c.sample, "sample file (default: random scene from --seed)");
  detail::add_graph(graphs, c);
  detail::add_graph(tr, c);
  tr->add_option("--data", c.data, "dataset directory");
  tr->add_option("--epochs", c.epochs);
  tr->add_option("--batch", c.batch);
  tr->add_option("--lr-start", c.lr_start);
  tr->add_option("--lr-end", c.lr_end);
  tr->add_option("--huber-delta", c.huber_delta);
  tr->add_option("--clip-norm", c.clip_norm);
  tr->add_option("--weight-decay", c.weight_decay);
  tr->add_option("--d0", c.d0, "finest latent width");
  tr->add_option("--boundary-blocks", c.boundary_blocks);
  tr->add_option("--distant-blocks", c.distant_blocks);
  tr->add_option("--pe-pairs", c.pe_pairs);
  tr->add_option("--pe-min", c.pe_min);
  tr->add_option("--pe-max", c.pe_max);
  tr->add_flag("--augment,!--no-augment", c.augment, "random rotation per sample and epoch");
  tr->add_flag("--normalize-targets,!--no-normalize-targets", c.normalize_targets);
  tr->add_flag("--resample-distant,!--no-resample-distant", c.resample_distant);
  tr->add_option("--precision", c.precision, "f32 | f64");
  ev->add_option("--data", c.data, "dataset directory");
  ev->add_option("--checkpoint", c.checkpoint, "trained model");
  ev->add_option("--seeds", c.seeds, "distant-graph seeds per sample");
  ev->add_option("--nc", c.nc, "n_c sweep, e.g. 1,2,3")->delimiter(',');
  ev->add_option("--obstacles", c.obstacles, "obstacle-count filter, e.g. 2,3")->delimiter(',');
  field->add_option("--sample", c.sample, "sample file");
  field->add_option("--data", c.data, "dataset directory (with --index)");
  field->add_option("--index", c.index);
  field->add_option("--checkpoint", c.checkpoint, "also export predicted and error fields");
  field->add_option("--z0", c.z0);
  field->add_option("--side", c.side);
  field->add_option("--resolution", c.resolution);
  field->add_option("--format", c.format, "csv | pgm");

  try
  {
    const std::string path = detail::find_config(argc, argv);
    // eval filters and sweeps default to "everything"; a file or flag narrows them.
    const bool is_eval = argc > 1 && std::string_view(argv[1]) == "eval";
    if (is_eval)
    {
      c.obstacles.clear();
      c.nc.clear();
    }
    if (!path.empty())
    {
      const auto bytes = read_file(path);
      Json j;
      try
      {
        j = Json::parse(bytes.begin(), bytes.end());
      }
      catch (const Json::exception &e)
      {
        throw ConfigError({"<file>"}, concat("cannot parse '", path, "': ", e.what()));
      }
      apply_json(c, j);
    }
    app.parse(argc, argv);
    CLI::App *sub = app.get_subcommands().front();
    c.subcommand = sub->get_name();
    validate(c);
    if (sub == gen)
    {
      return cmd_generate(c, out);
    }
    if (sub == solve)
    {
      return cmd_solve(c, out);
    }
    if (sub == graphs)
    {
      return cmd_graphs(c, out);
    }
    if (sub == tr)
    {
      return cmd_train(c, out);
    }
    if (sub == ev)
    {
      return cmd_eval(c, out);
    }
    if (sub == field)
    {
      return cmd_field(c, out);
    }
    return cmd_selftest(c, out);
  }
  catch (const CLI::CallForHelp &)
  {
    out << app.help();
    return 0;
  }
  catch (const CLI::CallForAllHelp &)
  {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  }
  catch (const CLI::ParseError &e)
  {
    print_error(err, "usage", e.what());
    return 2;
  }
  catch (const ConfigError &e)
  {
    print_error(err, "config", e.what(), e.keys());
    return 2;
  }
  catch (const FormatError &e)
  {
    print_error(err, "format", e.what());
    return 3;
  }
  catch (const ConvergenceError &e)
  {
    print_error(err, "convergence", e.what());
    return 4;
  }
  catch (const PreconditionError &e)
  {
    print_error(err, "precondition", e.what());
    return 2;
  }
  catch (const std::exception &e)
  {
    print_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace mscat::cli

#endif  // MSCAT_CLI_HPP
