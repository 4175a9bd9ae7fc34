// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_NN_TRAIN_HPP
#define MSCAT_NN_TRAIN_HPP

#include <functional>

#include "mscat/nn/model.hpp"

namespace mscat::nn
{

// Mean Huber loss over all entries; writes dL/dpred into grad when given.
template <class T>
double huber_loss(const Matrix<T> &pred, const Matrix<T> &target, double delta = 1.0, Matrix<T> *grad = nullptr)
{
  MSCAT_REQUIRE(pred.rows == target.rows && pred.cols == target.cols, "huber_loss: shape mismatch (", pred.rows,
                "x", pred.cols, " vs ", target.rows, "x", target.cols, ")");
  MSCAT_REQUIRE(delta > 0.0, "huber_loss: delta must be positive");
  const std::size_t n = pred.data.size();
  MSCAT_REQUIRE(n > 0, "huber_loss: empty input");
  if (grad)
  {
    *grad = Matrix<T>(pred.rows, pred.cols);
  }
  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    const double r = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    const double a = std::abs(r);
    sum += a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
    if (grad)
    {
      grad->data[i] = static_cast<T>((a <= delta ? r : std::copysign(delta, r)) * inv_n);
    }
  }
  return sum * inv_n;
}

inline double cosine_lr(std::size_t step, std::size_t total, double lr_start, double lr_end)
{
  if (total == 0)
  {
    return lr_start;
  }
  const double t = static_cast<double>(std::min(step, total)) / static_cast<double>(total);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(kPi * t));
}

// Scales g in place so its Euclidean norm is at most max_norm; returns the norm before clipping.
template <class T>
double clip_grad_norm(std::vector<T> &g, double max_norm)
{
  double sq = 0.0;
  for (T x : g)
  {
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double nrm = std::sqrt(sq);
  if (nrm > max_norm && nrm > 0.0)
  {
    const auto s = static_cast<T>(max_norm / nrm);
    for (T &x : g)
    {
      x *= s;
    }
  }
  return nrm;
}

struct AdamWConfig
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <class T>
class AdamW
{
public:
  AdamW(std::size_t n, AdamWConfig cfg) : cfg_(cfg), m_(n, T(0)), v_(n, T(0)) {}

  void step(std::vector<T> &params, const std::vector<T> &grads, double lr)
  {
    MSCAT_REQUIRE(params.size() == m_.size() && grads.size() == m_.size(), "AdamW: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    for (std::size_t i = 0; i < params.size(); ++i)
    {
      const T g = grads[i];
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(m_[i]) / bc1;
      const double vhat = static_cast<double>(v_[i]) / bc2;
      const double p = static_cast<double>(params[i]);
      params[i] = static_cast<T>(p - lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p));
    }
  }

  std::size_t steps() const { return t_; }

private:
  AdamWConfig cfg_;
  std::vector<T> m_, v_;
  std::size_t t_ = 0;
};

// Rigidly rotated copy of a sample: vertices, normals, obstacles, source and direction.
inline SampleRecord rotate_augment(const SampleRecord &s, const Mat3 &R)
{
  SampleRecord out = s;
  auto &mesh = out.scene.mesh;
  for (auto &v : mesh.vertices)
  {
    v = mscat::apply(R, v);
  }
  for (auto &nrm : mesh.vertex_normals)
  {
    nrm = mscat::apply(R, nrm);
  }
  mesh.update_triangle_data();
  for (auto &e : out.scene.ellipsoids)
  {
    e = e.rotated(R);
  }
  out.problem.source = mscat::apply(R, s.problem.source);
  out.problem.direction = mscat::apply(R, s.problem.direction);
  return out;
}

inline SampleRecord rotate_augment(const SampleRecord &s, Rng &rng) { return rotate_augment(s, random_rotation(rng)); }

inline GraphConfig resolve_graph_config(GraphConfig g, double target_edge_length)
{
  if (g.base_cell <= 0.0)
  {
    g.base_cell = 2.0 * target_edge_length;
  }
  return g;
}

struct PreparedSample
{
  MultiscaleGraphSet graphs;
  FeatureTensors features;
};

//
// Graphs and features for one sample. With a rotation, the graphs are built
// on the rotated vertices while the features are computed on the original
// sample and only their direction slots are rotated; scalar slots are then
// bitwise identical to the unrotated ones.
//
inline PreparedSample prepare_sample(const SampleRecord &s, const GraphConfig &graph_cfg, const FeatureConfig &fc,
                                     std::uint64_t distant_seed, const Mat3 *rotation = nullptr)
{
  PreparedSample out;
  const GraphConfig gc = resolve_graph_config(graph_cfg, s.target_edge_length);
  if (rotation)
  {
    TriangleMesh m;
    m.triangles = s.scene.mesh.triangles;
    for (const Vec3 &v : s.scene.mesh.vertices)
    {
      m.vertices.push_back(mscat::apply(*rotation, v));
    }
    out.graphs = build_multiscale_graphs(m, gc, distant_seed);
  }
  else
  {
    out.graphs = build_multiscale_graphs(s.scene.mesh, gc, distant_seed);
  }
  out.features = compute_features(s.problem.variant, s.problem, s.scene.mesh.vertices, out.graphs, fc);
  if (rotation)
  {
    rotate_direction_slots(out.features, *rotation);
  }
  return out;
}

inline std::size_t output_dim(ProblemVariant v) { return is_helmholtz(v) ? 2 : 1; }

inline Matrix<double> target_matrix(const SampleRecord &s)
{
  const std::size_t c = output_dim(s.problem.variant);
  Matrix<double> t(s.trace.values.size(), c);
  for (std::size_t i = 0; i < t.rows; ++i)
  {
    t(i, 0) = s.trace.values[i].real();
    if (c == 2)
    {
      t(i, 1) = s.trace.values[i].imag();
    }
  }
  return t;
}

enum class Precision
{
  F32,
  F64
};

inline std::string_view to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

inline Precision parse_precision(std::string_view s)
{
  if (s == "f32" || s == "float")
  {
    return Precision::F32;
  }
  if (s == "f64" || s == "double")
  {
    return Precision::F64;
  }
  throw PreconditionError(concat("unknown precision '", s, "'"));
}

struct TrainConfig
{
  int epochs = 50;
  int batch_size = 16;
  double lr_start = 1e-4;
  double lr_end = 1e-7;
  double huber_delta = 1.0;
  double clip_norm = 1.0;
  AdamWConfig adam;
  std::uint64_t seed = 0;
  bool augment = false;
  bool normalize_targets = false;
  bool resample_distant = true;
  int threads = 1;
  std::size_t d0 = 64;
  int boundary_blocks = 2;
  int distant_blocks = 4;
  GraphConfig graph{3, 0.1, 2, 0.0, 5.0};  // base_cell <= 0: twice the sample edge length
  FeatureConfig features;
  Precision precision = Precision::F32;

  void validate() const
  {
    MSCAT_REQUIRE(epochs >= 1, "epochs must be >= 1");
    MSCAT_REQUIRE(batch_size >= 1, "batch_size must be >= 1");
    MSCAT_REQUIRE(lr_start > 0.0 && lr_end >= 0.0 && lr_end <= lr_start, "need 0 <= lr_end <= lr_start, lr_start > 0");
    MSCAT_REQUIRE(huber_delta > 0.0 && clip_norm > 0.0, "huber_delta and clip_norm must be positive");
    MSCAT_REQUIRE(graph.levels >= 1, "levels must be >= 1");
    MSCAT_REQUIRE(graph.alpha > 0.0 && graph.alpha <= 1.0, "alpha must be in (0, 1]");
    MSCAT_REQUIRE(graph.candidates >= 1, "n_c must be >= 1");
    features.validate();
  }
};

struct TrainedModel
{
  ProblemVariant variant = ProblemVariant::LaplaceDirichlet;
  ModelConfig model;
  GraphConfig graph;
  FeatureConfig features;
  Precision precision = Precision::F32;
  std::vector<double> target_mean;   // empty when targets were not normalized
  std::vector<double> target_scale;
  std::vector<double> params;
};

struct EpochLog
{
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm over the epoch's steps
};

struct TrainResult
{
  TrainedModel model;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog &)>;

inline ModelConfig model_config_for(ProblemVariant v, const TrainConfig &cfg)
{
  ModelConfig mc = model_config_for(v, cfg.features);
  mc.d0 = cfg.d0;
  mc.levels = cfg.graph.levels;
  mc.boundary_blocks = cfg.boundary_blocks;
  mc.distant_blocks = cfg.distant_blocks;
  return mc;
}

namespace detail
{

inline std::uint64_t distant_seed(std::uint64_t seed, int epoch, std::size_t sample)
{
  return derive_seed(derive_seed(seed, 0x1000 + static_cast<std::uint64_t>(epoch)), sample);
}

inline std::uint64_t rotation_seed(std::uint64_t seed, int epoch, std::size_t sample)
{
  return derive_seed(derive_seed(seed, 0x2000 + static_cast<std::uint64_t>(epoch)), sample);
}

template <class T>
Matrix<T> normalized_target(const SampleRecord &s, const TrainedModel &tm)
{
  Matrix<double> t = target_matrix(s);
  if (!tm.target_mean.empty())
  {
    for (std::size_t i = 0; i < t.rows; ++i)
    {
      for (std::size_t c = 0; c < t.cols; ++c)
      {
        t(i, c) = (t(i, c) - tm.target_mean[c]) / tm.target_scale[c];
      }
    }
  }
  return cast<T>(t);
}

template <class T>
TrainResult train_impl(const std::vector<SampleRecord> &data, const TrainConfig &cfg, const EpochCallback &on_epoch)
{
  const ProblemVariant variant = data.front().problem.variant;
  TrainResult result;
  TrainedModel &tm = result.model;
  tm.variant = variant;
  tm.model = model_config_for(variant, cfg);
  tm.graph = cfg.graph;
  tm.features = cfg.features;
  tm.precision = cfg.precision;
  const std::size_t channels = output_dim(variant);
  if (cfg.normalize_targets)
  {
    std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
    std::size_t count = 0;
    for (const auto &s : data)
    {
      const Matrix<double> t = target_matrix(s);
      for (std::size_t i = 0; i < t.rows; ++i)
      {
        for (std::size_t c = 0; c < channels; ++c)
        {
          sum[c] += t(i, c);
          sq[c] += t(i, c) * t(i, c);
        }
      }
      count += t.rows;
    }
    tm.target_mean.resize(channels);
    tm.target_scale.resize(channels);
    for (std::size_t c = 0; c < channels; ++c)
    {
      const double mean = sum[c] / static_cast<double>(count);
      const double var = std::max(0.0, sq[c] / static_cast<double>(count) - mean * mean);
      tm.target_mean[c] = mean;
      tm.target_scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }

  const Model model(tm.model);
  std::vector<T> params = model.template initial_parameters<T>(derive_seed(cfg.seed, 1));
  AdamW<T> opt(params.size(), cfg.adam);
  const std::size_t n = data.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(cfg.epochs);
  const int threads = std::max(1, cfg.threads);
  const auto workers = static_cast<std::size_t>(threads);

  std::vector<T> total(params.size());
  std::vector<std::vector<T>> sample_grads(std::min(workers, bs), std::vector<T>(params.size()));
  std::vector<double> sample_loss(bs);
  std::size_t step = 0;
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
  {
    for (std::size_t i = 0; i < n; ++i)
    {
      order[i] = i;
    }
    Rng shuffle(derive_seed(cfg.seed, 0x3000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i)
    {
      std::swap(order[i - 1], order[shuffle.index(i)]);
    }
    EpochLog log;
    log.epoch = epoch + 1;
    double loss_sum = 0.0, norm_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += bs)
    {
      const std::size_t b1 = std::min(n, b0 + bs);
      std::fill(total.begin(), total.end(), T(0));
      // Samples run in waves of `workers`; gradients are summed in batch order.
      for (std::size_t w0 = b0; w0 < b1; w0 += workers)
      {
        const std::size_t w1 = std::min(b1, w0 + workers);
        parallel_for(w1 - w0, threads,
                     [&](std::size_t k)
                     {
                       const std::size_t idx = order[w0 + k];
                       const SampleRecord &s = data[idx];
                       const std::uint64_t ds = cfg.resample_distant ? distant_seed(cfg.seed, epoch, idx)
                                                                     : distant_seed(cfg.seed, 0, idx);
                       PreparedSample prep;
                       if (cfg.augment)
                       {
                         Rng rr(rotation_seed(cfg.seed, epoch, idx));
                         const Mat3 R = random_rotation(rr);
                         prep = prepare_sample(s, tm.graph, tm.features, ds, &R);
                       }
                       else
                       {
                         prep = prepare_sample(s, tm.graph, tm.features, ds);
                       }
                       const ModelInput<T> in = make_input<T>(prep.graphs, prep.features);
                       Tape<T> tape;
                       const Matrix<T> pred = model.forward(params, in, tape);
                       Matrix<T> dpred;
                       const double loss = huber_loss(pred, normalized_target<T>(s, tm), cfg.huber_delta, &dpred);
                       if (!std::isfinite(loss))
                       {
                         throw Error(concat("non-finite loss at epoch ", epoch + 1, ", sample ", idx, " (seed ", s.seed,
                                            ")"));
                       }
                       std::vector<T> &g = sample_grads[k];
                       std::fill(g.begin(), g.end(), T(0));
                       model.backward(params, g, in, tape, dpred);
                       sample_loss[w0 + k - b0] = loss;
                     });
        for (std::size_t k = 0; k < w1 - w0; ++k)
        {
          const std::vector<T> &g = sample_grads[k];
          for (std::size_t i = 0; i < total.size(); ++i)
          {
            total[i] += g[i];
          }
        }
      }
      const auto inv = static_cast<T>(1.0 / static_cast<double>(b1 - b0));
      for (T &x : total)
      {
        x *= inv;
      }
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < b1 - b0; ++k)
      {
        batch_loss += sample_loss[k];
      }
      loss_sum += batch_loss;
      norm_sum += clip_grad_norm(total, cfg.clip_norm);
      const double lr = cosine_lr(step, total_steps, cfg.lr_start, cfg.lr_end);
      opt.step(params, total, lr);
      log.lr = lr;
      ++step;
    }
    log.loss = loss_sum / static_cast<double>(n);
    log.grad_norm = norm_sum / static_cast<double>(steps_per_epoch);
    result.log.push_back(log);
    if (on_epoch)
    {
      on_epoch(log);
    }
  }
  tm.params.assign(params.begin(), params.end());
  return result;
}

}  // namespace detail

inline TrainResult train(const std::vector<SampleRecord> &data, const TrainConfig &cfg,
                         const EpochCallback &on_epoch = {})
{
  cfg.validate();
  MSCAT_REQUIRE(!data.empty(), "train: empty dataset");
  const ProblemVariant v = data.front().problem.variant;
  for (const auto &s : data)
  {
    MSCAT_REQUIRE(s.problem.variant == v, "train: mixed problem variants in the dataset");
  }
  return cfg.precision == Precision::F32 ? detail::train_impl<float>(data, cfg, on_epoch)
                                         : detail::train_impl<double>(data, cfg, on_epoch);
}

// Runs a trained model on samples; parameters are cast once.
class Predictor
{
public:
  explicit Predictor(TrainedModel tm) : tm_(std::move(tm)), model_(tm_.model)
  {
    MSCAT_REQUIRE(tm_.params.size() == model_.parameter_count(), "checkpoint has ", tm_.params.size(),
                  " parameters, model needs ", model_.parameter_count());
    p32_.assign(tm_.params.begin(), tm_.params.end());
    p64_ = tm_.params;
  }

  const TrainedModel &trained() const { return tm_; }
  const Model &model() const { return model_; }

  // Per-vertex prediction in physical units (real channel, plus imaginary for Helmholtz).
  Matrix<double> predict_matrix(const SampleRecord &s, std::uint64_t distant_seed) const
  {
    MSCAT_REQUIRE(s.problem.variant == tm_.variant, "model trained for ", to_string(tm_.variant),
                  " cannot evaluate a ", to_string(s.problem.variant), " sample");
    const PreparedSample prep = prepare_sample(s, tm_.graph, tm_.features, distant_seed);
    Matrix<double> out;
    if (tm_.precision == Precision::F32)
    {
      out = cast<double>(model_.predict(p32_, make_input<float>(prep.graphs, prep.features)));
    }
    else
    {
      out = model_.predict(p64_, make_input<double>(prep.graphs, prep.features));
    }
    if (!tm_.target_mean.empty())
    {
      for (std::size_t i = 0; i < out.rows; ++i)
      {
        for (std::size_t c = 0; c < out.cols; ++c)
        {
          out(i, c) = out(i, c) * tm_.target_scale[c] + tm_.target_mean[c];
        }
      }
    }
    return out;
  }

  std::vector<Complex> predict(const SampleRecord &s, std::uint64_t distant_seed) const
  {
    const Matrix<double> m = predict_matrix(s, distant_seed);
    std::vector<Complex> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
    {
      out[i] = Complex(m(i, 0), m.cols > 1 ? m(i, 1) : 0.0);
    }
    return out;
  }

private:
  TrainedModel tm_;
  Model model_;
  std::vector<float> p32_;
  std::vector<double> p64_;
};

inline constexpr std::string_view kCheckpointMagic{"MSNN01\n", 7};

inline Json graph_config_to_json(const GraphConfig &g)
{
  return {{"levels", g.levels},
          {"alpha", g.alpha},
          {"candidates", g.candidates},
          {"base_cell", g.base_cell},
          {"half_extent", g.half_extent}};
}

inline GraphConfig graph_config_from_json(const Json &j)
{
  GraphConfig g;
  g.levels = j.at("levels").get<int>();
  g.alpha = j.at("alpha").get<double>();
  g.candidates = j.at("candidates").get<int>();
  g.base_cell = j.at("base_cell").get<double>();
  g.half_extent = j.at("half_extent").get<double>();
  return g;
}

inline std::vector<char> encode_checkpoint(const TrainedModel &tm)
{
  const Model model(tm.model);
  MSCAT_REQUIRE(tm.params.size() == model.parameter_count(), "checkpoint: parameter count mismatch");
  Json blocks = Json::array();
  for (const auto &b : model.layout().blocks())
  {
    blocks.push_back({{"name", b.name}, {"size", b.size}});
  }
  const ModelConfig &mc = tm.model;
  const Json header = {
      {"format_version", 1},
      {"variant", to_string(tm.variant)},
      {"model",
       {{"node_in", mc.node_in},
        {"edge_in", mc.edge_in},
        {"out_dim", mc.out_dim},
        {"d0", mc.d0},
        {"levels", mc.levels},
        {"boundary_blocks", mc.boundary_blocks},
        {"distant_blocks", mc.distant_blocks}}},
      {"graph", graph_config_to_json(tm.graph)},
      {"features",
       {{"pe_pairs", tm.features.pe_pairs},
        {"pe_min_wavelength", tm.features.pe_min_wavelength},
        {"pe_max_wavelength", tm.features.pe_max_wavelength}}},
      {"precision", to_string(tm.precision)},
      {"target_normalization", {{"mean", tm.target_mean}, {"scale", tm.target_scale}}},
      {"parameter_count", tm.params.size()},
      {"blocks", blocks}};
  ByteWriter w;
  begin_container(w, kCheckpointMagic, header);
  for (double p : tm.params)
  {
    w.f64(p);
  }
  return w.bytes();
}

inline TrainedModel decode_checkpoint(std::span<const char> bytes)
{
  ByteReader r(bytes);
  const Json header = open_container(r, kCheckpointMagic);
  TrainedModel tm;
  std::size_t count = 0;
  try
  {
    tm.variant = parse_variant(header.at("variant").get<std::string>());
    const Json &m = header.at("model");
    tm.model.node_in = m.at("node_in").get<std::size_t>();
    tm.model.edge_in = m.at("edge_in").get<std::size_t>();
    tm.model.out_dim = m.at("out_dim").get<std::size_t>();
    tm.model.d0 = m.at("d0").get<std::size_t>();
    tm.model.levels = m.at("levels").get<int>();
    tm.model.boundary_blocks = m.at("boundary_blocks").get<int>();
    tm.model.distant_blocks = m.at("distant_blocks").get<int>();
    tm.graph = graph_config_from_json(header.at("graph"));
    const Json &f = header.at("features");
    tm.features.pe_pairs = f.at("pe_pairs").get<int>();
    tm.features.pe_min_wavelength = f.at("pe_min_wavelength").get<double>();
    tm.features.pe_max_wavelength = f.at("pe_max_wavelength").get<double>();
    tm.precision = parse_precision(header.at("precision").get<std::string>());
    tm.target_mean = header.at("target_normalization").at("mean").get<std::vector<double>>();
    tm.target_scale = header.at("target_normalization").at("scale").get<std::vector<double>>();
    count = header.at("parameter_count").get<std::size_t>();
  }
  catch (const Json::exception &e)
  {
    throw FormatError(FormatError::Kind::BadHeader, concat("checkpoint header: ", e.what()));
  }
  catch (const PreconditionError &e)
  {
    throw FormatError(FormatError::Kind::BadHeader, concat("checkpoint header: ", e.what()));
  }
  const Model model(tm.model);
  const auto &blocks = model.layout().blocks();
  const Json &hb = header.at("blocks");
  if (count != model.parameter_count() || hb.size() != blocks.size())
  {
    throw FormatError(FormatError::Kind::CountMismatch, "checkpoint parameter blocks do not match the model");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i)
  {
    if (hb[i].at("name").get<std::string>() != blocks[i].name || hb[i].at("size").get<std::size_t>() != blocks[i].size)
    {
      throw FormatError(FormatError::Kind::CountMismatch, concat("checkpoint block ", i, " does not match"));
    }
  }
  if (r.remaining() < count * 8)
  {
    throw FormatError(FormatError::Kind::Truncated, "checkpoint parameters truncated");
  }
  tm.params.resize(count);
  for (double &p : tm.params)
  {
    p = r.f64();
  }
  if (r.remaining() != 0)
  {
    throw FormatError(FormatError::Kind::CountMismatch, "trailing bytes after checkpoint parameters");
  }
  return tm;
}

inline void save_checkpoint(const TrainedModel &tm, const std::filesystem::path &path)
{
  write_file(path, encode_checkpoint(tm));
}

inline TrainedModel load_checkpoint(const std::filesystem::path &path) { return decode_checkpoint(read_file(path)); }

}  // namespace mscat::nn

#endif  // MSCAT_NN_TRAIN_HPP
