// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_NN_MODEL_HPP
#define MSCAT_NN_MODEL_HPP

#include "mscat/features.hpp"
#include "mscat/nn/layers.hpp"

namespace mscat::nn
{

struct ModelConfig
{
  std::size_t node_in = 0;
  std::size_t edge_in = 0;
  std::size_t out_dim = 1;  // d^f
  std::size_t d0 = 64;
  int levels = 3;           // L
  int boundary_blocks = 2;  // N_b
  int distant_blocks = 4;   // N_d

  std::size_t level_dim(int j) const { return d0 << j; }

  void validate() const
  {
    MSCAT_REQUIRE(node_in > 0 && edge_in > 0, "model: feature dimensions must be positive");
    MSCAT_REQUIRE(out_dim >= 1, "model: output dimension must be >= 1");
    MSCAT_REQUIRE(d0 >= 1, "model: d0 must be >= 1");
    MSCAT_REQUIRE(levels >= 1 && levels <= 8, "model: levels must be in [1, 8]");
    MSCAT_REQUIRE(boundary_blocks >= 1, "model: at least one boundary block is required");
    MSCAT_REQUIRE(distant_blocks >= 0, "model: distant blocks must be >= 0");
  }
  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

inline ModelConfig model_config_for(ProblemVariant v, const FeatureConfig &fc = {})
{
  ModelConfig c;
  c.node_in = node_feature_dim(v, fc);
  c.edge_in = edge_feature_dim(v, fc);
  c.out_dim = is_helmholtz(v) ? 2 : 1;
  return c;
}

template <class T>
struct ModelInput
{
  const MultiscaleGraphSet *graphs = nullptr;
  Matrix<T> nodes;
  Matrix<T> boundary_edges;
  std::vector<Matrix<T>> down_edges, up_edges;
  Matrix<T> distant_edges;
};

template <class T>
ModelInput<T> make_input(const MultiscaleGraphSet &g, const FeatureTensors &f)
{
  ModelInput<T> in;
  in.graphs = &g;
  in.nodes = cast<T>(f.nodes);
  in.boundary_edges = cast<T>(f.boundary_edges);
  for (const auto &m : f.down_edges)
  {
    in.down_edges.push_back(cast<T>(m));
  }
  for (const auto &m : f.up_edges)
  {
    in.up_edges.push_back(cast<T>(m));
  }
  in.distant_edges = cast<T>(f.distant_edges);
  return in;
}

template <class T>
struct Tape
{
  MlpCache<T> node_enc, edge_enc_boundary, edge_enc_distant;
  std::vector<MlpCache<T>> edge_enc_down, edge_enc_up, expand, contract;
  std::vector<BlockCache<T>> lead, down, distant, up, trail;
};

//
// Multiscale encode-process-decode network. Parameters live in one flat
// vector; the layout order is the canonical serialization order.
//
class Model
{
public:
  Model() = default;

  explicit Model(const ModelConfig &cfg) : cfg_(cfg)
  {
    cfg.validate();
    const int L = cfg.levels;
    const std::size_t d0 = cfg.d0;
    node_enc_ = Mlp(layout_, init_, "encoder.node", cfg.node_in, d0, true);
    edge_enc_boundary_ = Mlp(layout_, init_, "encoder.edge.boundary", cfg.edge_in, d0, true);
    for (int j = 1; j < L; ++j)
    {
      edge_enc_down_.emplace_back(layout_, init_, concat("encoder.edge.down", j), cfg.edge_in, cfg.level_dim(j), true);
      edge_enc_up_.emplace_back(layout_, init_, concat("encoder.edge.up", j), cfg.edge_in, cfg.level_dim(j - 1), true);
    }
    edge_enc_distant_ = Mlp(layout_, init_, "encoder.edge.distant", cfg.edge_in, cfg.level_dim(L - 1), true);
    for (int b = 0; b < cfg.boundary_blocks; ++b)
    {
      lead_.emplace_back(layout_, init_, concat("boundary.lead", b), d0, d0, d0, d0, d0);
    }
    for (int j = 1; j < L; ++j)
    {
      const std::size_t dj = cfg.level_dim(j), dp = cfg.level_dim(j - 1);
      expand_.emplace_back(layout_, init_, concat("expand", j), dp, dj, true);
      down_.emplace_back(layout_, init_, concat("down", j), dj, dj, dj, dj, dj);
    }
    const std::size_t dc = cfg.level_dim(L - 1);
    for (int b = 0; b < cfg.distant_blocks; ++b)
    {
      distant_.emplace_back(layout_, init_, concat("distant", b), dc, dc, dc, dc, dc);
    }
    for (int j = L - 1; j >= 1; --j)
    {
      const std::size_t dj = cfg.level_dim(j), dp = cfg.level_dim(j - 1);
      contract_.emplace_back(layout_, init_, concat("contract", j), dj, dp, true);
      up_.emplace_back(layout_, init_, concat("up", j), dp, dj, dp, dp, dp);
    }
    // contract_/up_ were built coarse-to-fine; index them by level.
    std::reverse(contract_.begin(), contract_.end());
    std::reverse(up_.begin(), up_.end());
    for (int b = 0; b < cfg.boundary_blocks; ++b)
    {
      const bool last = b + 1 == cfg.boundary_blocks;
      trail_.emplace_back(layout_, init_, concat("boundary.trail", b), d0, d0, d0, d0, last ? cfg.out_dim : d0, last);
    }
  }

  const ModelConfig &config() const { return cfg_; }
  const ParamLayout &layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.total(); }

  template <class T>
  std::vector<T> initial_parameters(std::uint64_t seed) const
  {
    std::vector<T> p(layout_.total(), T(0));
    Rng rng(seed);
    for (const InitRecord &r : init_)
    {
      const double bound = 1.0 / std::sqrt(static_cast<double>(r.fan_in));
      for (std::size_t i = 0; i < r.size; ++i)
      {
        switch (r.kind)
        {
        case Init::Uniform:
          p[r.offset + i] = static_cast<T>(rng.uniform(-bound, bound));
          break;
        case Init::Ones:
          p[r.offset + i] = T(1);
          break;
        case Init::Zeros:
          p[r.offset + i] = T(0);
          break;
        }
      }
    }
    return p;
  }

  template <class T>
  Matrix<T> forward(const std::vector<T> &params, const ModelInput<T> &in, Tape<T> &tape) const
  {
    MSCAT_REQUIRE(params.size() == layout_.total(), "model: parameter vector has ", params.size(),
                  " entries, expected ", layout_.total());
    const MultiscaleGraphSet &g = *in.graphs;
    check_input(in);
    const T *p = params.data();
    const int L = cfg_.levels;
    const auto Lz = static_cast<std::size_t>(L);
    tape.edge_enc_down.assign(Lz - 1, {});
    tape.edge_enc_up.assign(Lz - 1, {});
    tape.expand.assign(Lz - 1, {});
    tape.contract.assign(Lz - 1, {});
    tape.down.assign(Lz - 1, {});
    tape.up.assign(Lz - 1, {});
    tape.lead.assign(lead_.size(), {});
    tape.distant.assign(distant_.size(), {});
    tape.trail.assign(trail_.size(), {});

    Matrix<T> h = node_enc_.forward(p, in.nodes, tape.node_enc);
    Matrix<T> e0 = edge_enc_boundary_.forward(p, in.boundary_edges, tape.edge_enc_boundary);
    for (std::size_t b = 0; b < lead_.size(); ++b)
    {
      Matrix<T> eo, ho;
      lead_[b].forward(p, g.boundary.edges, h, h, e0, tape.lead[b], eo, ho);
      e0 = std::move(eo);
      h = std::move(ho);
    }
    std::vector<Matrix<T>> skip(Lz);
    skip[0] = std::move(h);
    for (std::size_t j = 1; j < Lz; ++j)
    {
      Matrix<T> x = expand_[j - 1].forward(p, skip[j - 1], tape.expand[j - 1]);
      Matrix<T> dst = gather_rows(x, g.level_nodes[j].origin);
      Matrix<T> e = edge_enc_down_[j - 1].forward(p, in.down_edges[j - 1], tape.edge_enc_down[j - 1]);
      Matrix<T> eo;
      down_[j - 1].forward(p, g.down[j - 1], x, dst, e, tape.down[j - 1], eo, skip[j]);
    }
    Matrix<T> cur = skip[Lz - 1];
    Matrix<T> ed = edge_enc_distant_.forward(p, in.distant_edges, tape.edge_enc_distant);
    for (std::size_t b = 0; b < distant_.size(); ++b)
    {
      Matrix<T> eo, ho;
      distant_[b].forward(p, g.distant.edges, cur, cur, ed, tape.distant[b], eo, ho);
      ed = std::move(eo);
      cur = std::move(ho);
    }
    for (std::size_t j = Lz - 1; j >= 1; --j)
    {
      Matrix<T> contracted = contract_[j - 1].forward(p, cur, tape.contract[j - 1]);
      Matrix<T> init = skip[j - 1];
      const auto &shared = g.shared[j - 1];
      for (std::size_t i = 0; i < shared.size(); ++i)
      {
        if (shared[i] >= 0)
        {
          std::copy(contracted.row(static_cast<std::size_t>(shared[i])),
                    contracted.row(static_cast<std::size_t>(shared[i])) + contracted.cols, init.row(i));
        }
      }
      Matrix<T> e = edge_enc_up_[j - 1].forward(p, in.up_edges[j - 1], tape.edge_enc_up[j - 1]);
      Matrix<T> eo, ho;
      up_[j - 1].forward(p, g.up[j - 1], cur, init, e, tape.up[j - 1], eo, ho);
      cur = std::move(ho);
    }
    for (std::size_t b = 0; b < trail_.size(); ++b)
    {
      Matrix<T> eo, ho;
      trail_[b].forward(p, g.boundary.edges, cur, cur, e0, tape.trail[b], eo, ho);
      e0 = std::move(eo);
      cur = std::move(ho);
    }
    return cur;
  }

  template <class T>
  Matrix<T> predict(const std::vector<T> &params, const ModelInput<T> &in) const
  {
    Tape<T> tape;
    return forward(params, in, tape);
  }

  // Accumulates dL/dparams into grads given dL/doutput.
  template <class T>
  void backward(const std::vector<T> &params, std::vector<T> &grads, const ModelInput<T> &in, const Tape<T> &tape,
                const Matrix<T> &d_out) const
  {
    MSCAT_REQUIRE(grads.size() == layout_.total(), "model: gradient vector size mismatch");
    const MultiscaleGraphSet &g = *in.graphs;
    const T *p = params.data();
    T *gr = grads.data();
    const auto Lz = static_cast<std::size_t>(cfg_.levels);
    const std::size_t n0 = g.boundary.nodes.size();
    const std::size_t d0 = cfg_.d0;
    const std::size_t ne0 = g.boundary.edges.size();

    // Trailing boundary blocks.
    Matrix<T> dcur = d_out;
    Matrix<T> de0;  // gradient w.r.t. the edge latents leaving a block
    for (std::size_t b = trail_.size(); b-- > 0;)
    {
      Matrix<T> dein(ne0, d0), dh(n0, d0);
      trail_[b].backward(p, gr, g.boundary.edges, tape.trail[b], de0.rows ? &de0 : nullptr, dcur, dein, dh, dh);
      de0 = std::move(dein);
      dcur = std::move(dh);
    }

    // Up path, fine to coarse. dlevel[j] collects gradients of the down-path
    // features of level j (the skip connections).
    std::vector<Matrix<T>> dlevel(Lz);
    for (std::size_t j = 0; j < Lz; ++j)
    {
      dlevel[j] = Matrix<T>(g.level_nodes[j].size(), cfg_.level_dim(static_cast<int>(j)));
    }
    for (std::size_t j = 1; j < Lz; ++j)
    {
      const std::size_t dj = cfg_.level_dim(static_cast<int>(j)), dp = cfg_.level_dim(static_cast<int>(j) - 1);
      const std::size_t nc = g.level_nodes[j].size(), nf = g.level_nodes[j - 1].size();
      Matrix<T> dedge(g.up[j - 1].size(), dp), dcoarse(nc, dj), dinit(nf, dp);
      up_[j - 1].backward(p, gr, g.up[j - 1], tape.up[j - 1], static_cast<const Matrix<T> *>(nullptr), dcur, dedge, dcoarse, dinit);
      edge_enc_up_[j - 1].backward(p, gr, tape.edge_enc_up[j - 1], dedge, false);
      Matrix<T> dcontracted(nc, dp);
      const auto &shared = g.shared[j - 1];
      for (std::size_t i = 0; i < nf; ++i)
      {
        T *dst = shared[i] >= 0 ? dcontracted.row(static_cast<std::size_t>(shared[i])) : dlevel[j - 1].row(i);
        const T *src = dinit.row(i);
        for (std::size_t k = 0; k < dp; ++k)
        {
          dst[k] += src[k];
        }
      }
      const Matrix<T> dc = contract_[j - 1].backward(p, gr, tape.contract[j - 1], dcontracted);
      for (std::size_t i = 0; i < dcoarse.data.size(); ++i)
      {
        dcoarse.data[i] += dc.data[i];
      }
      dcur = std::move(dcoarse);
    }

    // Distant blocks.
    {
      const std::size_t nc = g.level_nodes[Lz - 1].size(), dc = cfg_.level_dim(cfg_.levels - 1);
      Matrix<T> ded;
      for (std::size_t b = distant_.size(); b-- > 0;)
      {
        Matrix<T> dein(g.distant.edges.size(), dc), dh(nc, dc);
        distant_[b].backward(p, gr, g.distant.edges, tape.distant[b], ded.rows ? &ded : nullptr, dcur, dein, dh, dh);
        ded = std::move(dein);
        dcur = std::move(dh);
      }
      if (!distant_.empty())
      {
        edge_enc_distant_.backward(p, gr, tape.edge_enc_distant, ded, false);
      }
      for (std::size_t i = 0; i < dcur.data.size(); ++i)
      {
        dlevel[Lz - 1].data[i] += dcur.data[i];
      }
    }

    // Down path, coarse to fine.
    for (std::size_t j = Lz - 1; j >= 1; --j)
    {
      const std::size_t dj = cfg_.level_dim(static_cast<int>(j));
      const std::size_t nc = g.level_nodes[j].size(), nf = g.level_nodes[j - 1].size();
      Matrix<T> dedge(g.down[j - 1].size(), dj), dx(nf, dj), ddst(nc, dj);
      down_[j - 1].backward(p, gr, g.down[j - 1], tape.down[j - 1], static_cast<const Matrix<T> *>(nullptr), dlevel[j], dedge, dx, ddst);
      edge_enc_down_[j - 1].backward(p, gr, tape.edge_enc_down[j - 1], dedge, false);
      const auto &origin = g.level_nodes[j].origin;
      for (std::size_t c = 0; c < nc; ++c)
      {
        T *d = dx.row(origin[c]);
        const T *s = ddst.row(c);
        for (std::size_t k = 0; k < dj; ++k)
        {
          d[k] += s[k];
        }
      }
      const Matrix<T> dprev = expand_[j - 1].backward(p, gr, tape.expand[j - 1], dx);
      for (std::size_t i = 0; i < dprev.data.size(); ++i)
      {
        dlevel[j - 1].data[i] += dprev.data[i];
      }
    }

    // Leading boundary blocks; their final edge latents also fed the trailing blocks.
    dcur = std::move(dlevel[0]);
    for (std::size_t b = lead_.size(); b-- > 0;)
    {
      Matrix<T> dein(ne0, d0), dh(n0, d0);
      lead_[b].backward(p, gr, g.boundary.edges, tape.lead[b], &de0, dcur, dein, dh, dh);
      de0 = std::move(dein);
      dcur = std::move(dh);
    }
    edge_enc_boundary_.backward(p, gr, tape.edge_enc_boundary, de0, false);
    node_enc_.backward(p, gr, tape.node_enc, dcur, false);
  }

private:
  template <class T>
  static Matrix<T> gather_rows(const Matrix<T> &m, const std::vector<std::uint32_t> &rows)
  {
    Matrix<T> out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
      std::copy(m.row(rows[i]), m.row(rows[i]) + m.cols, out.row(i));
    }
    return out;
  }

  template <class T>
  void check_input(const ModelInput<T> &in) const
  {
    MSCAT_REQUIRE(in.graphs != nullptr, "model: input has no graphs");
    const MultiscaleGraphSet &g = *in.graphs;
    MSCAT_REQUIRE(g.levels == cfg_.levels, "model: graph set has ", g.levels, " levels, model expects ",
                  cfg_.levels);
    MSCAT_REQUIRE(in.nodes.rows == g.boundary.nodes.size() && in.nodes.cols == cfg_.node_in,
                  "model: node features do not match the boundary graph (", in.nodes.rows, "x", in.nodes.cols, ")");
    MSCAT_REQUIRE(in.boundary_edges.rows == g.boundary.edges.size() && in.boundary_edges.cols == cfg_.edge_in,
                  "model: boundary edge features do not match the graph");
    MSCAT_REQUIRE(in.down_edges.size() + 1 == static_cast<std::size_t>(cfg_.levels) &&
                      in.up_edges.size() == in.down_edges.size(),
                  "model: transition feature count mismatch");
    for (std::size_t j = 0; j < in.down_edges.size(); ++j)
    {
      MSCAT_REQUIRE(in.down_edges[j].rows == g.down[j].size() && in.up_edges[j].rows == g.up[j].size(),
                    "model: transition edge features do not match level ", j + 1);
    }
    MSCAT_REQUIRE(in.distant_edges.rows == g.distant.edges.size(), "model: distant edge features mismatch");
  }

  ModelConfig cfg_;
  ParamLayout layout_;
  std::vector<InitRecord> init_;
  Mlp node_enc_, edge_enc_boundary_, edge_enc_distant_;
  std::vector<Mlp> edge_enc_down_, edge_enc_up_, expand_, contract_;
  std::vector<ProcessorBlock> lead_, down_, distant_, up_, trail_;
};

}  // namespace mscat::nn

#endif  // MSCAT_NN_MODEL_HPP
