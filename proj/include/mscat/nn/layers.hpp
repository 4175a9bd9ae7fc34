// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_NN_LAYERS_HPP
#define MSCAT_NN_LAYERS_HPP

#include <bit>
#include <cmath>
#include <type_traits>
#include <string>

#include "mscat/graphs.hpp"
#include "mscat/nn/tensor.hpp"

namespace mscat::nn
{

struct ParamBlock
{
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Flat parameter layout. Layers refer to their slices by offset.
class ParamLayout
{
public:
  std::size_t add(const std::string &name, std::size_t size)
  {
    const std::size_t off = total_;
    blocks_.push_back({name, off, size});
    total_ += size;
    return off;
  }

  std::size_t total() const { return total_; }
  const std::vector<ParamBlock> &blocks() const { return blocks_; }

private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

enum class Init
{
  Uniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  Ones,
  Zeros
};

struct InitRecord
{
  std::size_t offset, size, fan_in;
  Init kind;
};

struct Linear
{
  std::size_t in = 0, out = 0;
  std::size_t w = 0, b = 0;  // W is [in x out]

  Linear() = default;
  Linear(ParamLayout &layout, std::vector<InitRecord> &init, const std::string &name, std::size_t in_dim,
         std::size_t out_dim)
    : in(in_dim), out(out_dim)
  {
    w = layout.add(name + ".weight", in * out);
    b = layout.add(name + ".bias", out);
    init.push_back({w, in * out, in, Init::Uniform});
    init.push_back({b, out, in, Init::Uniform});
  }

  // y = x W + b.
  template <class T>
  void forward(const T *params, const Matrix<T> &x, Matrix<T> &y) const
  {
    MSCAT_REQUIRE(x.cols == in, "Linear: input has ", x.cols, " columns, expected ", in);
    y = Matrix<T>(x.rows, out);
    for (std::size_t r = 0; r < x.rows; ++r)
    {
      std::copy(params + b, params + b + out, y.row(r));
    }
    gemm(x.rows, out, in, x.data.data(), in, params + w, out, y.data.data(), out, true);
  }

  // Accumulates parameter gradients; returns dL/dx when wanted.
  template <class T>
  void backward(const T *params, T *grads, const Matrix<T> &x, const Matrix<T> &dy, Matrix<T> *dx,
                std::vector<T> &scratch) const
  {
    gemm_tn_acc(x.rows, out, in, x.data.data(), dy.data.data(), grads + w, scratch);
    for (std::size_t r = 0; r < dy.rows; ++r)
    {
      const T *g = dy.row(r);
      for (std::size_t j = 0; j < out; ++j)
      {
        grads[b + j] += g[j];
      }
    }
    if (dx)
    {
      *dx = Matrix<T>(x.rows, in);
      gemm_nt(x.rows, in, out, dy.data.data(), params + w, dx->data.data(), scratch);
    }
  }
};

namespace detail
{

// exp for float without libm calls so the loop vectorizes; relative error
// below 2e-7 on the clamped range.
inline float fast_exp(float x)
{
  x = std::min(88.0f, std::max(-87.0f, x));
  const float n = std::nearbyint(x * 1.44269504f);
  const float r = x - n * 0.693145752f - n * 1.42860677e-6f;
  float p = 1.98756912e-4f;
  p = p * r + 1.39819994e-3f;
  p = p * r + 8.33345205e-3f;
  p = p * r + 4.16657962e-2f;
  p = p * r + 1.66666657e-1f;
  p = p * r + 0.5f;
  p = p * r * r + r + 1.0f;
  const auto bits = static_cast<std::int32_t>(n) + 127;
  return p * std::bit_cast<float>(bits << 23);
}

}  // namespace detail

template <class T>
inline T sigmoid(T x)
{
  if constexpr (std::is_same_v<T, float>)
  {
    return 1.0f / (1.0f + detail::fast_exp(-x));
  }
  else
  {
    return T(1) / (T(1) + std::exp(-x));
  }
}

template <class T>
struct MlpCache
{
  Matrix<T> x, h1, a1, h2, a2, h3;
  Matrix<T> s1, s2;  // sigmoid(h1), sigmoid(h2)
  Matrix<T> xhat;
  std::vector<T> rstd;
};

//
// Three linear layers with SiLU between them; hidden width defaults to the
// output width. Optional layer normalization with gain and bias on the output.
//
struct Mlp
{
  static constexpr double kLayerNormEps = 1e-5;

  std::size_t in = 0, out = 0;
  bool layer_norm = true;
  Linear l1, l2, l3;
  std::size_t gain = 0, bias = 0;

  Mlp() = default;
  Mlp(ParamLayout &layout, std::vector<InitRecord> &init, const std::string &name, std::size_t in_dim,
      std::size_t out_dim, bool norm, std::size_t hidden_dim = 0)
    : in(in_dim), out(out_dim), layer_norm(norm),
      l1(layout, init, name + ".0", in_dim, hidden_dim ? hidden_dim : out_dim),
      l2(layout, init, name + ".1", hidden_dim ? hidden_dim : out_dim, hidden_dim ? hidden_dim : out_dim),
      l3(layout, init, name + ".2", hidden_dim ? hidden_dim : out_dim, out_dim)
  {
    if (layer_norm)
    {
      gain = layout.add(name + ".norm.gain", out);
      bias = layout.add(name + ".norm.bias", out);
      init.push_back({gain, out, 1, Init::Ones});
      init.push_back({bias, out, 1, Init::Zeros});
    }
  }

  template <class T>
  Matrix<T> forward(const T *params, Matrix<T> x, MlpCache<T> &c) const
  {
    MSCAT_REQUIRE(x.cols == in, "Mlp: input has ", x.cols, " columns, expected ", in);
    c.x = std::move(x);
    l1.forward(params, c.x, c.h1);
    silu(c.h1, c.s1, c.a1);
    l2.forward(params, c.a1, c.h2);
    silu(c.h2, c.s2, c.a2);
    l3.forward(params, c.a2, c.h3);
    if (!layer_norm)
    {
      return c.h3;
    }
    const std::size_t n = c.h3.rows;
    c.xhat = Matrix<T>(n, out);
    c.rstd.assign(n, T(0));
    Matrix<T> y(n, out);
    for (std::size_t r = 0; r < n; ++r)
    {
      const T *h = c.h3.row(r);
      T mean = 0;
      for (std::size_t j = 0; j < out; ++j)
      {
        mean += h[j];
      }
      mean /= static_cast<T>(out);
      T var = 0;
      for (std::size_t j = 0; j < out; ++j)
      {
        var += (h[j] - mean) * (h[j] - mean);
      }
      var /= static_cast<T>(out);
      const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      c.rstd[r] = rstd;
      T *xh = c.xhat.row(r);
      T *yr = y.row(r);
      for (std::size_t j = 0; j < out; ++j)
      {
        xh[j] = (h[j] - mean) * rstd;
        yr[j] = xh[j] * params[gain + j] + params[bias + j];
      }
    }
    return y;
  }

  // Returns dL/dx, or an empty matrix when want_dx is false.
  template <class T>
  Matrix<T> backward(const T *params, T *grads, const MlpCache<T> &c, const Matrix<T> &dy, bool want_dx = true) const
  {
    std::vector<T> scratch;
    Matrix<T> dh3;
    if (layer_norm)
    {
      const std::size_t n = dy.rows;
      dh3 = Matrix<T>(n, out);
      std::vector<T> dxh(out);
      for (std::size_t r = 0; r < n; ++r)
      {
        const T *g = dy.row(r);
        const T *xh = c.xhat.row(r);
        T m1 = 0, m2 = 0;
        for (std::size_t j = 0; j < out; ++j)
        {
          grads[gain + j] += g[j] * xh[j];
          grads[bias + j] += g[j];
          dxh[j] = g[j] * params[gain + j];
          m1 += dxh[j];
          m2 += dxh[j] * xh[j];
        }
        m1 /= static_cast<T>(out);
        m2 /= static_cast<T>(out);
        T *d = dh3.row(r);
        for (std::size_t j = 0; j < out; ++j)
        {
          d[j] = c.rstd[r] * (dxh[j] - m1 - xh[j] * m2);
        }
      }
    }
    else
    {
      dh3 = dy;
    }
    Matrix<T> da2, da1, dx;
    l3.backward(params, grads, c.a2, dh3, &da2, scratch);
    silu_backward(c.h2, c.s2, da2);
    l2.backward(params, grads, c.a1, da2, &da1, scratch);
    silu_backward(c.h1, c.s1, da1);
    l1.backward(params, grads, c.x, da1, want_dx ? &dx : nullptr, scratch);
    return dx;
  }

private:
  // Row by row so that every row sees the same instruction sequence.
  template <class T>
  static void silu(const Matrix<T> &h, Matrix<T> &sig, Matrix<T> &a)
  {
    sig = Matrix<T>(h.rows, h.cols);
    a = Matrix<T>(h.rows, h.cols);
    for (std::size_t r = 0; r < h.rows; ++r)
    {
      const T *hr = h.row(r);
      T *sr = sig.row(r);
      T *ar = a.row(r);
      for (std::size_t j = 0; j < h.cols; ++j)
      {
        sr[j] = sigmoid(hr[j]);
        ar[j] = hr[j] * sr[j];
      }
    }
  }

  // In place: d <- d * silu'(h).
  template <class T>
  static void silu_backward(const Matrix<T> &h, const Matrix<T> &sig, Matrix<T> &d)
  {
    for (std::size_t i = 0; i < h.data.size(); ++i)
    {
      const T s = sig.data[i];
      d.data[i] *= s * (T(1) + h.data[i] * (T(1) - s));
    }
  }
};

template <class T>
struct BlockCache
{
  MlpCache<T> edge, node;
};

//
// One round of message passing: edges are updated from (edge, source,
// destination) features, then destination nodes from (node, sum of updated
// incoming edges). Sums run in ascending edge order. The decoding block keeps
// its node MLP at the latent width and only narrows in the last layer.
//
struct ProcessorBlock
{
  std::size_t edge_dim = 0, src_dim = 0, dst_dim = 0, edge_out = 0, node_out = 0;
  bool edge_residual = false, node_residual = false;
  Mlp phi_e, phi_n;

  ProcessorBlock() = default;
  ProcessorBlock(ParamLayout &layout, std::vector<InitRecord> &init, const std::string &name, std::size_t edge_in,
                 std::size_t src_in, std::size_t dst_in, std::size_t edge_out_dim, std::size_t node_out_dim,
                 bool final_block = false)
    : edge_dim(edge_in), src_dim(src_in), dst_dim(dst_in), edge_out(edge_out_dim), node_out(node_out_dim),
      edge_residual(edge_in == edge_out_dim), node_residual(!final_block && dst_in == node_out_dim),
      phi_e(layout, init, name + ".edge", edge_in + src_in + dst_in, edge_out_dim, true),
      phi_n(layout, init, name + ".node", dst_in + edge_out_dim, node_out_dim, !final_block,
            final_block ? dst_in : 0)
  {
  }

  template <class T>
  void forward(const T *params, const EdgeList &edges, const Matrix<T> &src, const Matrix<T> &dst,
               const Matrix<T> &edge_in, BlockCache<T> &c, Matrix<T> &edge_out_m, Matrix<T> &node_out_m) const
  {
    const std::size_t ne = edges.size();
    MSCAT_REQUIRE(edge_in.rows == ne && edge_in.cols == edge_dim && src.cols == src_dim && dst.cols == dst_dim,
                  "ProcessorBlock: dimension mismatch");
    Matrix<T> ein(ne, edge_dim + src_dim + dst_dim);
    for (std::size_t e = 0; e < ne; ++e)
    {
      MSCAT_REQUIRE(edges.src[e] < src.rows && edges.dst[e] < dst.rows, "ProcessorBlock: edge ", e,
                    " out of range");
      T *row = ein.row(e);
      std::copy(edge_in.row(e), edge_in.row(e) + edge_dim, row);
      std::copy(src.row(edges.src[e]), src.row(edges.src[e]) + src_dim, row + edge_dim);
      std::copy(dst.row(edges.dst[e]), dst.row(edges.dst[e]) + dst_dim, row + edge_dim + src_dim);
    }
    edge_out_m = phi_e.forward(params, std::move(ein), c.edge);
    if (edge_residual)
    {
      for (std::size_t i = 0; i < edge_out_m.data.size(); ++i)
      {
        edge_out_m.data[i] += edge_in.data[i];
      }
    }
    Matrix<T> nin(dst.rows, dst_dim + edge_out);
    for (std::size_t v = 0; v < dst.rows; ++v)
    {
      std::copy(dst.row(v), dst.row(v) + dst_dim, nin.row(v));
    }
    for (std::size_t e = 0; e < ne; ++e)
    {
      T *agg = nin.row(edges.dst[e]) + dst_dim;
      const T *m = edge_out_m.row(e);
      for (std::size_t j = 0; j < edge_out; ++j)
      {
        agg[j] += m[j];
      }
    }
    node_out_m = phi_n.forward(params, std::move(nin), c.node);
    if (node_residual)
    {
      for (std::size_t i = 0; i < node_out_m.data.size(); ++i)
      {
        node_out_m.data[i] += dst.data[i];
      }
    }
  }

  // Gradients w.r.t. the inputs are added into d_edge_in, d_src and d_dst,
  // which must be pre-sized (d_src and d_dst may alias).
  template <class T>
  void backward(const T *params, T *grads, const EdgeList &edges, const BlockCache<T> &c,
                const Matrix<T> *d_edge_out, const Matrix<T> &d_node_out, Matrix<T> &d_edge_in, Matrix<T> &d_src,
                Matrix<T> &d_dst) const
  {
    const std::size_t ne = edges.size();
    const Matrix<T> dnin = phi_n.backward(params, grads, c.node, d_node_out);
    Matrix<T> de(ne, edge_out);
    if (d_edge_out)
    {
      de = *d_edge_out;
    }
    for (std::size_t e = 0; e < ne; ++e)
    {
      const T *g = dnin.row(edges.dst[e]) + dst_dim;
      T *d = de.row(e);
      for (std::size_t j = 0; j < edge_out; ++j)
      {
        d[j] += g[j];
      }
    }
    for (std::size_t v = 0; v < d_dst.rows; ++v)
    {
      const T *g = dnin.row(v);
      T *d = d_dst.row(v);
      for (std::size_t j = 0; j < dst_dim; ++j)
      {
        d[j] += g[j];
      }
      if (node_residual)
      {
        const T *gr = d_node_out.row(v);
        for (std::size_t j = 0; j < dst_dim; ++j)
        {
          d[j] += gr[j];
        }
      }
    }
    const Matrix<T> dein = phi_e.backward(params, grads, c.edge, de);
    for (std::size_t e = 0; e < ne; ++e)
    {
      const T *g = dein.row(e);
      T *dei = d_edge_in.row(e);
      for (std::size_t j = 0; j < edge_dim; ++j)
      {
        dei[j] += g[j];
      }
      if (edge_residual)
      {
        const T *gr = de.row(e);
        for (std::size_t j = 0; j < edge_dim; ++j)
        {
          dei[j] += gr[j];
        }
      }
      T *ds = d_src.row(edges.src[e]);
      for (std::size_t j = 0; j < src_dim; ++j)
      {
        ds[j] += g[edge_dim + j];
      }
      T *dd = d_dst.row(edges.dst[e]);
      for (std::size_t j = 0; j < dst_dim; ++j)
      {
        dd[j] += g[edge_dim + src_dim + j];
      }
    }
  }
};

}  // namespace mscat::nn

#endif  // MSCAT_NN_LAYERS_HPP
