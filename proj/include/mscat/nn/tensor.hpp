// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_NN_TENSOR_HPP
#define MSCAT_NN_TENSOR_HPP

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include "mscat/core.hpp"

namespace mscat::nn
{

// Dense row-major matrix.
template <class T>
struct Matrix
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

  T *row(std::size_t i) { return data.data() + i * cols; }
  const T *row(std::size_t i) const { return data.data() + i * cols; }
  T &operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T &operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
  friend bool operator==(const Matrix &, const Matrix &) = default;
};

template <class To, class From>
Matrix<To> cast(const Matrix<From> &m)
{
  Matrix<To> out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i)
  {
    out.data[i] = static_cast<To>(m.data[i]);
  }
  return out;
}

namespace detail
{

inline constexpr std::size_t kRowBlock = 6;

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wpsabi"

template <class T>
struct Simd
{
  static constexpr std::size_t width = 32 / sizeof(T);
  typedef T type __attribute__((vector_size(32)));
};

template <class T>
inline typename Simd<T>::type load(const T *p)
{
  typename Simd<T>::type v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <class T>
inline void store(T *p, const typename Simd<T>::type &v)
{
  std::memcpy(p, &v, sizeof(v));
}

//
// C[6 x n] += A[6 x k] B[k x n] for one block of six rows held in a 6 x 2
// register tile. Every row goes through the same instruction sequence, so a
// row's result does not depend on its position in the matrix.
//
template <class T>
inline void gemm_block(std::size_t n, std::size_t k, const T *A, std::size_t lda, const T *B, std::size_t ldb, T *C,
                       std::size_t ldc)
{
  using V = typename Simd<T>::type;
  constexpr std::size_t W = Simd<T>::width;
  std::size_t j0 = 0;
  for (; j0 + 2 * W <= n; j0 += 2 * W)
  {
    V c00 = load(C + 0 * ldc + j0), c01 = load(C + 0 * ldc + j0 + W);
    V c10 = load(C + 1 * ldc + j0), c11 = load(C + 1 * ldc + j0 + W);
    V c20 = load(C + 2 * ldc + j0), c21 = load(C + 2 * ldc + j0 + W);
    V c30 = load(C + 3 * ldc + j0), c31 = load(C + 3 * ldc + j0 + W);
    V c40 = load(C + 4 * ldc + j0), c41 = load(C + 4 * ldc + j0 + W);
    V c50 = load(C + 5 * ldc + j0), c51 = load(C + 5 * ldc + j0 + W);
    const T *b = B + j0;
    for (std::size_t p = 0; p < k; ++p, b += ldb)
    {
      const V b0 = load(b), b1 = load(b + W);
      V a;
      a = V{} + A[0 * lda + p];
      c00 += a * b0;
      c01 += a * b1;
      a = V{} + A[1 * lda + p];
      c10 += a * b0;
      c11 += a * b1;
      a = V{} + A[2 * lda + p];
      c20 += a * b0;
      c21 += a * b1;
      a = V{} + A[3 * lda + p];
      c30 += a * b0;
      c31 += a * b1;
      a = V{} + A[4 * lda + p];
      c40 += a * b0;
      c41 += a * b1;
      a = V{} + A[5 * lda + p];
      c50 += a * b0;
      c51 += a * b1;
    }
    store(C + 0 * ldc + j0, c00), store(C + 0 * ldc + j0 + W, c01);
    store(C + 1 * ldc + j0, c10), store(C + 1 * ldc + j0 + W, c11);
    store(C + 2 * ldc + j0, c20), store(C + 2 * ldc + j0 + W, c21);
    store(C + 3 * ldc + j0, c30), store(C + 3 * ldc + j0 + W, c31);
    store(C + 4 * ldc + j0, c40), store(C + 4 * ldc + j0 + W, c41);
    store(C + 5 * ldc + j0, c50), store(C + 5 * ldc + j0 + W, c51);
  }
  for (std::size_t j = j0; j < n; ++j)
  {
    for (std::size_t r = 0; r < kRowBlock; ++r)
    {
      T s = C[r * ldc + j];
      for (std::size_t p = 0; p < k; ++p)
      {
        s += A[r * lda + p] * B[p * ldb + j];
      }
      C[r * ldc + j] = s;
    }
  }
}

#pragma GCC diagnostic pop

}  // namespace detail

//
// C[m x n] (+)= A[m x k] B[k x n], all row-major with the given leading
// dimensions. Remainder rows are padded to a full block.
//
template <class T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T *A, std::size_t lda, const T *B, std::size_t ldb,
          T *C, std::size_t ldc, bool accumulate)
{
  if (!accumulate)
  {
    for (std::size_t i = 0; i < m; ++i)
    {
      std::fill(C + i * ldc, C + i * ldc + n, T(0));
    }
  }
  if (n == 0 || k == 0)
  {
    return;
  }
  constexpr std::size_t R = detail::kRowBlock;
  std::size_t i = 0;
  for (; i + R <= m; i += R)
  {
    detail::gemm_block(n, k, A + i * lda, lda, B, ldb, C + i * ldc, ldc);
  }
  if (i < m)
  {
    std::vector<T> a(R * k, T(0));
    std::vector<T> c(R * n, T(0));
    for (std::size_t r = 0; i + r < m; ++r)
    {
      std::copy(A + (i + r) * lda, A + (i + r) * lda + k, a.begin() + static_cast<std::ptrdiff_t>(r * k));
      std::copy(C + (i + r) * ldc, C + (i + r) * ldc + n, c.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    detail::gemm_block(n, k, a.data(), k, B, ldb, c.data(), n);
    for (std::size_t r = 0; i + r < m; ++r)
    {
      std::copy(c.begin() + static_cast<std::ptrdiff_t>(r * n), c.begin() + static_cast<std::ptrdiff_t>((r + 1) * n),
                C + (i + r) * ldc);
    }
  }
}

template <class T>
void transpose(std::size_t rows, std::size_t cols, const T *in, T *out)
{
  constexpr std::size_t tile = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += tile)
  {
    for (std::size_t j0 = 0; j0 < cols; j0 += tile)
    {
      const std::size_t i1 = std::min(rows, i0 + tile), j1 = std::min(cols, j0 + tile);
      for (std::size_t i = i0; i < i1; ++i)
      {
        for (std::size_t j = j0; j < j1; ++j)
        {
          out[j * rows + i] = in[i * cols + j];
        }
      }
    }
  }
}

// C[m x n] = A[m x k] B^T where B is [n x k].
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T *A, const T *B, T *C, std::vector<T> &scratch)
{
  scratch.resize(n * k);
  transpose(n, k, B, scratch.data());
  gemm(m, n, k, A, k, scratch.data(), n, C, n, false);
}

// C[k x n] += A^T B where A is [m x k] and B is [m x n].
template <class T>
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const T *A, const T *B, T *C, std::vector<T> &scratch)
{
  scratch.resize(m * k);
  transpose(m, k, A, scratch.data());
  gemm(k, n, m, scratch.data(), m, B, n, C, n, true);
}

}  // namespace mscat::nn

#endif  // MSCAT_NN_TENSOR_HPP
