// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_GMRES_HPP
#define MSCAT_GMRES_HPP

#include <span>

#include "mscat/core.hpp"

namespace mscat
{

template <typename T>
struct ScalarTraits
{
  static T conj(T v) { return v; }
  static double abs(T v) { return std::abs(v); }
};

template <typename T>
struct ScalarTraits<std::complex<T>>
{
  static std::complex<T> conj(std::complex<T> v) { return std::conj(v); }
  static double abs(std::complex<T> v) { return std::abs(v); }
};

template <typename S>
double norm2(std::span<const S> v)
{
  double s = 0.0;
  for (const S &x : v)
  {
    const double a = ScalarTraits<S>::abs(x);
    s += a * a;
  }
  return std::sqrt(s);
}

// Hermitian inner product sum(conj(a_i) * b_i).
template <typename S>
S inner(std::span<const S> a, std::span<const S> b)
{
  S s{};
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    s += ScalarTraits<S>::conj(a[i]) * b[i];
  }
  return s;
}

struct GmresReport
{
  int iterations = 0;
  double final_relative_residual = 0.0;
  bool converged = false;
  // Arnoldi residual estimate after each iteration (index 0 = initial, 1.0).
  std::vector<double> residual_history;
};

template <typename S>
struct GmresResult
{
  std::vector<S> solution;
  GmresReport report;
};

template <typename S>
using LinearOperator = std::function<void(std::span<const S> in, std::span<S> out)>;

//
// Full (non-restarted) GMRES with modified Gram-Schmidt Arnoldi and Givens
// rotations, started from x = 0. Stops once the true relative residual
// ||b - A x|| / ||b|| is at most rtol. On non-convergence the last iterate is
// returned with converged = false.
//
template <typename S>
GmresResult<S> gmres(const LinearOperator<S> &matvec, std::span<const S> b, double rtol,
                     int max_iter)
{
  MSCAT_REQUIRE(rtol > 0.0, "gmres: rtol must be positive");
  MSCAT_REQUIRE(max_iter >= 1, "gmres: max_iter must be at least 1");
  using Tr = ScalarTraits<S>;
  const std::size_t n = b.size();

  GmresResult<S> result;
  result.solution.assign(n, S{});
  auto &rep = result.report;
  const double bnorm = norm2<S>(b);
  rep.residual_history.push_back(bnorm > 0.0 ? 1.0 : 0.0);
  if (bnorm == 0.0)
  {
    rep.converged = true;
    return result;
  }

  const auto m = static_cast<std::size_t>(max_iter);
  std::vector<std::vector<S>> basis;
  basis.reserve(std::min<std::size_t>(m + 1, n + 1));
  basis.emplace_back(b.begin(), b.end());
  for (S &v : basis[0])
  {
    v /= bnorm;
  }

  // Column j of the Hessenberg matrix holds j + 2 entries.
  std::vector<std::vector<S>> h;
  std::vector<S> cs, sn;
  std::vector<S> g{S(bnorm)};
  std::vector<S> w(n), ax(n);

  auto form_solution = [&](std::size_t k)
  {
    std::vector<S> y(k);
    for (std::size_t i = k; i-- > 0;)
    {
      S s = g[i];
      for (std::size_t j = i + 1; j < k; ++j)
      {
        s -= h[j][i] * y[j];
      }
      y[i] = s / h[i][i];
    }
    std::fill(result.solution.begin(), result.solution.end(), S{});
    for (std::size_t j = 0; j < k; ++j)
    {
      for (std::size_t r = 0; r < n; ++r)
      {
        result.solution[r] += y[j] * basis[j][r];
      }
    }
  };

  auto true_residual = [&]
  {
    matvec(result.solution, ax);
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r)
    {
      const double a = Tr::abs(b[r] - ax[r]);
      s += a * a;
    }
    return std::sqrt(s) / bnorm;
  };

  for (std::size_t j = 0; j < m; ++j)
  {
    matvec(basis[j], w);
    std::vector<S> col(j + 2);
    for (std::size_t i = 0; i <= j; ++i)
    {
      col[i] = inner<S>(basis[i], w);
      for (std::size_t r = 0; r < n; ++r)
      {
        w[r] -= col[i] * basis[i][r];
      }
    }
    const double wnorm = norm2<S>(w);
    col[j + 1] = S(wnorm);

    for (std::size_t i = 0; i < j; ++i)
    {
      const S t = cs[i] * col[i] + sn[i] * col[i + 1];
      col[i + 1] = -Tr::conj(sn[i]) * col[i] + cs[i] * col[i + 1];
      col[i] = t;
    }
    // Rotation zeroing the subdiagonal entry.
    const S a = col[j];
    const double aabs = Tr::abs(a);
    S c, s, r;
    if (aabs == 0.0)
    {
      c = S(0.0);
      s = S(1.0);
      r = S(wnorm);
    }
    else
    {
      const double nrm = std::hypot(aabs, wnorm);
      const S phase = a / aabs;
      c = S(aabs / nrm);
      s = phase * S(wnorm / nrm);
      r = phase * S(nrm);
    }
    col[j] = r;
    col[j + 1] = S(0.0);
    cs.push_back(c);
    sn.push_back(s);
    g.push_back(-Tr::conj(s) * g[j]);
    g[j] = c * g[j];
    h.push_back(std::move(col));

    rep.iterations = static_cast<int>(j + 1);
    const double estimate = Tr::abs(g[j + 1]) / bnorm;
    rep.residual_history.push_back(estimate);

    const bool breakdown = wnorm <= 1e-14 * bnorm;
    if (estimate <= rtol || breakdown || j + 1 == m)
    {
      form_solution(j + 1);
      rep.final_relative_residual = true_residual();
      if (rep.final_relative_residual <= rtol)
      {
        rep.converged = true;
        return result;
      }
      if (breakdown || j + 1 == m)
      {
        return result;
      }
    }
    basis.emplace_back(w);
    for (S &v : basis.back())
    {
      v /= wnorm;
    }
  }
  return result;
}

}  // namespace mscat

#endif  // MSCAT_GMRES_HPP
