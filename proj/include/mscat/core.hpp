// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_CORE_HPP
#define MSCAT_CORE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mscat
{

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;

//
// Error types. Everything thrown by the library derives from Error so callers
// can catch one type; subclasses exist where callers must tell failures apart.
//
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error
{
public:
  using Error::Error;
};

class SingularityError : public Error
{
public:
  using Error::Error;
};

class SamplingError : public Error
{
public:
  using Error::Error;
};

class ConvergenceError : public Error
{
public:
  using Error::Error;
};

template <typename... Args>
std::string concat(Args &&...args)
{
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

#define MSCAT_REQUIRE(cond, ...)                                                            \
  do                                                                                        \
  {                                                                                         \
    if (!(cond))                                                                            \
    {                                                                                       \
      throw ::mscat::PreconditionError(::mscat::concat(__VA_ARGS__));                       \
    }                                                                                       \
  } while (false)

//
// Small fixed-size 3-vector.
//
struct Vec3
{
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double &operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3 &operator+=(const Vec3 &o)
  {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3 &operator-=(const Vec3 &o)
  {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3 &operator*=(double s)
  {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend constexpr bool operator==(const Vec3 &, const Vec3 &) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3 &b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3 &b) { return a -= b; }
constexpr Vec3 operator-(const Vec3 &a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3 &a, double s) { return {a.x / s, a.y / s, a.z / s}; }
constexpr double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3 &a, const Vec3 &b)
{
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3 &a, const Vec3 &b) { return norm(a - b); }
inline Vec3 normalized(const Vec3 &a) { return a / norm(a); }

// Row-major 3x3 rotation (or general linear map).
using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Vec3 apply(const Mat3 &m, const Vec3 &v)
{
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

constexpr Mat3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

constexpr Mat3 transpose(const Mat3 &m)
{
  return {{{m[0][0], m[1][0], m[2][0]}, {m[0][1], m[1][1], m[2][1]}, {m[0][2], m[1][2], m[2][2]}}};
}

constexpr Mat3 multiply(const Mat3 &a, const Mat3 &b)
{
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
  {
    for (int j = 0; j < 3; ++j)
    {
      c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return c;
}

inline double determinant(const Mat3 &m)
{
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

//
// Seeded random source. The engine is std::mt19937_64 (bit-exact across
// standard libraries); the distributions are written out here because the
// standard ones are implementation-defined.
//
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n)
  {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do
    {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  // Standard normal via Box-Muller.
  double normal()
  {
    double u1 = uniform();
    while (u1 <= 0.0)
    {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Uniform direction on the unit sphere.
  Vec3 unit_vector()
  {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * kPi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 v{s * std::cos(phi), s * std::sin(phi), z};
    return v / norm(v);
  }

  // SplitMix64 finalizer; decorrelates neighbouring seeds.
  static constexpr std::uint64_t mix(std::uint64_t x)
  {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

private:
  std::mt19937_64 engine_;
};

// Derive an independent stream seed from a base seed and a purpose tag.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag)
{
  return Rng::mix(base ^ Rng::mix(tag + 0x5851F42D4C957F2Dull));
}

// Uniformly random rotation (Haar measure) from a random unit quaternion.
inline Mat3 random_rotation(Rng &rng)
{
  double q[4];
  double n2 = 0.0;
  do
  {
    n2 = 0.0;
    for (double &c : q)
    {
      c = rng.normal();
      n2 += c * c;
    }
  } while (n2 < 1e-20);
  const double inv = 1.0 / std::sqrt(n2);
  const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

//
// Thread count resolution: explicit value, else MSCAT_THREADS, else hardware.
//
inline int resolve_threads(int requested)
{
  if (requested > 0)
  {
    return requested;
  }
  if (const char *env = std::getenv("MSCAT_THREADS"))
  {
    const int v = std::atoi(env);
    if (v > 0)
    {
      return v;
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Static partition of [0, n) over worker threads. Each index is visited by
// exactly one worker, so per-index results do not depend on the thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn)
{
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), n);
  if (workers <= 1)
  {
    for (std::size_t i = 0; i < n; ++i)
    {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
  {
    pool.emplace_back(
        [&, w]
        {
          try
          {
            for (std::size_t i = w; i < n; i += workers)
            {
              fn(i);
            }
          }
          catch (...)
          {
            errors[w] = std::current_exception();
          }
        });
  }
  for (auto &t : pool)
  {
    t.join();
  }
  for (auto &e : errors)
  {
    if (e)
    {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace mscat

#endif  // MSCAT_CORE_HPP
