// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_METRICS_HPP
#define MSCAT_METRICS_HPP

#include <fstream>
#include <functional>
#include <iomanip>

#include "mscat/dataset.hpp"

namespace mscat
{

namespace detail
{

inline void check_lengths(std::span<const Complex> pred, std::span<const Complex> target, const char *what)
{
  MSCAT_REQUIRE(pred.size() == target.size(), what, ": length mismatch (", pred.size(), " vs ", target.size(), ")");
  MSCAT_REQUIRE(!target.empty(), what, ": empty input");
}

}  // namespace detail

// sum |pred - target| / sum |target|.
inline double err_rel(std::span<const Complex> pred, std::span<const Complex> target)
{
  detail::check_lengths(pred, target, "err_rel");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
  {
    num += std::abs(pred[i] - target[i]);
    den += std::abs(target[i]);
  }
  MSCAT_REQUIRE(den > 0.0, "err_rel: target is identically zero");
  return num / den;
}

// mean | (|pred| - |target|) / |target| |.
inline double err_ampl(std::span<const Complex> pred, std::span<const Complex> target)
{
  detail::check_lengths(pred, target, "err_ampl");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
  {
    const double a = std::abs(target[i]);
    MSCAT_REQUIRE(a > 0.0, "err_ampl: zero-magnitude target at entry ", i);
    sum += std::abs((std::abs(pred[i]) - a) / a);
  }
  return sum / static_cast<double>(pred.size());
}

inline double wrap_angle(double a) { return std::atan2(std::sin(a), std::cos(a)); }

// mean |wrap(arg pred - arg target)|, in [0, pi].
inline double err_angle(std::span<const Complex> pred, std::span<const Complex> target)
{
  detail::check_lengths(pred, target, "err_angle");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
  {
    MSCAT_REQUIRE(pred[i] != Complex{} && target[i] != Complex{}, "err_angle: zero entry at ", i);
    sum += std::abs(wrap_angle(std::arg(pred[i]) - std::arg(target[i])));
  }
  return sum / static_cast<double>(pred.size());
}

inline double mean_absolute_error(std::span<const Complex> pred, std::span<const Complex> target)
{
  detail::check_lengths(pred, target, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
  {
    sum += std::abs(pred[i] - target[i]);
  }
  return sum / static_cast<double>(pred.size());
}

//
// For each obstacle, the smallest vertex-to-vertex distance to any other
// obstacle; the result is the largest of these minima.
//
inline double obstacle_dispersion(const TriangleMesh &mesh, std::size_t n_obstacles)
{
  MSCAT_REQUIRE(n_obstacles >= 2, "obstacle_dispersion: needs at least two obstacles, got ", n_obstacles);
  std::vector<std::vector<Vec3>> groups(n_obstacles);
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
  {
    MSCAT_REQUIRE(mesh.vertex_obstacle[v] < n_obstacles, "obstacle_dispersion: bad obstacle id");
    groups[mesh.vertex_obstacle[v]].push_back(mesh.vertices[v]);
  }
  std::vector<double> nearest(n_obstacles, std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < n_obstacles; ++a)
  {
    for (std::size_t b = a + 1; b < n_obstacles; ++b)
    {
      double d2 = std::numeric_limits<double>::infinity();
      for (const Vec3 &p : groups[a])
      {
        for (const Vec3 &q : groups[b])
        {
          const Vec3 d = p - q;
          d2 = std::min(d2, dot(d, d));
        }
      }
      const double d = std::sqrt(d2);
      nearest[a] = std::min(nearest[a], d);
      nearest[b] = std::min(nearest[b], d);
    }
  }
  return *std::max_element(nearest.begin(), nearest.end());
}

inline double obstacle_dispersion(const Scene &scene)
{
  return obstacle_dispersion(scene.mesh, scene.ellipsoids.size());
}

struct SampleMetrics
{
  std::size_t sample_id = 0;
  double mae = 0.0;
  int gmres_iterations = 0;
  double wavenumber = 0.0;
  double dispersion = 0.0;  // NaN for single-obstacle scenes
  double err_rel = 0.0, err_ampl = 0.0, err_angle = 0.0;
};

struct MetricSummary
{
  double err_rel = 0.0, err_ampl = 0.0, err_angle = 0.0, mae = 0.0;
};

struct MetricReport
{
  std::vector<SampleMetrics> samples;  // averaged over seeds
  std::vector<MetricSummary> per_seed;
  MetricSummary mean;
  MetricSummary relative_std;  // across seeds; zero for a single seed
};

inline SampleMetrics sample_metrics(const SampleRecord &s, std::span<const Complex> pred, std::size_t id)
{
  const std::span<const Complex> target = s.trace.values;
  SampleMetrics m;
  m.sample_id = id;
  m.mae = mean_absolute_error(pred, target);
  m.gmres_iterations = s.gmres_iterations;
  m.wavenumber = s.wavenumber();
  m.dispersion = s.scene.ellipsoids.size() >= 2 ? obstacle_dispersion(s.scene)
                                                 : std::numeric_limits<double>::quiet_NaN();
  m.err_rel = err_rel(pred, target);
  m.err_ampl = err_ampl(pred, target);
  m.err_angle = err_angle(pred, target);
  return m;
}

// (prediction for sample i under seed index k)
using PredictFn = std::function<std::vector<Complex>(std::size_t sample, int seed_index)>;

inline MetricReport evaluate_predictions(const std::vector<SampleRecord> &data, const PredictFn &predict, int n_seeds,
                                         int threads = 1)
{
  MSCAT_REQUIRE(!data.empty(), "evaluate: empty dataset");
  MSCAT_REQUIRE(n_seeds >= 1, "evaluate: need at least one seed");
  const std::size_t n = data.size();
  std::vector<std::vector<SampleMetrics>> per(static_cast<std::size_t>(n_seeds), std::vector<SampleMetrics>(n));
  parallel_for(n * static_cast<std::size_t>(n_seeds), threads,
               [&](std::size_t job)
               {
                 const std::size_t i = job % n;
                 const std::size_t k = job / n;
                 const auto pred = predict(i, static_cast<int>(k));
                 per[k][i] = sample_metrics(data[i], pred, i);
               });
  MetricReport r;
  for (const auto &seed : per)
  {
    MetricSummary s;
    for (const auto &m : seed)
    {
      s.err_rel += m.err_rel;
      s.err_ampl += m.err_ampl;
      s.err_angle += m.err_angle;
      s.mae += m.mae;
    }
    const double inv = 1.0 / static_cast<double>(n);
    s.err_rel *= inv;
    s.err_ampl *= inv;
    s.err_angle *= inv;
    s.mae *= inv;
    r.per_seed.push_back(s);
  }
  r.samples = per[0];
  const double ks = 1.0 / n_seeds;
  for (std::size_t i = 0; i < n; ++i)
  {
    SampleMetrics &m = r.samples[i];
    m.err_rel = m.err_ampl = m.err_angle = m.mae = 0.0;
    for (const auto &seed : per)
    {
      m.err_rel += seed[i].err_rel * ks;
      m.err_ampl += seed[i].err_ampl * ks;
      m.err_angle += seed[i].err_angle * ks;
      m.mae += seed[i].mae * ks;
    }
  }
  auto stat = [&](double MetricSummary::*f, double &mean, double &rel)
  {
    double s = 0.0;
    for (const auto &x : r.per_seed)
    {
      s += x.*f;
    }
    mean = s / n_seeds;
    if (n_seeds < 2)
    {
      rel = 0.0;
      return;
    }
    double v = 0.0;
    for (const auto &x : r.per_seed)
    {
      v += (x.*f - mean) * (x.*f - mean);
    }
    const double sd = std::sqrt(v / (n_seeds - 1));
    rel = mean != 0.0 ? sd / std::abs(mean) : 0.0;
  };
  stat(&MetricSummary::err_rel, r.mean.err_rel, r.relative_std.err_rel);
  stat(&MetricSummary::err_ampl, r.mean.err_ampl, r.relative_std.err_ampl);
  stat(&MetricSummary::err_angle, r.mean.err_angle, r.relative_std.err_angle);
  stat(&MetricSummary::mae, r.mean.mae, r.relative_std.mae);
  return r;
}

// Mean trace over every vertex of every sample.
inline Complex mean_trace(const std::vector<SampleRecord> &data)
{
  Complex sum{};
  std::size_t count = 0;
  for (const auto &s : data)
  {
    for (const Complex &v : s.trace.values)
    {
      sum += v;
    }
    count += s.trace.values.size();
  }
  MSCAT_REQUIRE(count > 0, "mean_trace: empty dataset");
  return sum / static_cast<double>(count);
}

// Dataset-mean err_rel of the predictor that outputs the dataset's mean trace everywhere.
inline double constant_predictor_err_rel(const std::vector<SampleRecord> &data)
{
  const Complex c = mean_trace(data);
  double sum = 0.0;
  for (const auto &s : data)
  {
    const std::vector<Complex> pred(s.trace.values.size(), c);
    sum += err_rel(pred, s.trace.values);
  }
  return sum / static_cast<double>(data.size());
}

inline constexpr std::string_view kMetricsCsvHeader =
    "sample_id,mae,gmres_iterations,wavenumber,dispersion,err_rel,err_ampl,err_angle";

inline void write_metrics_csv(const MetricReport &r, const std::filesystem::path &path)
{
  std::ofstream f(path);
  MSCAT_REQUIRE(f.good(), "cannot write '", path.string(), "'");
  f << kMetricsCsvHeader << '\n' << std::setprecision(10);
  for (const auto &m : r.samples)
  {
    f << m.sample_id << ',' << m.mae << ',' << m.gmres_iterations << ',' << m.wavenumber << ',' << m.dispersion
      << ',' << m.err_rel << ',' << m.err_ampl << ',' << m.err_angle << '\n';
  }
  MSCAT_REQUIRE(f.good(), "write failed for '", path.string(), "'");
}

}  // namespace mscat

#endif  // MSCAT_METRICS_HPP
