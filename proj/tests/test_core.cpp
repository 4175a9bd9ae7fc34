// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>

#include "mscat/core.hpp"

using namespace mscat;

TEST(Vec3, Algebra)
{
  const Vec3 a{1, 2, 3}, b{-2, 0, 5};
  EXPECT_EQ(dot(a, b), 13.0);
  const Vec3 c = cross(a, b);
  EXPECT_EQ(dot(c, a), 0.0);
  EXPECT_EQ(dot(c, b), 0.0);
  EXPECT_DOUBLE_EQ(norm(Vec3{3, 4, 0}), 5.0);
}

TEST(Rng, SameSeedSameStream)
{
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i)
  {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndIndexRanges)
{
  Rng r(1);
  for (int i = 0; i < 10000; ++i)
  {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.index(7), 7u);
  }
}

TEST(Rng, UnitVectorsAreUnitAndUnbiased)
{
  Rng r(5);
  Vec3 mean;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
  {
    const Vec3 v = r.unit_vector();
    ASSERT_NEAR(norm(v), 1.0, 1e-12);
    mean += v;
  }
  mean = mean / n;
  EXPECT_LT(norm(mean), 0.03);
}

TEST(Rotation, RandomRotationIsProper)
{
  Rng r(9);
  for (int i = 0; i < 100; ++i)
  {
    const Mat3 R = random_rotation(r);
    EXPECT_NEAR(determinant(R), 1.0, 1e-12);
    const Mat3 I = multiply(transpose(R), R);
    for (int a = 0; a < 3; ++a)
    {
      for (int b = 0; b < 3; ++b)
      {
        EXPECT_NEAR(I[a][b], a == b ? 1.0 : 0.0, 1e-12);
      }
    }
  }
}

TEST(Seeds, DeriveSeedSeparatesTags)
{
  static_assert(derive_seed(1, 2) == derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Threads, ResolveHonorsExplicitValue)
{
  EXPECT_EQ(resolve_threads(3), 3);
  EXPECT_GE(resolve_threads(0), 1);
}

TEST(Threads, ParallelForVisitsEachIndexOnce)
{
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto &h : hits)
  {
    EXPECT_EQ(h.load(), 1);
  }
}

TEST(Threads, ParallelForPropagatesExceptions)
{
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i)
                            {
                              if (i == 7)
                              {
                                throw Error("boom");
                              }
                            }),
               Error);
}
