#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "ranklab/parallel.hpp"
#include "ranklab/rng.hpp"

using namespace ranklab;

TEST(Rng, SameKeySameSequence) {
  RandomStream a(42, Stream::users, 7), b(42, Stream::users, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, DifferentTagsDiffer) {
  RandomStream a(42, Stream::users, 7), b(42, Stream::listings, 7), c(42, Stream::users, 8);
  EXPECT_NE(a.next(), b.next());
  RandomStream a2(42, Stream::users, 7);
  EXPECT_NE(a2.next(), c.next());
}

TEST(Rng, UniformMoments) {
  RandomStream r(1, Stream::test_data);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    ss += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(ss / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Rng, GumbelMeanIsEulerGamma) {
  RandomStream r(2, Stream::test_data);
  const int n = 400000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gumbel();
    s += g;
    ss += g * g;
  }
  const double mean = s / n, var = ss / n - mean * mean;
  EXPECT_NEAR(mean, 0.5772156649, 4.0 * std::sqrt(var / n));
  EXPECT_NEAR(var, M_PI * M_PI / 6.0, 0.03);
}

TEST(Rng, BelowIsUnbiasedAndInRange) {
  RandomStream r(3, Stream::test_data);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 450);
}

TEST(Rng, PoissonAndBinomialMeans) {
  RandomStream r(4, Stream::test_data);
  double sp = 0.0, sb = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    sp += static_cast<double>(r.poisson(3.5));
    sb += static_cast<double>(r.binomial(19, 0.3));
  }
  EXPECT_NEAR(sp / n, 3.5, 0.05);
  EXPECT_NEAR(sb / n, 5.7, 0.05);
}

TEST(Rng, ShuffleIsPermutation) {
  RandomStream r(5, Stream::test_data);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Rng, CategoricalFollowsWeights) {
  RandomStream r(6, Stream::test_data);
  const std::vector<double> w{1.0, 3.0, 0.0, 6.0};
  std::vector<int> c(4, 0);
  for (int i = 0; i < 100000; ++i) ++c[r.categorical(w)];
  EXPECT_EQ(c[2], 0);
  EXPECT_NEAR(c[0] / 1e5, 0.1, 0.005);
  EXPECT_NEAR(c[3] / 1e5, 0.6, 0.008);
}

TEST(Parallel, PartitionCoversRangeOnce) {
  for (std::size_t n : {0u, 1u, 5u, 63u, 64u, 65u, 1000u}) {
    const Partition p{n, kReductionChunks};
    std::size_t covered = 0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      EXPECT_LE(p.begin(c), p.end(c));
      if (c > 0) {
        EXPECT_EQ(p.begin(c), p.end(c - 1));
      }
      covered += p.end(c) - p.begin(c);
    }
    EXPECT_EQ(covered, n);
  }
}

TEST(Parallel, ForRunsEveryIndexAndPropagatesErrors) {
  set_thread_count(4);
  std::vector<int> hit(1000, 0);
  parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, [](std::size_t i) {
                 if (i == 37) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  set_thread_count(0);
}
