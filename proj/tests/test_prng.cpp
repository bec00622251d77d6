#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gsmax/errors.hpp"
#include "gsmax/prng.hpp"

using gsmax::Prng;

TEST(Prng, MatchesReferenceStreamSeedZero) {
  Prng p(0);
  EXPECT_EQ(p.next_u64(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(p.next_u64(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(p.next_u64(), 0x1a5f849d4933e6e0ULL);
}

TEST(Prng, MatchesReferenceStreamSeed42) {
  Prng p(42);
  EXPECT_EQ(p.next_u64(), 0x15780b2e0c2ec716ULL);
  EXPECT_EQ(p.next_u64(), 0x6104d9866d113a7eULL);
  EXPECT_EQ(p.next_u64(), 0xae17533239e499a1ULL);
}

TEST(Prng, Uniform01UsesTop53Bits) {
  Prng p(0);
  EXPECT_EQ(p.uniform01(), 0.6012629994179048);
}

TEST(Prng, SameSeedSameStream) {
  Prng a(7), b(7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_TRUE(a == b);
}

TEST(Prng, UniformMeanAndRange) {
  Prng p(3);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = p.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Standard error of the mean is 1/sqrt(12 n) ~ 6.5e-4.
  EXPECT_NEAR(sum / n, 0.5, 4e-3);
}

TEST(Prng, UniformRejectsEmptyInterval) {
  Prng p(1);
  EXPECT_THROW(p.uniform(1.0, 1.0), gsmax::RangeError);
  EXPECT_THROW(p.uniform(2.0, 1.0), gsmax::RangeError);
}

TEST(Prng, BelowIsInRangeAndCoversAllValues) {
  Prng p(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = p.below(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Prng, NormalMoments) {
  Prng p(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = p.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Prng, ShuffleIsAPermutationAndDeterministic) {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  Prng p(9), q(9);
  gsmax::shuffle(a.begin(), a.end(), p);
  gsmax::shuffle(b.begin(), b.end(), q);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  std::vector<int> id(50);
  std::iota(id.begin(), id.end(), 0);
  EXPECT_NE(a, id);
}
