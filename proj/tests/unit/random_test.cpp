#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "tacdepth/random.hpp"

using tacdepth::derive_seed;
using tacdepth::Rng;

TEST(Random, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Random, DerivedSeedsDependOnTagAndIndex) {
  std::set<std::uint64_t> seen;
  for (const char* tag : {"split", "train", "render", "degrade"})
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(7, tag, i));
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(7, "train", 3), derive_seed(7, "train", 3));
  EXPECT_NE(derive_seed(7, "train", 3), derive_seed(8, "train", 3));
}

TEST(Random, UniformStaysInRange) {
  Rng r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, BelowIsRoughlyUniform) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) counts[r.below(7)]++;
  // Each bin is Binomial(n, 1/7); allow 5 standard deviations.
  const double mean = n / 7.0, sd = std::sqrt(n * (1.0 / 7) * (6.0 / 7));
  for (int c : counts) EXPECT_NEAR(c, mean, 5 * sd);
}

TEST(Random, NormalMoments) {
  Rng r(5);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
