#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "pathdrift/rng.hpp"

using pathdrift::Philox4x32;
using pathdrift::Rng;
using pathdrift::SeedSpec;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(Philox4x32::encrypt({0u, 0u, 0u, 0u}, {0u, 0u}),
            (Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::encrypt({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Rng, ReproducibleAndStreamSeparated) {
  Rng a(SeedSpec{42, 7});
  Rng b(SeedSpec{42, 7});
  Rng c(SeedSpec{42, 8});
  Rng d(SeedSpec{42, 7}, 1);
  int same_c = 0;
  int same_d = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    same_c += x == c.uniform();
    same_d += x == d.uniform();
  }
  EXPECT_EQ(same_c, 0);
  EXPECT_EQ(same_d, 0);
}

TEST(Rng, UniformOpenIntervalAndMoments) {
  Rng r(SeedSpec{1, 0});
  const int n = 200000;
  double s = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(s2 / n, 1.0 / 3.0, 0.005);
}

TEST(Rng, NormalMoments) {
  Rng r(SeedSpec{3, 0});
  const int n = 400000;
  double m1 = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}
