// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "dpnp/noise.hpp"
#include "test_util.hpp"

using namespace dpnp;

// Published Philox4x32-10 known-answer vectors.
TEST(Philox, KnownAnswers) {
    EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
              (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}),
              (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NoiseStream, Purity) {
    const NoiseStream a(42, NoiseTag::XNoise), b(42, NoiseTag::XNoise);
    for (std::uint64_t n = 0; n < 100; ++n) {
        EXPECT_EQ(a.normal(7, n), b.normal(7, n));
        EXPECT_EQ(a.uniform(7, n), b.uniform(7, n));
    }
}

TEST(NoiseStream, TagsSeedsAndIterationsDiffer) {
    const NoiseStream x(42, NoiseTag::XNoise), z(42, z_noise_tag(0)), z1(42, z_noise_tag(1)), s(43, NoiseTag::XNoise);
    int same = 0;
    for (std::uint64_t n = 0; n < 1000; ++n) {
        same += x.normal(1, n) == z.normal(1, n);
        same += z.normal(1, n) == z1.normal(1, n);
        same += x.normal(1, n) == s.normal(1, n);
        same += x.normal(1, n) == x.normal(2, n);
    }
    EXPECT_EQ(same, 0);
}

TEST(NoiseStream, HighBitsOfIndicesMatter) {
    const NoiseStream a(1, NoiseTag::XNoise);
    EXPECT_NE(a.normal(1ull << 33, 5), a.normal(1, 5));
    EXPECT_NE(a.normal(1, (1ull << 40) + 5), a.normal(1, 5));
}

TEST(NoiseStream, Moments) {
    const NoiseStream a(9, NoiseTag::XNoise);
    std::vector<double> v;
    for (std::uint64_t n = 0; n < 100000; ++n) v.push_back(a.normal(3, n));
    EXPECT_NEAR(testutil::mean(v), 0.0, 0.01);
    EXPECT_NEAR(testutil::variance(v), 1.0, 0.02);
}

TEST(NoiseStream, UniformRange) {
    const NoiseStream a(9, NoiseTag::Mask);
    double lo = 1.0, hi = 0.0, s = 0.0;
    for (std::uint64_t n = 0; n < 100000; ++n) {
        const double u = a.uniform(0, n);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        s += u;
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LT(hi, 1.0);
    EXPECT_NEAR(s / 100000, 0.5, 0.005);
}

TEST(PhiloxEngine, DrivesStandardDistributions) {
    PhiloxEngine e1(5, 5, 17), e2(5, 5, 17);
    std::poisson_distribution<int> p1(250.0), p2(250.0);
    EXPECT_EQ(p1(e1), p2(e2));
    double s = 0.0;
    for (std::uint64_t n = 0; n < 20000; ++n) {
        PhiloxEngine e(5, 5, n);
        s += std::poisson_distribution<int>(4.0)(e);
    }
    EXPECT_NEAR(s / 20000, 4.0, 0.06);
}
