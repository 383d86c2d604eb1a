// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file noise.hpp
 * @brief Stateless counter-based random numbers (Philox4x32-10).
 *
 * A draw is a pure function of (seed, tag, iteration, global index), so a
 * chain sampled on B workers consumes exactly the same numbers as a serial
 * one regardless of which worker owns a pixel.
 */

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dpnp {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Ten-round Philox 4x32 block function.
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

/// Stream identifiers. Values are part of the output format of every run;
/// do not renumber.
enum class NoiseTag : std::uint32_t {
    XNoise = 1,
    ZNoise = 2,   // + 16 * AXDA block index
    Observation = 3,
    Mask = 4,
    Poisson = 5,
    PowerInit = 6,
    Weights = 7,
    Lipschitz = 8,
};

constexpr std::uint32_t z_noise_tag(int block) {
    return static_cast<std::uint32_t>(NoiseTag::ZNoise) + 16u * static_cast<std::uint32_t>(block);
}

class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint32_t tag) : seed_(seed), tag_(tag) {}
    NoiseStream(std::uint64_t seed, NoiseTag tag)
        : NoiseStream(seed, static_cast<std::uint32_t>(tag)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint32_t tag() const noexcept { return tag_; }

    PhiloxCounter raw(std::uint64_t t, std::uint64_t n) const;
    /// Standard normal deviate (Box-Muller on one Philox block).
    double normal(std::uint64_t t, std::uint64_t n) const;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform(std::uint64_t t, std::uint64_t n) const;

private:
    std::uint64_t seed_;
    std::uint32_t tag_;
};

/// Standard-library compatible 32-bit engine over the Philox stream of one
/// (seed, tag, index) triple; used where a distribution needs a variable
/// number of draws (Poisson sampling).
class PhiloxEngine {
public:
    using result_type = std::uint32_t;

    PhiloxEngine(std::uint64_t seed, std::uint32_t tag, std::uint64_t n);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

private:
    PhiloxKey key_;
    PhiloxCounter ctr_;
    PhiloxCounter block_{};
    int used_ = 4;
};

}  // namespace dpnp
