// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/noise.hpp"

#include <cmath>
#include <numbers>

namespace dpnp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53-bit mantissa from two words, mapped to [0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

PhiloxCounter NoiseStream::raw(std::uint64_t t, std::uint64_t n) const {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32),
                            static_cast<std::uint32_t>(t), tag_};
    const PhiloxKey key{static_cast<std::uint32_t>(seed_),
                        static_cast<std::uint32_t>(seed_ >> 32) ^ static_cast<std::uint32_t>(t >> 32)};
    return philox4x32(ctr, key);
}

double NoiseStream::normal(std::uint64_t t, std::uint64_t n) const {
    const PhiloxCounter r = raw(t, n);
    const double u1 = 1.0 - to_unit(r[0], r[1]);  // (0, 1]
    const double u2 = to_unit(r[2], r[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double NoiseStream::uniform(std::uint64_t t, std::uint64_t n) const {
    const PhiloxCounter r = raw(t, n);
    return to_unit(r[0], r[1]);
}

PhiloxEngine::PhiloxEngine(std::uint64_t seed, std::uint32_t tag, std::uint64_t n)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32), 0u, tag} {}

PhiloxEngine::result_type PhiloxEngine::operator()() {
    if (used_ == 4) {
        block_ = philox4x32(ctr_, key_);
        ctr_[2] += 1;
        used_ = 0;
    }
    return block_[used_++];
}

}  // namespace dpnp
