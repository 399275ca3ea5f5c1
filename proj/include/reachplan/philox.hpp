#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace reachplan {

// Philox4x32-10 counter-based generator. Each (key, counter) pair yields an
// independent 128-bit block, so rollout r / timestep t can draw its noise
// directly without any sequential generator state. That is what makes the
// Monte Carlo kernels bitwise independent of thread count and iteration order.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
    constexpr uint32_t kMul0 = 0xD2511F53u;
    constexpr uint32_t kMul1 = 0xCD9E8D57u;
    constexpr uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const uint64_t p0 = uint64_t(kMul0) * ctr[0];
        const uint64_t p1 = uint64_t(kMul1) * ctr[2];
        const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
        const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

struct GaussianPair {
    double z0;
    double z1;
};

// Uniform in (0,1): 53 mantissa bits plus a half-ulp offset so log() never
// sees zero.
inline double uniform_open(uint64_t bits) {
    return (double(bits >> 11) + 0.5) * 0x1p-53;
}

// Two standard normals per counter block via Box-Muller. `stream` separates
// usage domains (control noise, radii, initial state) and `index` addresses
// the draw within a domain (timestep, obstacle id, ...).
inline GaussianPair gaussian_pair(uint64_t seed, uint64_t rollout,
                                  uint32_t index, uint32_t stream) {
    const std::array<uint32_t, 4> ctr = {uint32_t(rollout),
                                         uint32_t(rollout >> 32), index, stream};
    const std::array<uint32_t, 2> key = {uint32_t(seed), uint32_t(seed >> 32)};
    const std::array<uint32_t, 4> r = philox4x32(ctr, key);
    const uint64_t a = (uint64_t(r[0]) << 32) | r[1];
    const uint64_t b = (uint64_t(r[2]) << 32) | r[3];
    const double u1 = uniform_open(a);
    const double u2 = uniform_open(b);
    const double mag = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return {mag * std::cos(kTwoPi * u2), mag * std::sin(kTwoPi * u2)};
}

}  // namespace reachplan
