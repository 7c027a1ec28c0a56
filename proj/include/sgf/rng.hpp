#pragma once

#include <array>
#include <cstdint>

#include "sgf/common.hpp"

namespace sgf {

/// Philox4x32-10 counter-based generator.  Stateless: each (key, counter)
/// pair yields four independent 32-bit words, so draws can be indexed by
/// (seed, path, step, block) and are identical for any worker partition.
struct Philox4x32 {
    static std::array<std::uint32_t, 4> block(std::uint64_t key,
                                              const std::array<std::uint32_t, 4>& counter) {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        std::uint32_t k0 = std::uint32_t(key), k1 = std::uint32_t(key >> 32);
        std::array<std::uint32_t, 4> c = counter;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = std::uint64_t(M0) * c[0];
            std::uint64_t p1 = std::uint64_t(M1) * c[2];
            std::array<std::uint32_t, 4> n;
            n[0] = std::uint32_t(p1 >> 32) ^ c[1] ^ k0;
            n[1] = std::uint32_t(p1);
            n[2] = std::uint32_t(p0 >> 32) ^ c[3] ^ k1;
            n[3] = std::uint32_t(p0);
            c = n;
            k0 += W0;
            k1 += W1;
        }
        return c;
    }

    /// Two standard gaussians from one block via Box-Muller.
    static std::pair<double, double> gaussians(std::uint64_t key, std::uint64_t path,
                                               std::uint32_t step, std::uint32_t blk) {
        auto r = block(key, {std::uint32_t(path), std::uint32_t(path >> 32), step, blk});
        // uniforms in (0, 1]
        double u1 = ((std::uint64_t(r[0]) << 32 | r[1]) + 1.0) * 0x1p-64;
        double u2 = (std::uint64_t(r[2]) << 32 | r[3]) * 0x1p-64;
        double rad = std::sqrt(-2.0 * std::log(u1));
        return {rad * std::cos(2 * kPi * u2), rad * std::sin(2 * kPi * u2)};
    }
};

}  // namespace sgf
