#pragma once

// Reproducible stream RNG for Monte Carlo ensembles.
//
// Every trajectory gets its own stream derived from (master_seed, stream_index),
// so results do not depend on scheduling order or thread count. The generator is
// xoshiro256++ with splitmix64 seeding; normal deviates come from an explicit
// Box-Muller transform. The standard library distributions are deliberately
// avoided: their output is implementation-defined, which would break the
// bit-exact reproducibility contract.

#include <cmath>
#include <cstdint>
#include <utility>

namespace ampsim {

inline constexpr double two_pi = 6.283185307179586476925286766559;

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stable sub-seed for a named stage of a larger experiment, so that e.g. the
// bit-0 and bit-1 ensembles of one run draw from unrelated stream families.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t tag) {
    std::uint64_t st = master_seed;
    std::uint64_t a = splitmix64(st);
    st = tag ^ 0xA0761D6478BD642FULL;
    std::uint64_t b = splitmix64(st);
    st = a ^ b;
    return splitmix64(st);
}

class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
        // Decorrelate the two inputs before expanding to the 256-bit state.
        std::uint64_t mix = stream_index;
        std::uint64_t h = splitmix64(mix);
        std::uint64_t st = master_seed ^ h;
        for (auto& w : s_) w = splitmix64(st);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // forbidden all-zero state
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0, 1]; never returns 0 so it is safe under log().
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    std::pair<double, double> normal_pair() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return {r * std::cos(two_pi * u2), r * std::sin(two_pi * u2)};
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto [a, b] = normal_pair();
        spare_ = b;
        have_spare_ = true;
        return a;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ampsim
