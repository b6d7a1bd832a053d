#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "persic/common.hpp"

namespace persic {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic, portable generator (xoshiro256**). Every random decision in
// the project flows from one top-level seed through named substreams, so
// individual components can be re-seeded independently.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) fail("uniform_index: empty range");
        while (true) {
            const std::uint64_t x = next_u64();
            const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
            const std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= static_cast<std::uint64_t>(-static_cast<std::int64_t>(n)) % n)
                return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives the seed of a named substream from a parent seed. Distinct names
// give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name) {
    std::uint64_t state = seed ^ fnv1a64(stream_name);
    splitmix64(state);
    return splitmix64(state);
}

inline Rng substream(std::uint64_t seed, std::string_view stream_name) {
    return Rng(derive_seed(seed, stream_name));
}

}  // namespace persic
