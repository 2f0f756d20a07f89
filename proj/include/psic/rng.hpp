// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random number streams with hierarchical seed derivation.
//
// Every stochastic step in the pipeline draws from an Rng whose seed is
// derived from the master seed plus a path of integer tags (phase, task,
// epoch, batch, sample). Substreams are independent of worker count and of
// unrelated config changes, so adding tasks never perturbs existing streams.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace psic {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Folds a path of tags into a child seed. derive_seed(s, {a,b}) differs from
// derive_seed(s, {b,a}) and from derive_seed(s, {a}) followed by {b} only in
// that the latter equals derive_seed over the concatenated path.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = root ^ 0xd1b54a32d192ed03ULL;
    for (std::uint64_t tag : path) {
        s ^= splitmix64(tag) + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        (void)splitmix64(s);
        s = splitmix64(s);
    }
    return s;
}

// xoshiro256** seeded via splitmix64. Uniform/gaussian helpers use explicit
// bit twiddling and Box-Muller so streams are reproducible independent of the
// standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; caches the second draw of each pair.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection-free modulo bias is negligible for our n (< 2^20), but
        // use Lemire-style multiply-shift anyway.
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace psic
