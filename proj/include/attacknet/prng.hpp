#pragma once

#include <cmath>
#include <cstdint>

#include "attacknet/errors.hpp"
#include "attacknet/tensor.hpp"

namespace attacknet {

/// Deterministic xoshiro256** generator, seeded through splitmix64.
/// Same seed gives the same byte sequence on every platform; uniform
/// floats are built from the top 24 bits so results do not depend on
/// long-double intermediates.
class Prng {
public:
    explicit Prng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t next_u64() {
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

    /// Uniform float in [0,1): top 24 bits scaled by 2^-24.
    float uniform01() {
        return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
    }

    float uniform(float lo, float hi) {
        if (!(lo < hi)) throw ConfigError("prng_uniform: requires lo < hi");
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller on two fresh uniforms (no spare kept,
    /// so the consumed-uniform count per call is fixed).
    float normal01() {
        float u1 = uniform01();
        while (u1 <= 0.0f) u1 = uniform01();
        const float u2 = uniform01();
        const float r = std::sqrt(-2.0f * std::log(u1));
        return r * std::cos(6.28318530717958647692f * u2);
    }

    /// Fisher-Yates index for shuffling: uniform integer in [0, n).
    std::size_t next_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    /// Derive an independent child seed (for per-dataset / per-run streams).
    std::uint64_t derive(std::uint64_t salt) const {
        std::uint64_t x = state_[0] ^ (salt * 0x9E3779B97F4A7C15ULL);
        return splitmix64(x);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

inline Tensor prng_uniform(Prng& p, std::vector<std::size_t> shape, float lo, float hi) {
    if (!(lo < hi)) throw ConfigError("prng_uniform: requires lo < hi");
    Tensor out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo + (hi - lo) * p.uniform01();
    return out;
}

inline Tensor prng_normal(Prng& p, std::vector<std::size_t> shape, float mean, float stddev) {
    Tensor out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean + stddev * p.normal01();
    return out;
}

}  // namespace attacknet
