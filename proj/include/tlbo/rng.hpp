#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tlbo {

// Deterministic random streams. Every stochastic component of a run draws
// from its own named stream derived from the run seed, so runs replay
// bit-identically regardless of scheduling or which components are enabled.
//
// Distribution transforms are implemented here rather than via <random>
// distributions, whose output is implementation-defined.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], rejection-sampled to avoid modulo bias.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }

    // Standard normal via Box-Muller; draws two uniforms per variate.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Derives the seed of a named sub-stream from a parent seed. An optional
// index distinguishes repeated instances (restart 0..k, source task 0..N).
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view name,
                                 std::uint64_t index = 0) {
    std::uint64_t h = detail::splitmix64(parent ^ detail::fnv1a64(name));
    return detail::splitmix64(h ^ detail::splitmix64(index + 0x51ed2701ULL));
}

inline Rng derive_stream(std::uint64_t parent, std::string_view name,
                         std::uint64_t index = 0) {
    return Rng(derive_seed(parent, name, index));
}

}  // namespace tlbo
