#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "urbandiff/grid.hpp"

namespace urbandiff {

// FNV-1a, used for stream labels and artifact hashes. Stable across builds.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t n,
                                   std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seeded random stream. Distributions are implemented here rather than with
// std:: distribution objects, which are not pinned by the standard; only the
// mt19937_64 engine itself is. Same seed, same sequence, on every platform.
//
// fork(label[, index]) derives an independent child stream as a pure function
// of the parent seed and the label; it does not consume parent state, so the
// fork tree is reproducible regardless of draw order.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : engine_(splitmix64(seed ^ 0x6a09e667f3bcc908ull)), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller; second member of each pair is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    float normalf() { return static_cast<float>(normal()); }

    std::uint64_t seed() const noexcept { return seed_; }

    Rng fork(std::string_view label) const {
        return Rng(splitmix64(splitmix64(seed_) ^ fnv1a64(label)));
    }

    Rng fork(std::string_view label, std::uint64_t index) const {
        return Rng(splitmix64(splitmix64(splitmix64(seed_) ^ fnv1a64(label)) + index));
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

inline Grid gaussian_grid(int rows, int cols, Rng& rng) {
    Grid g(rows, cols);
    for (auto& v : g) v = rng.normalf();
    return g;
}

}  // namespace urbandiff
