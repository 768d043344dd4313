// Counter-based pseudo-random generator with named substreams.
//
// Every stochastic component takes an explicit Rng so that runs are
// reproducible from a single root seed. Streams derived from
// (seed, stream_id) are statistically independent and cheap to create,
// which lets dataset generation hand one stream to each record without
// sharing state.
#pragma once

#include <complex>
#include <cstdint>

#include "uasim/common.hpp"

namespace uasim {

namespace detail {

// SplitMix64 finalizer; full-period bijection on 64-bit counters.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : key_(detail::splitmix64(seed ^ detail::splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1))) {}

    // Independent child stream; deterministic in (this stream's key, id).
    Rng stream(uint64_t id) const { return Rng(key_, id + 1); }

    uint64_t next_u64() { return detail::splitmix64(key_ + (++counter_) * 0xd1b54a32d192ed03ULL); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        require(n > 0, "uniform_index: n must be positive");
        // Rejection sampling keeps the distribution exact.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller; second value cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard the log against u1 == 0.
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Circularly symmetric complex normal with E|z|^2 = 1.
    cdouble cnormal() {
        const double s = std::sqrt(0.5);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            const uint64_t j = uniform_index(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace uasim
