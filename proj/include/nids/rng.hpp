#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace nids {

// Seeded generator with distributions implemented here rather than through
// <random>'s distribution classes, whose output is implementation-defined.
// Everything built on Rng is therefore bit-reproducible across standard
// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling on the top of the range keeps it unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; the second variate is discarded to keep the stream simple.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // Derive an independent child stream, e.g. one per layer.
    Rng fork(std::uint64_t salt) {
        return Rng(next() ^ (salt * 0x9E3779B97F4A7C15ULL));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nids
