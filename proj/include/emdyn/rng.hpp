#pragma once

// Seeded randomness used by every sampling routine.
//
// The engine is std::mt19937_64 (19937-bit state, output sequence fixed by
// the C++ standard). The standard distributions are implementation-defined,
// so all variates below are produced by explicit transforms of the raw
// 64-bit output. Independent streams are keyed by (seed, stream index)
// through a SplitMix64 finalizer; results therefore do not depend on the
// order in which streams are consumed.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace emdyn {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t salt = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ salt);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt = 0)
        : engine_(derive_seed(seed, stream, salt)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1].
    double uniform_open0() { return 1.0 - uniform(); }

    // Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open0();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Poisson by sequential inversion. Large rates are split into chunks of
    // at most 500 so exp(-rate) never underflows; a sum of independent
    // Poisson variates is Poisson with the summed rate.
    std::uint64_t poisson(double rate) {
        std::uint64_t total = 0;
        while (rate > 0.0) {
            const double chunk = rate > 500.0 ? 500.0 : rate;
            rate -= chunk;
            const double u = uniform();
            double p = std::exp(-chunk);
            double cdf = p;
            std::uint64_t k = 0;
            while (u >= cdf && p > 0.0) {
                ++k;
                p *= chunk / static_cast<double>(k);
                cdf += p;
            }
            total += k;
        }
        return total;
    }

    // Index drawn with probability proportional to weights[i].
    template <typename Weights>
    std::size_t categorical(const Weights& weights) {
        double total = 0.0;
        for (auto w : weights) total += w;
        const double u = uniform() * total;
        double acc = 0.0;
        std::size_t last = 0;
        std::size_t i = 0;
        for (auto w : weights) {
            acc += w;
            if (w > 0.0) last = i;
            if (u < acc) return i;
            ++i;
        }
        return last;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace emdyn
