#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace fairflip {

// Counter-based splittable generator. A stream is identified by a 64-bit key;
// draws hash (key, counter) and forks hash a label into a child key, so any
// subtree of the randomness is reproducible independently of evaluation order.
class SplitRng {
public:
    using result_type = std::uint64_t;

    SplitRng() : key_(0x9e3779b97f4a7c15ULL) {}
    explicit SplitRng(std::uint64_t seed) : key_(mix(seed ^ 0xbf58476d1ce4e5b9ULL)) {}

    SplitRng fork(std::uint64_t label) const {
        SplitRng child;
        child.key_ = mix(key_ ^ mix(label + 0x94d049bb133111ebULL));
        return child;
    }

    SplitRng fork(std::string_view label) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : label) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        return fork(h);
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    // Uniform in [0, bound).
    std::uint64_t next_below(std::uint64_t bound) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_unit() < p; }

    // Exact Bernoulli for a fraction expressed in 64 bits: 1 w.p. raw / 2^64.
    bool bernoulli_fixed64(std::uint64_t raw) { return next_u64() < raw; }

    // +-1 coin with Pr[+1] = (1 + eps) / 2.
    int pm_coin(double eps) { return bernoulli(0.5 * (1.0 + eps)) ? 1 : -1; }

    // UniformRandomBitGenerator interface for <random> distributions.
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace fairflip
