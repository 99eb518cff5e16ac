#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace gcanet {

// Deterministic random source. The uniform/gaussian transforms are spelled
// out here rather than taken from <random> distributions so the draw
// sequence is pinned by this code and serializes exactly.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double next_double() { return double(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // unbiased integer in [0, n)
    int64_t uniform_int(int64_t n);

    // Box-Muller, second variate cached
    double gaussian(double mean, double stddev);

    bool bernoulli(double p) { return next_double() < p; }

    // Exact state round-trip (single line of text).
    std::string serialize() const;
    static Rng deserialize(const std::string& text);

private:
    std::mt19937_64 eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace gcanet
