#include "gcanet/rng.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "gcanet/common.hpp"

namespace gcanet {

int64_t Rng::uniform_int(int64_t n) {
    if (n <= 0) throw ValueError("uniform_int: n must be positive");
    uint64_t un = uint64_t(n);
    uint64_t threshold = (-un) % un;  // 2^64 mod n
    for (;;) {
        uint64_t r = eng_();
        if (r >= threshold) return int64_t(r % un);
    }
}

double Rng::gaussian(double mean, double stddev) {
    if (has_cached_) {
        has_cached_ = false;
        return mean + stddev * cached_;
    }
    double u1;
    do {
        u1 = next_double();
    } while (u1 <= 0.0);
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return mean + stddev * r * std::cos(a);
}

std::string Rng::serialize() const {
    // cached value stored as raw bits so the round trip is exact
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(cached_));
    std::memcpy(&bits, &cached_, sizeof(bits));
    std::ostringstream os;
    os << eng_ << " | " << (has_cached_ ? 1 : 0) << " " << bits;
    return os.str();
}

Rng Rng::deserialize(const std::string& text) {
    Rng rng;
    std::istringstream is(text);
    is >> rng.eng_;
    std::string sep;
    int cached_flag = 0;
    uint64_t bits = 0;
    is >> sep >> cached_flag >> bits;
    if (is.fail() || sep != "|") throw DataError("Rng::deserialize: malformed state");
    rng.has_cached_ = cached_flag != 0;
    std::memcpy(&rng.cached_, &bits, sizeof(bits));
    return rng;
}

}  // namespace gcanet
