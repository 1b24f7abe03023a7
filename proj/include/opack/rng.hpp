#pragma once

// Counter-based RNG (Philox 4x32-10). Every consumer derives an independent
// stream from (seed, stream id), so batch experiments reproduce bit-identically
// regardless of scheduling or platform.

#include <array>
#include <cmath>
#include <cstdint>

namespace opack {

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    const uint64_t p0 = uint64_t(M0) * ctr[0];
    const uint64_t p1 = uint64_t(M1) * ctr[2];
    const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
}

inline std::array<uint32_t, 4> philox10(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    for (int i = 0; i < 10; ++i) philox_round(ctr, key);
    return ctr;
}

} // namespace detail

// One stream of a keyed Philox generator. Streams with distinct (seed, stream)
// pairs are independent.
class Rng {
  public:
    Rng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto out = detail::philox10(
            {uint32_t(counter_), uint32_t(counter_ >> 32), uint32_t(stream_), uint32_t(stream_ >> 32)},
            {uint32_t(seed_), uint32_t(seed_ >> 32)});
        ++counter_;
        spare_ = (uint64_t(out[2]) << 32) | out[3];
        have_spare_ = true;
        return (uint64_t(out[0]) << 32) | out[1];
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (deterministic, no state beyond the cache)
    double normal() {
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        gauss_ = r * std::sin(a);
        have_gauss_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // integer in [0, n)
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

  private:
    uint64_t seed_ = 0, stream_ = 0, counter_ = 0;
    uint64_t spare_ = 0;
    bool have_spare_ = false;
    double gauss_ = 0.0;
    bool have_gauss_ = false;
};

// Stable stream id for substreams (e.g. per start index or trial index).
inline uint64_t substream(uint64_t seed, uint64_t index) {
    uint64_t x = seed ^ (0x9E3779B97F4A7C15ull + index);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

} // namespace opack
