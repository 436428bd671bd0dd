#pragma once

#include <cstdint>
#include <stdexcept>

#include "sppb/math.hpp"

namespace sppb {

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t key_mix(std::uint64_t h, std::uint64_t v) {
    h += 0x9e3779b97f4a7c15ULL + v;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

/// Deterministic random stream (xoshiro256** seeded from a 64-bit key).
///
/// Streams form a tree: derive(parts...) hashes the path onto the key and
/// returns an independent child without touching the parent's state. All
/// replicate/phase randomness in this library is keyed that way, so results
/// do not depend on evaluation order and replays are exact.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {
        std::uint64_t z = key;
        for (auto& w : state_) w = detail::splitmix64_next(z);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t key() const { return key_; }

    template <typename... Parts>
    RngStream derive(Parts... parts) const {
        std::uint64_t k = key_;
        ((k = detail::key_mix(k, static_cast<std::uint64_t>(parts))), ...);
        return RngStream(k);
    }

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl64(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    /// Uniform on (0,1), 53-bit resolution, never returns 0 or 1.
    double uniform01() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        std::uint64_t x;
        do { x = next(); } while (x < threshold);
        return x % n;
    }

    /// Standard normal deviate by inversion (one uniform per draw).
    double normal() {
        return normal_quantile(uniform01());
    }

private:
    std::uint64_t key_;
    std::uint64_t state_[4];
};

/// Phase tags for substream derivation. Disjoint on purpose: the completion,
/// smoothing-noise and bootstrap-draw streams of a replicate never overlap,
/// and harness-level phases stay clear of replicate-level ones.
namespace phase {
inline constexpr std::uint64_t completion = 0x10;
inline constexpr std::uint64_t noise = 0x11;
inline constexpr std::uint64_t draw = 0x12;
inline constexpr std::uint64_t second_level = 0x13;
inline constexpr std::uint64_t population = 0x20;
inline constexpr std::uint64_t true_mse = 0x21;
inline constexpr std::uint64_t sample = 0x22;
inline constexpr std::uint64_t method = 0x23;
} // namespace phase

} // namespace sppb
