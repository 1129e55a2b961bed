#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace advtex {

/// Deterministic, splittable random stream (splitmix64 core).
///
/// Same seed -> identical draw sequence on every platform; no
/// std::*_distribution involved, so fixtures stay stable across stdlibs.
/// split("label") derives an independent child stream from the parent seed
/// and the label alone, so the order in which modules split does not
/// perturb anyone's draws.
class SplitRng {
public:
    explicit SplitRng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Standard normal via Box-Muller.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        // u1 = 0 would take log(0); nudge to the smallest representable draw
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    uint32_t next_below(uint32_t n) {
        return n == 0 ? 0 : static_cast<uint32_t>(next_u64() % n);
    }

    /// Child stream keyed by label; child_seed = splitmix64(seed ^ fnv1a(label)).
    SplitRng split(std::string_view label) const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char ch : label) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
        uint64_t z = seed_of_state() ^ h;
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return SplitRng(z ^ (z >> 31));
    }

    uint64_t seed_of_state() const { return state_; }

private:
    uint64_t state_;
};

}  // namespace advtex
