#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace amdl {

// Counter-based 64-bit generator built on the SplitMix64 finalizer:
//
//   z = seed + counter * 0x9E3779B97F4A7C15
//   z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//   z ^= z >> 27;  z *= 0x94D049BB133111EB
//   z ^= z >> 31
//
// Every draw is a pure function of (seed, counter), so datasets and
// initializations replay identically on any platform. Sub-seeds are derived
// from a parent seed plus a textual tag (FNV-1a), keeping components
// independently reproducible under a single top-level seed.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    static uint64_t mix(uint64_t seed, uint64_t counter) {
        uint64_t z = seed + counter * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static uint64_t fnv1a(std::string_view s) {
        uint64_t h = 0xCBF29CE484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001B3ull;
        }
        return h;
    }

    // Sub-seed for a named component of a run.
    static uint64_t derive(uint64_t seed, std::string_view tag) { return mix(seed ^ fnv1a(tag), 0x5851F42D4C957F2Dull); }

    uint64_t next_u64() { return mix(seed_, counter_++); }

    // Uniform in [0, 1) with 53 significant bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n > 0. Fixed-point multiply, no rejection loop.
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; the second variate is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace amdl
