#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>
#include <vector>

namespace calm {

/// Deterministic, platform-independent 64-bit PRNG (xoshiro256**).
///
/// All randomness in the toolkit flows through this generator so that seeded
/// runs reproduce bit-exactly across compilers and platforms. The standard
/// library distributions are deliberately avoided: their output is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // seed expansion via splitmix64
        std::uint64_t x = seed;
        for (auto& word : state_) {
            word = splitmix64(x);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Unbiased uniform integer in [0, n). n must be nonzero.
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling on the top range to remove modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) {
            v = next_u64();
        }
        return v % n;
    }

    /// Standard normal deviate (Box-Muller; deterministic, no cached spare).
    double normal() {
        double u1 = next_double();
        while (u1 <= 0.0) {
            u1 = next_double();
        }
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Exponential deviate with the given rate (events per unit).
    double exponential(double rate) {
        double u = next_double();
        while (u <= 0.0) {
            u = next_double();
        }
        return -std::log(u) / rate;
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

/// Derives a child seed from a master seed, a stream tag and an index.
///
/// Used to hand independent deterministic streams to trees, sessions and
/// repetitions without correlating them.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index) {
    std::uint64_t x = master;
    Rng::splitmix64(x);
    for (const char c : stream) {
        x ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        Rng::splitmix64(x);
    }
    x ^= index;
    return Rng::splitmix64(x);
}

} // namespace calm
