#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace headway {

/// xoshiro256** (Blackman & Vigna), state expanded from a single 64-bit seed
/// with SplitMix64. Every draw used by the simulator, the initializer and the
/// trainer goes through this type so results do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), n > 0. Uses Lemire-style rejection.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    template <class T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent stream seed from (seed, stream) without collisions
/// for small stream ids.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace headway
