#ifndef POPSYNTH_RANDOM_HPP
#define POPSYNTH_RANDOM_HPP

#include <cstdint>
#include <random>
#include <span>

namespace popsynth {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `k` of a master seed. Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k) {
    return splitmix64(splitmix64(master) ^ (k + 0x632be59bd9b4e019ULL));
}

inline double uniform01(Rng& rng) {
    // 53 random bits -> [0, 1)
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(rng);
}

/// Inverse-CDF draw from a probability vector. Entries with zero mass are never chosen.
inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        acc += probs[k];
        last_positive = k;
        if (u < acc) return k;
    }
    return last_positive;
}

}  // namespace popsynth

#endif  // POPSYNTH_RANDOM_HPP
