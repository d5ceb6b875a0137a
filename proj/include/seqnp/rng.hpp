#pragma once

#include <cstdint>
#include <random>

#include "seqnp/tensor.hpp"

namespace seqnp {

// splitmix64: mixes seeds into well-separated engine states.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (seed, a, b). Used everywhere a
// sub-stream is split off a run seed, so randomness never depends on call
// order across unrelated components.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t a = 0,
                                   std::uint64_t b = 0) {
    return std::mt19937_64(mix_seed(seed, a, b));
}

inline Tensor normal_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape,
                            double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

inline Tensor uniform_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo,
                             double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace seqnp
