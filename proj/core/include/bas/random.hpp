#pragma once

#include <cstdint>
#include <random>

namespace bas {

/// Engine used for every random draw in the library. All streams are seeded
/// explicitly; there is no wall-clock seeding anywhere.
using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a stream label
/// (splitmix64 finalizer over the pair).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Uniform draw in [0, 1).
double uniform01(Rng& rng);

double standard_normal(Rng& rng);

}  // namespace bas
