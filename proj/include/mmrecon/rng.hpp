#pragma once

#include <cstdint>
#include <random>

namespace mmr {

using Rng = std::mt19937_64;

/// Independent seed for sub-stream `stream` / item `index` of a base seed
/// (splitmix64 finalizer over the combined words).
std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

} // namespace mmr
