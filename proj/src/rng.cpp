#include "mmrecon/rng.hpp"

namespace mmr {

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream, std::uint64_t index)
{
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

} // namespace mmr
