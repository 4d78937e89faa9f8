#pragma once

// Little-endian float64 / uint64 streams shared by the checkpoint, dataset
// and reconstruction files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mmr::io {

inline std::uint64_t ToLittle(std::uint64_t v)
{
  if constexpr (std::endian::native == std::endian::big) { return __builtin_bswap64(v); }
  return v;
}

inline void WriteU64(std::ostream &out, std::uint64_t v)
{
  v = ToLittle(v);
  out.write(reinterpret_cast<char const *>(&v), sizeof v);
}

inline bool ReadU64(std::istream &in, std::uint64_t &v)
{
  if (!in.read(reinterpret_cast<char *>(&v), sizeof v)) { return false; }
  v = ToLittle(v);
  return true;
}

inline void AppendDoubles(std::vector<char> &bytes, std::span<double const> values)
{
  std::size_t const at = bytes.size();
  bytes.resize(at + values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t const v = ToLittle(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(bytes.data() + at + 8 * i, &v, 8);
  }
}

inline void DecodeDoubles(char const *bytes, std::span<double> out)
{
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t v;
    std::memcpy(&v, bytes + 8 * i, 8);
    out[i] = std::bit_cast<double>(ToLittle(v));
  }
}

inline std::uint64_t Fnv1a(char const *data, std::size_t n)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace mmr::io
