#include "mmrecon/sampling.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mmr {

std::vector<std::size_t> CenteredBlock(std::size_t width, std::size_t n)
{
  std::vector<std::size_t> block(n);
  std::size_t const start = width / 2 - n / 2;
  for (std::size_t i = 0; i < n; ++i) { block[i] = start + i; }
  return block;
}

SamplingMask::SamplingMask(std::size_t width, std::vector<std::size_t> columns, std::vector<std::size_t> acs)
  : width_(width)
  , columns_(std::move(columns))
  , acs_(std::move(acs))
{
  std::sort(columns_.begin(), columns_.end());
  std::sort(acs_.begin(), acs_.end());
  if (std::adjacent_find(columns_.begin(), columns_.end()) != columns_.end()) {
    throw ConfigError("SamplingMask: duplicate column index");
  }
  if (!columns_.empty() && columns_.back() >= width_) {
    throw ConfigError(
      "SamplingMask: column " + std::to_string(columns_.back()) + " outside width " + std::to_string(width_));
  }
  if (acs_.size() > width_ || acs_ != CenteredBlock(width_, acs_.size())) {
    throw ConfigError("SamplingMask: ACS block must be contiguous and centered");
  }
  if (!std::includes(columns_.begin(), columns_.end(), acs_.begin(), acs_.end())) {
    throw ConfigError("SamplingMask: ACS columns must be sampled");
  }
  auto flags = std::make_shared<std::vector<std::uint8_t>>(width_, 0);
  for (auto c : columns_) { (*flags)[c] = 1; }
  flags_ = std::move(flags);
}

SamplingMask SamplingMask::Full(std::size_t width)
{
  std::vector<std::size_t> all(width);
  for (std::size_t i = 0; i < width; ++i) { all[i] = i; }
  return SamplingMask(width, std::move(all));
}

bool SamplingMask::contains(std::size_t column) const
{
  return std::binary_search(columns_.begin(), columns_.end(), column);
}

bool SamplingMask::isAcs(std::size_t column) const { return std::binary_search(acs_.begin(), acs_.end(), column); }

bool SamplingMask::isSubsetOf(SamplingMask const &other) const
{
  return width_ == other.width_ &&
         std::includes(other.columns_.begin(), other.columns_.end(), columns_.begin(), columns_.end());
}

namespace {

void CheckAcceleration(std::size_t width, std::size_t R, std::size_t n_acs)
{
  if (R == 0) { throw ConfigError("acceleration R must be >= 1"); }
  if (R > width) { throw ConfigError("acceleration R=" + std::to_string(R) + " exceeds width " + std::to_string(width)); }
  if (n_acs > width) { throw ConfigError("ACS count exceeds width"); }
}

// Draws `count` distinct entries of `pool` uniformly, returned in draw order.
std::vector<std::size_t> Draw(std::vector<std::size_t> pool, std::size_t count, Rng &rng)
{
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

} // namespace

SamplingMask UniformMask(std::size_t width, std::size_t R, std::size_t n_acs)
{
  CheckAcceleration(width, R, n_acs);
  auto acs = CenteredBlock(width, n_acs);
  std::vector<std::size_t> columns = acs;
  for (std::size_t c = 0; c < width; c += R) {
    if (std::find(acs.begin(), acs.end(), c) == acs.end()) { columns.push_back(c); }
  }
  return SamplingMask(width, std::move(columns), std::move(acs));
}

SamplingMask RandomMask(std::size_t width, std::size_t R, std::size_t n_acs, std::uint64_t seed)
{
  CheckAcceleration(width, R, n_acs);
  auto const total = static_cast<std::size_t>(std::lround(static_cast<double>(width) / static_cast<double>(R)));
  if (total < n_acs) {
    throw ConfigError(
      "random mask: round(W/R)=" + std::to_string(total) + " is smaller than the ACS count " + std::to_string(n_acs));
  }
  auto acs = CenteredBlock(width, n_acs);
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < width; ++c) {
    if (std::find(acs.begin(), acs.end(), c) == acs.end()) { pool.push_back(c); }
  }
  Rng rng(seed);
  auto columns = Draw(std::move(pool), total - n_acs, rng);
  columns.insert(columns.end(), acs.begin(), acs.end());
  return SamplingMask(width, std::move(columns), std::move(acs));
}

std::string ToString(AcsPolicy policy) { return policy == AcsPolicy::KeepAcs ? "keep-acs" : "uniform-over-all"; }

AcsPolicy ParseAcsPolicy(std::string const &name)
{
  if (name == "keep-acs") { return AcsPolicy::KeepAcs; }
  if (name == "uniform-over-all") { return AcsPolicy::UniformOverAll; }
  throw ConfigError("unknown acs_policy '" + name + "' (expected keep-acs or uniform-over-all)");
}

MaskFamily PartitionMasks(SamplingMask const &omega, std::size_t K, double rho, std::uint64_t seed, AcsPolicy policy)
{
  if (K < 1) { throw ConfigError("partition: K must be >= 1"); }
  if (!(rho > 0.0 && rho <= 1.0)) { throw ConfigError("partition: rho must lie in (0, 1]"); }
  MaskFamily family{omega, {}, rho, seed};
  if (K == 1 && rho == 1.0) {
    family.children.push_back(omega);
    return family;
  }

  double const exact = rho * static_cast<double>(omega.size());
  auto const target = static_cast<std::size_t>(std::lround(exact));
  bool const keep = policy == AcsPolicy::KeepAcs;
  if (keep && exact < static_cast<double>(omega.acs().size())) {
    throw ConfigError(
      "partition: rho*|Omega|=" + std::to_string(exact) + " cannot hold the " + std::to_string(omega.acs().size()) +
      " ACS columns under keep-acs");
  }

  std::vector<std::size_t> pool;
  for (auto c : omega.columns()) {
    if (!keep || !omega.isAcs(c)) { pool.push_back(c); }
  }
  std::vector<std::size_t> const retained = keep ? omega.acs() : std::vector<std::size_t>{};

  Rng rng(seed);
  for (std::size_t j = 0; j < K; ++j) {
    auto columns = Draw(pool, target - retained.size(), rng);
    columns.insert(columns.end(), retained.begin(), retained.end());
    family.children.emplace_back(omega.width(), std::move(columns), retained);
  }
  return family;
}

} // namespace mmr
