#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mmr {

/// Set of sampled phase-encode columns of a W-wide k-space grid. Every row
/// of the grid shares the same column pattern.
class SamplingMask
{
public:
  SamplingMask() = default;
  /// `columns` need not be sorted; `acs` must be a contiguous block centered
  /// at W/2 and contained in `columns`. Throws ConfigError otherwise.
  SamplingMask(std::size_t width, std::vector<std::size_t> columns, std::vector<std::size_t> acs = {});

  static SamplingMask Full(std::size_t width);

  std::size_t width() const { return width_; }
  std::size_t size() const { return columns_.size(); }
  std::vector<std::size_t> const &columns() const { return columns_; }
  std::vector<std::size_t> const &acs() const { return acs_; }
  bool contains(std::size_t column) const;
  bool isAcs(std::size_t column) const;
  bool isSubsetOf(SamplingMask const &other) const;

  /// Per-column 0/1 flags, shared so graph nodes can hold on to them.
  std::shared_ptr<std::vector<std::uint8_t> const> flags() const { return flags_; }

  friend bool operator==(SamplingMask const &a, SamplingMask const &b)
  {
    return a.width_ == b.width_ && a.columns_ == b.columns_ && a.acs_ == b.acs_;
  }

private:
  std::size_t width_ = 0;
  std::vector<std::size_t> columns_;
  std::vector<std::size_t> acs_;
  std::shared_ptr<std::vector<std::uint8_t> const> flags_;
};

/// Centered ACS block [W/2 - n/2, W/2 - n/2 + n).
std::vector<std::size_t> CenteredBlock(std::size_t width, std::size_t n);

/// Every R-th column starting at 0, plus a centered block of n_acs columns.
SamplingMask UniformMask(std::size_t width, std::size_t R, std::size_t n_acs);

/// Centered ACS block plus columns drawn uniformly without replacement until
/// the mask holds round(W/R) columns.
SamplingMask RandomMask(std::size_t width, std::size_t R, std::size_t n_acs, std::uint64_t seed);

enum class AcsPolicy
{
  KeepAcs,
  UniformOverAll,
};

std::string ToString(AcsPolicy policy);
AcsPolicy ParseAcsPolicy(std::string const &name);

/// Parent mask and its K retrospective subsets used by the data-consistency
/// units during multi-mask training.
struct MaskFamily
{
  SamplingMask parent;
  std::vector<SamplingMask> children;
  double rho = 1.0;
  std::uint64_t seed = 0;
};

/// Draws K independent subsets of `omega`, each holding round(rho*|omega|)
/// columns. Under KeepAcs every child retains the full ACS block and only the
/// remaining columns are drawn; under UniformOverAll all columns are eligible
/// and the children carry no ACS block. K=1, rho=1 returns omega itself.
MaskFamily PartitionMasks(
  SamplingMask const &omega, std::size_t K, double rho, std::uint64_t seed, AcsPolicy policy = AcsPolicy::KeepAcs);

} // namespace mmr
