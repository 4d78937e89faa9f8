#include "mmrecon/error.hpp"
#include "mmrecon/sampling.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using mmr::AcsPolicy;
using mmr::SamplingMask;

namespace {

std::vector<std::size_t> Range(std::size_t a, std::size_t b)
{
  std::vector<std::size_t> v;
  for (std::size_t i = a; i < b; ++i) { v.push_back(i); }
  return v;
}

} // namespace

TEST_CASE("uniform mask: every R-th column plus a centered ACS block")
{
  auto const m = mmr::UniformMask(368, 4, 24);
  std::set<std::size_t> expected;
  for (std::size_t c = 0; c < 368; c += 4) { expected.insert(c); }
  for (std::size_t c = 172; c < 196; ++c) { expected.insert(c); }
  CHECK(m.columns() == std::vector<std::size_t>(expected.begin(), expected.end()));
  CHECK(m.acs() == Range(172, 196));

  CHECK(mmr::UniformMask(8, 1, 0).columns() == Range(0, 8));

  auto const small = mmr::UniformMask(16, 4, 4);
  CHECK(small.columns() == std::vector<std::size_t>{0, 4, 6, 7, 8, 9, 12});
  CHECK(small.size() == 7);
  CHECK(small.acs() == std::vector<std::size_t>{6, 7, 8, 9});
}

TEST_CASE("uniform mask errors")
{
  CHECK_THROWS_AS(mmr::UniformMask(8, 9, 0), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::UniformMask(8, 0, 0), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::UniformMask(8, 2, 9), mmr::ConfigError);
}

TEST_CASE("mask invariants are enforced on construction")
{
  CHECK_THROWS_AS(SamplingMask(8, {1, 1}), mmr::ConfigError);
  CHECK_THROWS_AS(SamplingMask(8, {8}), mmr::ConfigError);
  CHECK_THROWS_AS(SamplingMask(8, {2, 3, 4}, {2, 3}), mmr::ConfigError); // not centered
  CHECK_THROWS_AS(SamplingMask(8, {0}, {4}), mmr::ConfigError);          // ACS not sampled
  SamplingMask const m(8, {5, 1, 3});
  CHECK(m.columns() == std::vector<std::size_t>{1, 3, 5});
  CHECK(mmr::CenteredBlock(8, 2) == std::vector<std::size_t>{3, 4});
  CHECK(mmr::CenteredBlock(9, 3) == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("random mask: cardinality, ACS, determinism")
{
  auto const a = mmr::RandomMask(368, 4, 24, 9);
  CHECK(a.size() == 92);
  for (auto c : Range(172, 196)) { CHECK(a.contains(c)); }
  CHECK(a == mmr::RandomMask(368, 4, 24, 9));
  CHECK_FALSE(a == mmr::RandomMask(368, 4, 24, 10));
  CHECK_THROWS_AS(mmr::RandomMask(64, 8, 10, 1), mmr::ConfigError);
}

TEST_CASE("random mask draws non-ACS columns uniformly")
{
  std::size_t const W = 64, runs = 1000;
  auto const acs = mmr::CenteredBlock(W, 8);
  std::vector<std::size_t> hits(W, 0);
  for (std::uint64_t s = 0; s < runs; ++s) {
    auto const m = mmr::RandomMask(W, 4, 8, s);
    for (auto c : m.columns()) { ++hits[c]; }
  }
  // 8 of the 56 non-ACS columns per draw.
  double const p = 8.0 / 56.0, mean = p * runs, sd = std::sqrt(runs * p * (1 - p));
  for (std::size_t c = 0; c < W; ++c) {
    bool const isAcs = std::find(acs.begin(), acs.end(), c) != acs.end();
    if (isAcs) {
      CHECK(hits[c] == runs);
    } else {
      CHECK(std::abs(static_cast<double>(hits[c]) - mean) <= 5.0 * sd);
    }
  }
}

TEST_CASE("partition: degenerate family is omega itself")
{
  auto const omega = mmr::UniformMask(64, 4, 8);
  auto const f = mmr::PartitionMasks(omega, 1, 1.0, 3);
  REQUIRE(f.children.size() == 1);
  CHECK(f.children[0] == omega);
}

TEST_CASE("partition: three subsets of a 92-column mask")
{
  auto const omega = mmr::UniformMask(368, 4, 24);
  REQUIRE(omega.size() == 92 + 24 - 6);
  auto const omega92 = mmr::RandomMask(368, 4, 24, 1);
  REQUIRE(omega92.size() == 92);
  auto const f = mmr::PartitionMasks(omega92, 3, 0.6, 7);
  CHECK(f.children.size() == 3);
  for (auto const &c : f.children) {
    CHECK(c.isSubsetOf(omega92));
    CHECK(std::abs(static_cast<long>(c.size()) - 55) <= 1);
  }
}

TEST_CASE("siblings drawn from a large pool are distinct")
{
  auto const omega = mmr::UniformMask(368, 4, 24);
  auto const f = mmr::PartitionMasks(omega, 7, 0.6, 3);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < i; ++j) { CHECK_FALSE(f.children[i] == f.children[j]); }
  }
}

TEST_CASE("partition is deterministic in its seed")
{
  auto const omega = mmr::RandomMask(128, 4, 8, 2);
  auto const a = mmr::PartitionMasks(omega, 5, 0.6, 11), b = mmr::PartitionMasks(omega, 5, 0.6, 11);
  CHECK(a.children == b.children);
  CHECK_FALSE(mmr::PartitionMasks(omega, 5, 0.6, 12).children == a.children);
}

TEST_CASE("partition errors")
{
  auto const omega = mmr::UniformMask(64, 4, 8); // 22 columns, 8 ACS
  CHECK_THROWS_AS(mmr::PartitionMasks(omega, 0, 0.6, 1), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::PartitionMasks(omega, 3, 0.0, 1), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::PartitionMasks(omega, 3, 1.5, 1), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::PartitionMasks(omega, 3, 0.3, 1, AcsPolicy::KeepAcs), mmr::ConfigError);
  CHECK_NOTHROW(mmr::PartitionMasks(omega, 3, 0.3, 1, AcsPolicy::UniformOverAll));
  CHECK(mmr::ParseAcsPolicy("keep-acs") == AcsPolicy::KeepAcs);
  CHECK(mmr::ParseAcsPolicy(mmr::ToString(AcsPolicy::UniformOverAll)) == AcsPolicy::UniformOverAll);
  CHECK_THROWS_AS(mmr::ParseAcsPolicy("sometimes"), mmr::ConfigError);
}

TEST_CASE("partition properties over many parents, both ACS policies")
{
  std::size_t flagged = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    std::size_t const W = 48 + 8 * (s % 5);
    auto const omega = s % 2 ? mmr::RandomMask(W, 3, 6, s) : mmr::UniformMask(W, 3, 6);
    for (auto policy : {AcsPolicy::KeepAcs, AcsPolicy::UniformOverAll}) {
      for (std::size_t K : {3u, 5u, 7u}) {
        for (double rho : {0.4, 0.6, 0.8}) {
          auto const f = mmr::PartitionMasks(omega, K, rho, s * 31 + K, policy);
          REQUIRE(f.children.size() == K);
          long const target = std::lround(rho * static_cast<double>(omega.size()));
          for (std::size_t j = 0; j < K; ++j) {
            auto const &c = f.children[j];
            CHECK(c.isSubsetOf(omega));
            CHECK(std::abs(static_cast<long>(c.size()) - target) <= 1);
            if (policy == AcsPolicy::KeepAcs) {
              for (auto a : omega.acs()) { CHECK(c.contains(a)); }
              CHECK(c.acs() == omega.acs());
            } else {
              CHECK(c.acs().empty());
            }
            for (std::size_t i = 0; i < j; ++i) { flagged += f.children[i] == c; }
          }
        }
      }
    }
  }
  // Small pools make identical siblings likely; they are legal, so only report them.
  if (flagged > 0) { MESSAGE("identical sibling masks: " << flagged); }
}
