#include "oracles.hpp"

#include "mmrecon/error.hpp"
#include "mmrecon/physics.hpp"

#include <doctest.h>

#include <cmath>

using mmr::ad::Array;
using oracle::RandomArray;
using oracle::RelErr;

namespace {

double InnerRe(Array const &a, Array const &b) { return mmr::ad::Dot(a, b); }

} // namespace

TEST_CASE("apply_E with one unit coil and a full mask is the centered FFT")
{
  auto const x = oracle::RandomImage(8, 8, 1);
  Array ones({1, 2, 8, 8});
  for (std::size_t i = 0; i < 64; ++i) { ones[i] = 1.0; }
  auto const k = mmr::ApplyE(x, mmr::CoilMaps(ones), mmr::SamplingMask::Full(8));
  Array const first(std::vector<std::size_t>{2, 8, 8}, std::vector<double>(k.array().vector()));
  CHECK(RelErr(first, oracle::NaiveDft2c(x).array()) <= 1e-12);
}

TEST_CASE("apply_E with an empty mask is zero")
{
  auto const x = oracle::RandomImage(8, 8, 2);
  auto const coils = mmr::MakeCoilMaps(2, 8, 8, 3);
  auto const k = mmr::ApplyE(x, coils, mmr::SamplingMask(8, {}));
  CHECK(mmr::ad::Norm2(k.array()) == 0.0);
}

TEST_CASE("apply_E agrees with the explicit encoding matrix")
{
  auto const x = oracle::RandomImage(8, 6, 4);
  auto const coils = mmr::MakeCoilMaps(2, 8, 6, 5);
  auto const mask = oracle::RandomColumns(6, 3, 6);
  auto const k = mmr::ApplyE(x, coils, mask);
  Eigen::VectorXcd const ref = oracle::EncodingMatrix(coils, mask) * oracle::ToVector(x.array());
  CHECK((oracle::ToCoilVector(k.array()) - ref).norm() <= 1e-12 * ref.norm());
}

TEST_CASE("adjointness of E over random draws")
{
  for (std::uint64_t s = 0; s < 25; ++s) {
    std::size_t const H = 8 + s % 3, W = 8 + (s * 7) % 5, C = 1 + s % 4;
    auto const x = oracle::RandomImage(H, W, 1000 + s);
    auto const coils = mmr::MakeCoilMaps(C, H, W, 2000 + s);
    auto const mask = oracle::RandomColumns(W, W / 2, 3000 + s);
    mmr::KSpace const k(RandomArray({C, 2, H, W}, 4000 + s), mask);
    auto const ex = mmr::ApplyE(x, coils, mask);
    auto const ehk = mmr::ApplyEH(k, coils, mask);
    double const gap = std::abs(InnerRe(ex.array(), k.array()) - InnerRe(x.array(), ehk.array()));
    CHECK(gap <= 1e-10 * mmr::ad::Norm2(ex.array()) * mmr::ad::Norm2(k.array()));
  }
}

TEST_CASE("E^H E is the identity for a full mask and normalized coils")
{
  auto const coils = mmr::MakeCoilMaps(4, 12, 10, 7);
  auto const full = mmr::SamplingMask::Full(10);
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto const x = oracle::RandomImage(12, 10, 500 + s);
    CHECK(RelErr(mmr::ApplyEH(mmr::ApplyE(x, coils, full), coils, full).array(), x.array()) <= 1e-10);
    CHECK(RelErr(mmr::ApplyNormal(x, coils, full).array(), x.array()) <= 1e-10);
  }
}

TEST_CASE("apply_EH of zero k-space is zero")
{
  auto const coils = mmr::MakeCoilMaps(3, 8, 8, 1);
  auto const mask = mmr::SamplingMask::Full(8);
  CHECK(mmr::ad::Norm2(mmr::ApplyEH(mmr::KSpace(Array({3, 2, 8, 8}), mask), coils, mask).array()) == 0.0);
}

TEST_CASE("sub-mask encoding equals masking the fully sampled encoding")
{
  auto const x = oracle::RandomImage(16, 16, 8);
  auto const coils = mmr::MakeCoilMaps(3, 16, 16, 9);
  auto const omega = mmr::UniformMask(16, 2, 4);
  auto const theta = mmr::PartitionMasks(omega, 1, 0.6, 10).children[0];
  REQUIRE(theta.isSubsetOf(omega));
  auto const direct = mmr::ApplyE(x, coils, theta);
  auto const viaFull = mmr::ApplyE(x, coils, mmr::SamplingMask::Full(16)).restrict(theta);
  CHECK(direct.array() == viaFull.array());
}

TEST_CASE("shape mismatches are rejected")
{
  auto const x = oracle::RandomImage(8, 8, 1);
  auto const coils = mmr::MakeCoilMaps(2, 8, 6, 1);
  CHECK_THROWS_AS(mmr::ApplyE(x, coils, mmr::SamplingMask::Full(8)), mmr::ShapeError);
  CHECK_THROWS_AS(mmr::ApplyE(x, mmr::MakeCoilMaps(2, 8, 8, 1), mmr::SamplingMask::Full(6)), mmr::ShapeError);
}

TEST_CASE("k-space zeroes unsampled columns and restrict requires a subset")
{
  auto const mask = mmr::SamplingMask(8, {1, 3, 4});
  mmr::KSpace const k(RandomArray({2, 2, 4, 8}, 3), mask);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        if (!mask.contains(x)) { CHECK(k.at(c, y, x) == mmr::Cx(0.0, 0.0)); }
      }
    }
  }
  CHECK_THROWS_AS(k.restrict(mmr::SamplingMask(8, {1, 2})), mmr::ConfigError);
}

TEST_CASE("phantom is deterministic, peak-normalized and has broad support")
{
  auto const a = mmr::MakePhantom(64, 64, 1), b = mmr::MakePhantom(64, 64, 1);
  CHECK(a.array() == b.array());
  auto const mag = a.magnitude();
  CHECK(*std::max_element(mag.begin(), mag.end()) == 1.0);
  CHECK_FALSE(mmr::MakePhantom(64, 64, 2).array() == a.array());
  CHECK_THROWS_AS(mmr::MakePhantom(15, 64, 1), mmr::ShapeError);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto const m = mmr::MakePhantom(64, 64, seed).magnitude();
    double const peak = *std::max_element(m.begin(), m.end());
    CHECK(peak == 1.0);
    std::size_t const nonzero = static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](double v) { return v > 0.0; }));
    CHECK(static_cast<double>(nonzero) >= 0.2 * static_cast<double>(m.size()));
  }
}

TEST_CASE("phantom has non-trivial phase")
{
  auto const x = mmr::MakePhantom(32, 32, 3);
  double maxIm = 0.0;
  for (std::size_t i = 0; i < 32 * 32; ++i) { maxIm = std::max(maxIm, std::abs(x.array()[32 * 32 + i])); }
  CHECK(maxIm > 0.01);
}

TEST_CASE("coil maps are normalized per pixel")
{
  for (std::size_t C : {1u, 2u, 4u, 8u}) {
    auto const s = mmr::MakeCoilMaps(C, 20, 24, 11 + C);
    for (std::size_t y = 0; y < 20; ++y) {
      for (std::size_t x = 0; x < 24; ++x) {
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) { sum += std::norm(s.at(c, y, x)); }
        CHECK(std::abs(sum - 1.0) <= 1e-10);
        if (C == 1) { CHECK(std::abs(std::abs(s.at(0, y, x)) - 1.0) <= 1e-12); }
      }
    }
  }
  CHECK_THROWS_AS(mmr::MakeCoilMaps(0, 8, 8, 1), mmr::ShapeError);
}

TEST_CASE("distinct coil centers give distinct magnitude profiles")
{
  auto const s = mmr::MakeCoilMaps(4, 64, 64, 7);
  std::vector<std::vector<double>> mags(4);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t y = 0; y < 64; ++y) {
      for (std::size_t x = 0; x < 64; ++x) { mags[c].push_back(std::abs(s.at(c, y, x))); }
    }
  }
  auto corr = [](std::vector<double> const &a, std::vector<double> const &b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
  };
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) { CHECK(corr(mags[a], mags[b]) < 0.95); }
  }
}

TEST_CASE("noise: zero sigma, masked entries and sample statistics")
{
  auto const x = mmr::MakePhantom(32, 32, 1);
  auto const coils = mmr::MakeCoilMaps(2, 32, 32, 2);
  auto const mask = mmr::UniformMask(32, 4, 4);
  auto const k = mmr::ApplyE(x, coils, mask);
  CHECK(mmr::AddNoise(k, {0.0, 5}).array() == k.array());
  CHECK_THROWS_AS(mmr::AddNoise(k, {-1.0, 5}), mmr::ConfigError);

  auto const noisy = mmr::AddNoise(k, {0.01, 6});
  CHECK(mmr::AddNoise(k, {0.01, 6}).array() == noisy.array());
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t xx = 0; xx < 32; ++xx) {
        if (!mask.contains(xx)) { CHECK(noisy.at(c, y, xx) == mmr::Cx(0.0, 0.0)); }
      }
    }
  }

  // 10^4 sampled complex entries: 2 coils x 50 rows x 100 columns.
  std::vector<std::size_t> cols(100);
  for (std::size_t i = 0; i < 100; ++i) { cols[i] = i; }
  mmr::SamplingMask const wide(100, cols);
  mmr::KSpace const zero(Array({2, 2, 50, 100}), wide);
  auto const n = mmr::AddNoise(zero, {0.05, 7});
  double sum = 0, sq = 0;
  for (double v : n.array().values()) {
    sum += v;
    sq += v * v;
  }
  double const count = static_cast<double>(n.array().size());
  double const sd = std::sqrt(sq / count - (sum / count) * (sum / count));
  CHECK(std::abs(sd - 0.05) <= 0.03 * 0.05);
}
