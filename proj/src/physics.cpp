#include "mmrecon/physics.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/kernels.hpp"
#include "mmrecon/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mmr {

using ad::Array;
using ad::ShapeString;

ComplexImage::ComplexImage(std::size_t H, std::size_t W)
  : data_({2, H, W})
{
}

ComplexImage::ComplexImage(Array data)
  : data_(std::move(data))
{
  if (data_.rank() != 3 || data_.dim(0) != 2) {
    throw ShapeError("ComplexImage: expected {2, H, W}, got " + ShapeString(data_.shape()));
  }
}

Cx ComplexImage::at(std::size_t y, std::size_t x) const
{
  std::size_t const HW = height() * width(), p = y * width() + x;
  return {data_[p], data_[HW + p]};
}

void ComplexImage::set(std::size_t y, std::size_t x, Cx v)
{
  std::size_t const HW = height() * width(), p = y * width() + x;
  data_[p] = v.real();
  data_[HW + p] = v.imag();
}

std::vector<double> ComplexImage::magnitude() const
{
  std::size_t const HW = height() * width();
  std::vector<double> m(HW);
  for (std::size_t p = 0; p < HW; ++p) { m[p] = std::hypot(data_[p], data_[HW + p]); }
  return m;
}

CoilMaps::CoilMaps(Array data)
  : data_(std::make_shared<Array const>(std::move(data)))
{
  if (data_->rank() != 4 || data_->dim(1) != 2 || data_->dim(0) < 1) {
    throw ShapeError("CoilMaps: expected {C, 2, H, W}, got " + ShapeString(data_->shape()));
  }
}

Cx CoilMaps::at(std::size_t c, std::size_t y, std::size_t x) const
{
  std::size_t const HW = height() * width(), p = 2 * HW * c + y * width() + x;
  return {(*data_)[p], (*data_)[p + HW]};
}

KSpace::KSpace(Array data, SamplingMask mask)
  : data_(std::move(data))
  , mask_(std::move(mask))
{
  if (data_.rank() != 4 || data_.dim(1) != 2) {
    throw ShapeError("KSpace: expected {C, 2, H, W}, got " + ShapeString(data_.shape()));
  }
  if (mask_.width() != data_.dim(3)) {
    throw ShapeError(
      "KSpace: mask width " + std::to_string(mask_.width()) + " for data " + ShapeString(data_.shape()));
  }
  kernels::MaskColumns(data_.data(), 2 * data_.dim(0), data_.dim(2), data_.dim(3), *mask_.flags());
}

Cx KSpace::at(std::size_t c, std::size_t y, std::size_t x) const
{
  std::size_t const HW = height() * width(), p = 2 * HW * c + y * width() + x;
  return {data_[p], data_[p + HW]};
}

KSpace KSpace::restrict(SamplingMask const &subset) const
{
  if (!subset.isSubsetOf(mask_)) { throw ConfigError("KSpace::restrict: mask is not a subset of the sampled set"); }
  return KSpace(data_, subset);
}

namespace {

void CheckOperands(std::size_t H, std::size_t W, CoilMaps const &coils, SamplingMask const &mask, char const *op)
{
  if (coils.height() != H || coils.width() != W || mask.width() != W) {
    throw ShapeError(
      std::string(op) + ": image " + std::to_string(H) + "x" + std::to_string(W) + ", coils " +
      ShapeString(coils.array().shape()) + ", mask width " + std::to_string(mask.width()));
  }
}

} // namespace

KSpace ApplyE(ComplexImage const &image, CoilMaps const &coils, SamplingMask const &mask)
{
  std::size_t const H = image.height(), W = image.width(), C = coils.coils();
  CheckOperands(H, W, coils, mask, "apply_E");
  Array k({C, 2, H, W});
  kernels::CoilExpand(image.array().data(), coils.array().data(), k.data(), C, H * W);
  kernels::Fft2c(k.data(), C, H, W);
  kernels::MaskColumns(k.data(), 2 * C, H, W, *mask.flags());
  return KSpace(std::move(k), mask);
}

ComplexImage ApplyEH(KSpace const &kspace, CoilMaps const &coils, SamplingMask const &mask)
{
  std::size_t const H = kspace.height(), W = kspace.width(), C = coils.coils();
  CheckOperands(H, W, coils, mask, "apply_EH");
  if (kspace.coils() != C) {
    throw ShapeError("apply_EH: " + std::to_string(kspace.coils()) + " k-space coils vs " + std::to_string(C) + " maps");
  }
  Array k = kspace.array();
  kernels::MaskColumns(k.data(), 2 * C, H, W, *mask.flags());
  kernels::Ifft2c(k.data(), C, H, W);
  ComplexImage out(H, W);
  kernels::CoilCombine(k.data(), coils.array().data(), out.array().data(), C, H * W);
  return out;
}

ComplexImage ApplyNormal(ComplexImage const &image, CoilMaps const &coils, SamplingMask const &mask)
{
  return ApplyEH(ApplyE(image, coils, mask), coils, mask);
}

ad::Value Encode(ad::Graph &g, ad::Value image, CoilMaps const &coils, SamplingMask const &mask)
{
  return g.maskColumns(g.fft2c(g.coilExpand(image, coils.shared())), mask.flags());
}

ad::Value EncodeAdjoint(ad::Graph &g, ad::Value kspace, CoilMaps const &coils, SamplingMask const &mask)
{
  return g.coilCombine(g.ifft2c(g.maskColumns(kspace, mask.flags())), coils.shared());
}

ad::Value EncodeNormal(ad::Graph &g, ad::Value image, CoilMaps const &coils, SamplingMask const &mask)
{
  return g.coilGram(image, coils.shared(), mask.flags());
}

namespace {

// Normalized coordinate in [-1, 1) of pixel index i along an axis of n.
double Coord(std::size_t i, std::size_t n)
{
  return (static_cast<double>(i) - static_cast<double>(n) / 2.0) / (static_cast<double>(n) / 2.0);
}

} // namespace

ComplexImage MakePhantom(std::size_t H, std::size_t W, std::uint64_t seed)
{
  if (H < 16 || W < 16) {
    throw ShapeError("make_phantom: dimensions must be >= 16, got " + std::to_string(H) + "x" + std::to_string(W));
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::size_t const count = std::uniform_int_distribution<std::size_t>(5, 12)(rng);
  std::vector<double> mag(H * W, 0.0);
  for (std::size_t e = 0; e < count; ++e) {
    // The first ellipse is a large body that guarantees broad support.
    bool const body = e == 0;
    double const cy = body ? uniform(-0.1, 0.1) : uniform(-0.5, 0.5);
    double const cx = body ? uniform(-0.1, 0.1) : uniform(-0.5, 0.5);
    double const ay = body ? uniform(0.6, 0.9) : uniform(0.08, 0.4);
    double const ax = body ? uniform(0.6, 0.9) : uniform(0.08, 0.4);
    double const angle = uniform(0.0, std::numbers::pi);
    double const intensity = uniform(0.2, 1.0);
    double const ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double const dy = Coord(y, H) - cy, dx = Coord(x, W) - cx;
        double const u = (ca * dx + sa * dy) / ax, v = (-sa * dx + ca * dy) / ay;
        if (u * u + v * v <= 1.0) { mag[y * W + x] += intensity; }
      }
    }
  }

  // Separable [1 2 1]/4 blur with zero padding.
  auto blur = [&](std::vector<double> const &in, bool rows) {
    std::vector<double> out(in.size(), 0.0);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double s = 2.0 * in[y * W + x];
        if (rows) {
          if (x > 0) { s += in[y * W + x - 1]; }
          if (x + 1 < W) { s += in[y * W + x + 1]; }
        } else {
          if (y > 0) { s += in[(y - 1) * W + x]; }
          if (y + 1 < H) { s += in[(y + 1) * W + x]; }
        }
        out[y * W + x] = 0.25 * s;
      }
    }
    return out;
  };
  mag = blur(blur(mag, true), false);

  double coeff[6];
  for (auto &c : coeff) { c = uniform(-0.5, 0.5) * std::numbers::pi; }
  auto phase = [&](std::size_t y, std::size_t x) {
    double const v = Coord(y, H), u = Coord(x, W);
    return coeff[0] + coeff[1] * u + coeff[2] * v + coeff[3] * u * v + coeff[4] * u * u + coeff[5] * v * v;
  };

  std::size_t const peak = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
  double const peakMag = mag[peak];
  double const peakPhase = phase(peak / W, peak % W);
  ComplexImage img(H, W);
  double *re = img.array().data(), *im = re + H * W;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      std::size_t const p = y * W + x;
      double const m = mag[p] / peakMag;
      // Phase is taken relative to the peak pixel, which therefore lands on
      // exactly (1, 0).
      double const phi = phase(y, x) - peakPhase;
      re[p] = m * std::cos(phi);
      im[p] = m * std::sin(phi);
      while (std::hypot(re[p], im[p]) > 1.0) {
        re[p] = std::nextafter(re[p], 0.0);
        im[p] = std::nextafter(im[p], 0.0);
      }
    }
  }
  return img;
}

CoilMaps MakeCoilMaps(std::size_t C, std::size_t H, std::size_t W, std::uint64_t seed)
{
  if (C < 1 || H < 1 || W < 1) { throw ShapeError("make_coil_maps: C, H and W must be >= 1"); }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::size_t const HW = H * W;
  Array maps({C, 2, H, W});
  double const offset = uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t c = 0; c < C; ++c) {
    double const theta = offset + 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(C);
    double const radius = uniform(1.1, 1.4);
    double const cy = radius * std::sin(theta), cx = radius * std::cos(theta);
    double const width = uniform(0.7, 1.0);
    double const p0 = uniform(-std::numbers::pi, std::numbers::pi);
    double const px = uniform(-1.0, 1.0), py = uniform(-1.0, 1.0);
    double *re = maps.data() + 2 * HW * c, *im = re + HW;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double const v = Coord(y, H), u = Coord(x, W);
        double const d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
        double const m = std::exp(-d2 / (2.0 * width * width));
        double const phi = p0 + px * u + py * v;
        re[y * W + x] = m * std::cos(phi);
        im[y * W + x] = m * std::sin(phi);
      }
    }
  }
  for (std::size_t p = 0; p < HW; ++p) {
    double energy = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double const r = maps[2 * HW * c + p], i = maps[2 * HW * c + HW + p];
      energy += r * r + i * i;
    }
    double const inv = 1.0 / std::sqrt(energy);
    for (std::size_t c = 0; c < C; ++c) {
      maps[2 * HW * c + p] *= inv;
      maps[2 * HW * c + HW + p] *= inv;
    }
  }
  return CoilMaps(std::move(maps));
}

KSpace AddNoise(KSpace const &kspace, NoiseSpec const &spec)
{
  if (!(spec.sigma >= 0.0)) { throw ConfigError("add_noise: sigma must be >= 0"); }
  Array data = kspace.array();
  if (spec.sigma > 0.0) {
    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.sigma);
    std::size_t const W = kspace.width();
    auto const &flags = *kspace.mask().flags();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (flags[i % W]) { data[i] += normal(rng); }
    }
  }
  return KSpace(std::move(data), kspace.mask());
}

} // namespace mmr
