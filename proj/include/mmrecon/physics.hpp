#pragma once

#include "graph.hpp"
#include "sampling.hpp"

#include <complex>
#include <cstdint>
#include <memory>

namespace mmr {

using Cx = std::complex<double>;

/// Complex H x W image stored as a {2, H, W} planar array.
class ComplexImage
{
public:
  ComplexImage() = default;
  ComplexImage(std::size_t H, std::size_t W);
  /// Throws ShapeError unless `data` is {2, H, W}.
  explicit ComplexImage(ad::Array data);

  std::size_t height() const { return data_.dim(1); }
  std::size_t width() const { return data_.dim(2); }
  ad::Array const &array() const { return data_; }
  ad::Array &array() { return data_; }

  Cx at(std::size_t y, std::size_t x) const;
  void set(std::size_t y, std::size_t x, Cx v);
  /// |x| for every pixel, row-major H*W.
  std::vector<double> magnitude() const;

private:
  ad::Array data_;
};

/// Per-coil complex sensitivities {C, 2, H, W}, normalized so that
/// sum_c |S_c(p)|^2 == 1 wherever the maps are nonzero.
class CoilMaps
{
public:
  CoilMaps() = default;
  explicit CoilMaps(ad::Array data);

  std::size_t coils() const { return data_->dim(0); }
  std::size_t height() const { return data_->dim(2); }
  std::size_t width() const { return data_->dim(3); }
  ad::Array const &array() const { return *data_; }
  std::shared_ptr<ad::Array const> shared() const { return data_; }
  Cx at(std::size_t c, std::size_t y, std::size_t x) const;

private:
  std::shared_ptr<ad::Array const> data_;
};

/// Multi-coil k-space {C, 2, H, W} together with the mask it was sampled on.
/// Entries on unsampled columns are zero.
class KSpace
{
public:
  KSpace() = default;
  /// Zeroes any unsampled column of `data`.
  KSpace(ad::Array data, SamplingMask mask);

  std::size_t coils() const { return data_.dim(0); }
  std::size_t height() const { return data_.dim(2); }
  std::size_t width() const { return data_.dim(3); }
  ad::Array const &array() const { return data_; }
  SamplingMask const &mask() const { return mask_; }
  Cx at(std::size_t c, std::size_t y, std::size_t x) const;

  /// The same data restricted to a sub-mask.
  KSpace restrict(SamplingMask const &subset) const;

private:
  ad::Array data_;
  SamplingMask mask_;
};

struct NoiseSpec
{
  double sigma = 0.0; // per real/imaginary component
  std::uint64_t seed = 0;
};

/// mask * FFT2(S_c * x) for every coil.
KSpace ApplyE(ComplexImage const &image, CoilMaps const &coils, SamplingMask const &mask);
/// sum_c conj(S_c) * IFFT2(mask * k_c).
ComplexImage ApplyEH(KSpace const &kspace, CoilMaps const &coils, SamplingMask const &mask);
/// E^H E x.
ComplexImage ApplyNormal(ComplexImage const &image, CoilMaps const &coils, SamplingMask const &mask);

// The same operators recorded on a graph.
ad::Value Encode(ad::Graph &g, ad::Value image, CoilMaps const &coils, SamplingMask const &mask);
ad::Value EncodeAdjoint(ad::Graph &g, ad::Value kspace, CoilMaps const &coils, SamplingMask const &mask);
ad::Value EncodeNormal(ad::Graph &g, ad::Value image, CoilMaps const &coils, SamplingMask const &mask);

/// Random-ellipse phantom with smooth phase; max magnitude exactly 1.
ComplexImage MakePhantom(std::size_t H, std::size_t W, std::uint64_t seed);
CoilMaps MakeCoilMaps(std::size_t C, std::size_t H, std::size_t W, std::uint64_t seed);
/// i.i.d. Gaussian noise on the sampled entries only.
KSpace AddNoise(KSpace const &kspace, NoiseSpec const &spec);

} // namespace mmr
