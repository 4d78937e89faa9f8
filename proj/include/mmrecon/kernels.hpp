#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Raw numerical kernels shared by the differentiable graph and the plain
// (non-recording) operators. All images use the planar complex layout:
// a complex H x W image occupies 2*H*W doubles, real plane first.
namespace mmr::kernels {

/// Centered orthonormal 2D DFT, in place, applied to `count` consecutive
/// complex H x W images. Zero frequency sits at index (H/2, W/2).
void Fft2c(double *data, std::size_t count, std::size_t H, std::size_t W);
void Ifft2c(double *data, std::size_t count, std::size_t H, std::size_t W);

/// out[c] = maps[c] * x for every coil c.
void CoilExpand(double const *x, double const *maps, double *out, std::size_t C, std::size_t HW);
/// out = sum_c conj(maps[c]) * k[c]. Overwrites out.
void CoilCombine(double const *k, double const *maps, double *out, std::size_t C, std::size_t HW);

/// out = sum_c conj(S_c) IFFT2(mask * FFT2(S_c x)), the normal operator E^H E.
void CoilGram(
  double const *x, double const *maps, std::span<std::uint8_t const> keep, double *out, std::size_t C, std::size_t H,
  std::size_t W);

/// Zeroes every column w with keep[w] == 0 in `planes` consecutive H x W planes.
void MaskColumns(
  double *data, std::size_t planes, std::size_t H, std::size_t W, std::span<std::uint8_t const> keep);

/// "Same" 2D convolution (cross-correlation), stride 1, zero padding, odd
/// square kernel. x: {Cin, H, W}, w: {Cout, Cin, k, k}, out: {Cout, H, W}.
struct ConvDims
{
  std::size_t cin, cout, H, W, k;
};
void ConvForward(ConvDims const &d, double const *x, double const *w, double *out);
/// dx += conv_transpose(g, w)
void ConvBackwardInput(ConvDims const &d, double const *g, double const *w, double *dx);
/// dw += correlate(g, x)
void ConvBackwardWeight(ConvDims const &d, double const *g, double const *x, double *dw);

} // namespace mmr::kernels
