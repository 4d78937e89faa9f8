#pragma once

#include "physics.hpp"

#include <limits>
#include <string>
#include <vector>

namespace mmr {

/// Returned by Psnr when the magnitudes match exactly.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 20 log10(max|ref| / RMSE(|ref| - |rec|)) on magnitude images.
/// Throws ConfigError for a zero reference or mismatched shapes.
double Psnr(ComplexImage const &ref, ComplexImage const &rec);

struct SsimOptions
{
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Use L = max(max|ref|, max|rec|) instead of max|ref|, making the index
  /// symmetric in its arguments.
  bool symmetric = false;
};

/// Mean structural similarity of the magnitude images over all positions of
/// a Gaussian window lying fully inside the image.
double Ssim(ComplexImage const &ref, ComplexImage const &rec, SsimOptions const &opt = {});
/// Same on raw magnitude images (row-major H*W) with an explicit range L.
double SsimMagnitude(
  std::vector<double> const &a, std::vector<double> const &b, std::size_t H, std::size_t W, double L,
  SsimOptions const &opt = {});

struct SliceMetrics
{
  std::size_t sliceId = 0;
  std::string method;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct Quantiles
{
  double median = 0.0, p25 = 0.0, p75 = 0.0;
};

/// q-quantile (q in [0, 1]) with linear interpolation between order
/// statistics. Throws ConfigError on empty input.
double Percentile(std::vector<double> values, double q);
Quantiles Summarize(std::vector<double> const &values);

struct MethodSummary
{
  std::string method;
  std::size_t count = 0;
  Quantiles ssim, psnr;
};

struct AggregateReport
{
  std::vector<MethodSummary> methods; // in order of first appearance

  MethodSummary const &find(std::string const &method) const;
  std::string csv() const;
  /// One row per method, cells formatted "median [p25, p75]".
  std::string table() const;
};

/// Groups by method; rows are sorted by slice id before reduction.
AggregateReport Aggregate(std::vector<SliceMetrics> const &metrics);

/// "slice_id,method,ssim,psnr" rows, sorted by method order then slice id.
std::string MetricsCsv(std::vector<SliceMetrics> const &metrics);
/// Three-decimal rendering; the identical-image sentinel prints as "inf".
std::string FormatMetric(double value);

} // namespace mmr
