#include "mmrecon/metrics.hpp"
#include "mmrecon/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace mmr {

namespace {

void CheckPair(ComplexImage const &ref, ComplexImage const &rec, char const *op)
{
  if (ref.array().shape() != rec.array().shape()) {
    throw ConfigError(
      std::string(op) + ": shapes differ: " + ad::ShapeString(ref.array().shape()) + " vs " +
      ad::ShapeString(rec.array().shape()));
  }
}

double Max(std::vector<double> const &v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

std::vector<double> GaussianWindow(std::size_t n, double sigma)
{
  std::vector<double> w(n);
  double const c = 0.5 * static_cast<double>(n - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double const d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto &v : w) { v /= sum; }
  return w;
}

// Separable "valid" filtering of an H x W image with window w.
std::vector<double> Filter(std::vector<double> const &img, std::size_t H, std::size_t W, std::vector<double> const &w)
{
  std::size_t const n = w.size(), oh = H - n + 1, ow = W - n + 1;
  std::vector<double> rows(H * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) { s += w[k] * img[y * W + x + k]; }
      rows[y * ow + x] = s;
    }
  }
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) { s += w[k] * rows[(y + k) * ow + x]; }
      out[y * ow + x] = s;
    }
  }
  return out;
}

} // namespace

double Psnr(ComplexImage const &ref, ComplexImage const &rec)
{
  CheckPair(ref, rec, "psnr");
  auto const a = ref.magnitude(), b = rec.magnitude();
  double const peak = Max(a);
  if (!(peak > 0.0)) { throw ConfigError("psnr: reference image is zero"); }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { sq += (a[i] - b[i]) * (a[i] - b[i]); }
  if (sq == 0.0) { return kPsnrIdentical; }
  double const rmse = std::sqrt(sq / static_cast<double>(a.size()));
  return 20.0 * std::log10(peak / rmse);
}

double SsimMagnitude(
  std::vector<double> const &a, std::vector<double> const &b, std::size_t H, std::size_t W, double L,
  SsimOptions const &opt)
{
  if (a.size() != H * W || b.size() != H * W) { throw ShapeError("ssim: image sizes disagree"); }
  if (opt.window < 1 || opt.window % 2 == 0 || !(opt.sigma > 0.0)) {
    throw ConfigError("ssim: window must be odd and positive, sigma positive");
  }
  if (H < opt.window || W < opt.window) {
    throw ShapeError(
      "ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " is smaller than the " +
      std::to_string(opt.window) + "-pixel window");
  }
  if (!(L > 0.0)) { throw ConfigError("ssim: degenerate (constant zero) reference"); }
  auto const w = GaussianWindow(opt.window, opt.sigma);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  auto const mu1 = Filter(a, H, W, w), mu2 = Filter(b, H, W, w);
  auto const s11 = Filter(aa, H, W, w), s22 = Filter(bb, H, W, w), s12 = Filter(ab, H, W, w);
  double const c1 = (opt.k1 * L) * (opt.k1 * L), c2 = (opt.k2 * L) * (opt.k2 * L);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    double const v1 = s11[i] - mu1[i] * mu1[i];
    double const v2 = s22[i] - mu2[i] * mu2[i];
    double const cov = s12[i] - mu1[i] * mu2[i];
    sum += ((2.0 * mu1[i] * mu2[i] + c1) * (2.0 * cov + c2)) /
           ((mu1[i] * mu1[i] + mu2[i] * mu2[i] + c1) * (v1 + v2 + c2));
  }
  return sum / static_cast<double>(mu1.size());
}

double Ssim(ComplexImage const &ref, ComplexImage const &rec, SsimOptions const &opt)
{
  CheckPair(ref, rec, "ssim");
  auto const a = ref.magnitude(), b = rec.magnitude();
  double const L = opt.symmetric ? std::max(Max(a), Max(b)) : Max(a);
  if (!(Max(a) > 0.0)) { throw ConfigError("ssim: degenerate (constant zero) reference"); }
  return SsimMagnitude(a, b, ref.height(), ref.width(), L, opt);
}

double Percentile(std::vector<double> values, double q)
{
  if (values.empty()) { throw ConfigError("percentile: no values"); }
  if (!(q >= 0.0 && q <= 1.0)) { throw ConfigError("percentile: q must lie in [0, 1]"); }
  std::sort(values.begin(), values.end());
  double const pos = q * static_cast<double>(values.size() - 1);
  auto const lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t const hi = std::min(lo + 1, values.size() - 1);
  double const frac = pos - static_cast<double>(lo);
  // Written so that infinite order statistics (identical-image PSNR) stay
  // well defined.
  if (frac == 0.0 || values[lo] == values[hi]) { return values[lo]; }
  return values[lo] + frac * (values[hi] - values[lo]);
}

Quantiles Summarize(std::vector<double> const &values)
{
  return {Percentile(values, 0.5), Percentile(values, 0.25), Percentile(values, 0.75)};
}

namespace {

// Metrics grouped by method (first-appearance order), each sorted by slice.
std::vector<std::pair<std::string, std::vector<SliceMetrics>>> Group(std::vector<SliceMetrics> const &metrics)
{
  std::vector<std::pair<std::string, std::vector<SliceMetrics>>> groups;
  std::map<std::string, std::size_t> index;
  for (auto const &m : metrics) {
    auto [it, fresh] = index.emplace(m.method, groups.size());
    if (fresh) { groups.push_back({m.method, {}}); }
    groups[it->second].second.push_back(m);
  }
  for (auto &[name, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(), [](auto const &x, auto const &y) { return x.sliceId < y.sliceId; });
  }
  return groups;
}

std::string Number(double v)
{
  if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

AggregateReport Aggregate(std::vector<SliceMetrics> const &metrics)
{
  if (metrics.empty()) { throw ConfigError("aggregate: no metrics"); }
  AggregateReport report;
  for (auto const &[name, rows] : Group(metrics)) {
    std::vector<double> ssim, psnr;
    for (auto const &r : rows) {
      ssim.push_back(r.ssim);
      psnr.push_back(r.psnr);
    }
    report.methods.push_back({name, rows.size(), Summarize(ssim), Summarize(psnr)});
  }
  return report;
}

MethodSummary const &AggregateReport::find(std::string const &method) const
{
  for (auto const &m : methods) {
    if (m.method == method) { return m; }
  }
  throw ConfigError("aggregate: no method '" + method + "' in report");
}

std::string FormatMetric(double value)
{
  if (std::isinf(value)) { return value > 0 ? "inf" : "-inf"; }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

std::string AggregateReport::csv() const
{
  std::string out = "method,n,ssim_median,ssim_p25,ssim_p75,psnr_median,psnr_p25,psnr_p75\n";
  for (auto const &m : methods) {
    out += m.method + "," + std::to_string(m.count) + "," + Number(m.ssim.median) + "," + Number(m.ssim.p25) + "," +
           Number(m.ssim.p75) + "," + Number(m.psnr.median) + "," + Number(m.psnr.p25) + "," + Number(m.psnr.p75) +
           "\n";
  }
  return out;
}

std::string AggregateReport::table() const
{
  auto cell = [](Quantiles const &q) {
    return FormatMetric(q.median) + " [" + FormatMetric(q.p25) + ", " + FormatMetric(q.p75) + "]";
  };
  std::size_t width = 6;
  for (auto const &m : methods) { width = std::max(width, m.method.size()); }
  auto pad = [](std::string s, std::size_t n) {
    s.resize(std::max(s.size(), n), ' ');
    return s;
  };
  std::string out = pad("Method", width) + "  " + pad("SSIM", 26) + "  PSNR (dB)\n";
  for (auto const &m : methods) {
    out += pad(m.method, width) + "  " + pad(cell(m.ssim), 26) + "  " + cell(m.psnr) + "\n";
  }
  return out;
}

std::string MetricsCsv(std::vector<SliceMetrics> const &metrics)
{
  std::string out = "slice_id,method,ssim,psnr\n";
  for (auto const &[name, rows] : Group(metrics)) {
    for (auto const &r : rows) {
      out += std::to_string(r.sliceId) + "," + r.method + "," + Number(r.ssim) + "," + Number(r.psnr) + "\n";
    }
  }
  return out;
}

} // namespace mmr
