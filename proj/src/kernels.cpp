#include "mmrecon/kernels.hpp"

#include <Eigen/Core>
#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

namespace mmr::kernels {

namespace {

// SIMD-aligned interleaved complex scratch owned by one thread.
struct AlignedBuffer
{
  fftw_complex *data = nullptr;
  std::size_t n = 0;
  AlignedBuffer() = default;
  AlignedBuffer(AlignedBuffer const &) = delete;
  AlignedBuffer &operator=(AlignedBuffer const &) = delete;
  ~AlignedBuffer() { fftw_free(data); }
  void reserve(std::size_t count)
  {
    if (count <= n) { return; }
    fftw_free(data);
    data = fftw_alloc_complex(count);
    n = count;
  }
};

struct Plans
{
  fftw_plan forward, backward;
};

// FFTW's planner is not thread-safe, execution with new arrays is. Plans are
// built with FFTW_ESTIMATE so the chosen algorithm (and hence every rounding
// decision) is identical from run to run. Executions always use
// fftw_malloc'd interleaved scratch so the SIMD codelets stay eligible.
Plans const &PlansFor(std::size_t H, std::size_t W)
{
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>, Plans> plans;
  std::lock_guard lock(mutex);
  auto const key = std::make_pair(H, W);
  if (auto it = plans.find(key); it != plans.end()) { return it->second; }
  AlignedBuffer in, out;
  in.reserve(H * W);
  out.reserve(H * W);
  int const h = static_cast<int>(H), w = static_cast<int>(W);
  Plans p{
    fftw_plan_dft_2d(h, w, in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE),
    fftw_plan_dft_2d(h, w, in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE),
  };
  return plans.emplace(key, p).first->second;
}

void CenteredTransform(double *data, std::size_t count, std::size_t H, std::size_t W, bool inverse)
{
  std::size_t const HW = H * W;
  Plans const &plans = PlansFor(H, W);
  thread_local AlignedBuffer shifted, spectrum;
  shifted.reserve(HW);
  spectrum.reserve(HW);
  double const scale = 1.0 / std::sqrt(static_cast<double>(HW));
  std::size_t const hh = H / 2, hw = W / 2;

  for (std::size_t n = 0; n < count; ++n) {
    double *re = data + 2 * HW * n, *im = re + HW;
    // ifftshift while interleaving: shifted[y][x] = in[(y + hh) % H][(x + hw) % W]
    for (std::size_t y = 0; y < H; ++y) {
      std::size_t const row = ((y + hh) % H) * W;
      fftw_complex *d = shifted.data + y * W;
      for (std::size_t x = 0; x < W; ++x) {
        std::size_t const sx = x + hw < W ? x + hw : x + hw - W;
        d[x][0] = re[row + sx];
        d[x][1] = im[row + sx];
      }
    }
    fftw_execute_dft(inverse ? plans.backward : plans.forward, shifted.data, spectrum.data);
    // fftshift back to planar: out[y][x] = spectrum[(y + H - hh) % H][(x + W - hw) % W]
    for (std::size_t y = 0; y < H; ++y) {
      fftw_complex const *s = spectrum.data + ((y + H - hh) % H) * W;
      double *dr = re + y * W, *di = im + y * W;
      for (std::size_t x = 0; x < W; ++x) {
        std::size_t const sx = x + W - hw < W ? x + W - hw : x - hw;
        dr[x] = scale * s[sx][0];
        di[x] = scale * s[sx][1];
      }
    }
  }
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<RowMat const>;
// Column-major views: a row-major {rows, cols} buffer seen as its transpose.
using ColMap = Eigen::Map<Eigen::MatrixXd>;
using ConstColMap = Eigen::Map<Eigen::MatrixXd const>;

void Im2Col(ConvDims const &d, double const *x, double *col)
{
  std::size_t const pad = d.k / 2, HW = d.H * d.W;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    double const *plane = x + ci * HW;
    for (std::size_t ky = 0; ky < d.k; ++ky) {
      for (std::size_t kx = 0; kx < d.k; ++kx) {
        double *row = col + ((ci * d.k + ky) * d.k + kx) * HW;
        std::ptrdiff_t const dy = static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(pad);
        std::ptrdiff_t const dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(pad);
        std::size_t const x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
        std::size_t const x1 = dx > 0 ? d.W - static_cast<std::size_t>(dx) : d.W;
        for (std::size_t y = 0; y < d.H; ++y) {
          double *out = row + y * d.W;
          std::ptrdiff_t const sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(d.H)) {
            std::fill(out, out + d.W, 0.0);
            continue;
          }
          double const *src = plane + static_cast<std::size_t>(sy) * d.W;
          std::fill(out, out + x0, 0.0);
          for (std::size_t xx = x0; xx < x1; ++xx) { out[xx] = src[xx + dx]; }
          std::fill(out + x1, out + d.W, 0.0);
        }
      }
    }
  }
}

void Col2ImAdd(ConvDims const &d, double const *col, double *x)
{
  std::size_t const pad = d.k / 2, HW = d.H * d.W;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    double *plane = x + ci * HW;
    for (std::size_t ky = 0; ky < d.k; ++ky) {
      for (std::size_t kx = 0; kx < d.k; ++kx) {
        double const *row = col + ((ci * d.k + ky) * d.k + kx) * HW;
        std::ptrdiff_t const dy = static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(pad);
        std::ptrdiff_t const dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(pad);
        std::size_t const x0 = dx < 0 ? static_cast<std::size_t>(-dx) : 0;
        std::size_t const x1 = dx > 0 ? d.W - static_cast<std::size_t>(dx) : d.W;
        for (std::size_t y = 0; y < d.H; ++y) {
          std::ptrdiff_t const sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(d.H)) { continue; }
          double const *in = row + y * d.W;
          double *dst = plane + static_cast<std::size_t>(sy) * d.W;
          for (std::size_t xx = x0; xx < x1; ++xx) { dst[xx + dx] += in[xx]; }
        }
      }
    }
  }
}

std::vector<double> &ColumnBuffer(ConvDims const &d)
{
  thread_local std::vector<double> buffer;
  buffer.resize(d.cin * d.k * d.k * d.H * d.W);
  return buffer;
}

} // namespace

void Fft2c(double *data, std::size_t count, std::size_t H, std::size_t W)
{
  CenteredTransform(data, count, H, W, false);
}

void Ifft2c(double *data, std::size_t count, std::size_t H, std::size_t W)
{
  CenteredTransform(data, count, H, W, true);
}

void CoilExpand(double const *x, double const *maps, double *out, std::size_t C, std::size_t HW)
{
  double const *xr = x, *xi = x + HW;
  for (std::size_t c = 0; c < C; ++c) {
    double const *sr = maps + 2 * HW * c, *si = sr + HW;
    double *orr = out + 2 * HW * c, *oi = orr + HW;
    for (std::size_t p = 0; p < HW; ++p) {
      orr[p] = sr[p] * xr[p] - si[p] * xi[p];
      oi[p] = sr[p] * xi[p] + si[p] * xr[p];
    }
  }
}

void CoilCombine(double const *k, double const *maps, double *out, std::size_t C, std::size_t HW)
{
  double *orr = out, *oi = out + HW;
  std::fill(out, out + 2 * HW, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double const *sr = maps + 2 * HW * c, *si = sr + HW;
    double const *kr = k + 2 * HW * c, *ki = kr + HW;
    for (std::size_t p = 0; p < HW; ++p) {
      orr[p] += sr[p] * kr[p] + si[p] * ki[p];
      oi[p] += sr[p] * ki[p] - si[p] * kr[p];
    }
  }
}

void CoilGram(
  double const *x, double const *maps, std::span<std::uint8_t const> keep, double *out, std::size_t C, std::size_t H,
  std::size_t W)
{
  std::size_t const HW = H * W;
  thread_local std::vector<double> coil;
  coil.resize(2 * HW);
  std::fill(out, out + 2 * HW, 0.0);
  double *orr = out, *oi = out + HW;
  for (std::size_t c = 0; c < C; ++c) {
    double const *sr = maps + 2 * HW * c, *si = sr + HW;
    CoilExpand(x, sr, coil.data(), 1, HW);
    CenteredTransform(coil.data(), 1, H, W, false);
    MaskColumns(coil.data(), 2, H, W, keep);
    CenteredTransform(coil.data(), 1, H, W, true);
    double const *kr = coil.data(), *ki = kr + HW;
    for (std::size_t p = 0; p < HW; ++p) {
      orr[p] += sr[p] * kr[p] + si[p] * ki[p];
      oi[p] += sr[p] * ki[p] - si[p] * kr[p];
    }
  }
}

void MaskColumns(
  double *data, std::size_t planes, std::size_t H, std::size_t W, std::span<std::uint8_t const> keep)
{
  for (std::size_t r = 0; r < planes * H; ++r) {
    double *row = data + r * W;
    for (std::size_t x = 0; x < W; ++x) {
      if (!keep[x]) { row[x] = 0.0; }
    }
  }
}

void ConvForward(ConvDims const &d, double const *x, double const *w, double *out)
{
  std::size_t const HW = d.H * d.W, K = d.cin * d.k * d.k;
  auto &col = ColumnBuffer(d);
  Im2Col(d, x, col.data());
  // out^T = col^T w^T keeps the long pixel dimension as the GEMM row count.
  ColMap(out, HW, d.cout).noalias() = ConstColMap(col.data(), HW, K) * ConstColMap(w, K, d.cout);
}

void ConvBackwardInput(ConvDims const &d, double const *g, double const *w, double *dx)
{
  std::size_t const HW = d.H * d.W, K = d.cin * d.k * d.k;
  auto &col = ColumnBuffer(d);
  ColMap(col.data(), HW, K).noalias() = ConstColMap(g, HW, d.cout) * ConstColMap(w, K, d.cout).transpose();
  Col2ImAdd(d, col.data(), dx);
}

void ConvBackwardWeight(ConvDims const &d, double const *g, double const *x, double *dw)
{
  std::size_t const HW = d.H * d.W, K = d.cin * d.k * d.k;
  auto &col = ColumnBuffer(d);
  Im2Col(d, x, col.data());
  MatMap(dw, d.cout, K).noalias() += ConstMatMap(g, d.cout, HW) * ConstMatMap(col.data(), K, HW).transpose();
}

} // namespace mmr::kernels
