#include "mmrecon/baseline.hpp"
#include "mmrecon/checkpoint.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/kernels.hpp"
#include "mmrecon/metrics.hpp"
#include "mmrecon/model.hpp"
#include "mmrecon/train.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <complex>

namespace py = pybind11;
using mmr::ad::Array;
using CArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

namespace {

// (..., H, W) complex -> planar {..., 2, H, W} with the leading axes kept.
Array ToPlanar(CArray const &a, std::size_t rank)
{
  if (static_cast<std::size_t>(a.ndim()) != rank) {
    throw mmr::ShapeError("expected a " + std::to_string(rank) + "-d complex array, got " + std::to_string(a.ndim()) + "-d");
  }
  std::size_t const H = a.shape(rank - 2), W = a.shape(rank - 1), HW = H * W;
  std::size_t const lead = rank == 3 ? a.shape(0) : 1;
  mmr::ad::Shape shape = rank == 3 ? mmr::ad::Shape{lead, 2, H, W} : mmr::ad::Shape{2, H, W};
  Array out(shape);
  auto const *src = a.data();
  for (std::size_t c = 0; c < lead; ++c) {
    for (std::size_t p = 0; p < HW; ++p) {
      out[2 * HW * c + p] = src[HW * c + p].real();
      out[2 * HW * c + HW + p] = src[HW * c + p].imag();
    }
  }
  return out;
}

CArray FromPlanar(Array const &a)
{
  std::size_t const rank = a.rank(), H = a.dim(rank - 2), W = a.dim(rank - 1), HW = H * W;
  std::size_t const lead = rank == 4 ? a.dim(0) : 1;
  std::vector<py::ssize_t> shape;
  if (rank == 4) { shape.push_back(static_cast<py::ssize_t>(lead)); }
  shape.push_back(static_cast<py::ssize_t>(H));
  shape.push_back(static_cast<py::ssize_t>(W));
  CArray out(shape);
  auto *dst = out.mutable_data();
  for (std::size_t c = 0; c < lead; ++c) {
    for (std::size_t p = 0; p < HW; ++p) { dst[HW * c + p] = {a[2 * HW * c + p], a[2 * HW * c + HW + p]}; }
  }
  return out;
}

mmr::ComplexImage Image(CArray const &a) { return mmr::ComplexImage(ToPlanar(a, 2)); }
mmr::CoilMaps Coils(CArray const &a) { return mmr::CoilMaps(ToPlanar(a, 3)); }
mmr::SamplingMask Mask(std::vector<std::size_t> const &columns, std::size_t width, std::vector<std::size_t> const &acs)
{
  return mmr::SamplingMask(width, columns, acs);
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "mmrecon core: encoding operators, baselines, metrics and trained-model inference";

  auto error = py::register_exception<mmr::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<mmr::ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<mmr::ConfigError>(m, "ConfigError", error.ptr());
  auto data = py::register_exception<mmr::DataError>(m, "DataError", error.ptr());
  py::register_exception<mmr::VersionError>(m, "VersionError", data.ptr());
  py::register_exception<mmr::NumericalError>(m, "NumericalError", error.ptr());

  m.def(
    "fft2c",
    [](CArray const &x) {
      auto a = ToPlanar(x, 2);
      mmr::kernels::Fft2c(a.data(), 1, a.dim(1), a.dim(2));
      return FromPlanar(a);
    },
    py::arg("image"), "Centered orthonormal 2D DFT of an (H, W) complex image.");
  m.def(
    "ifft2c",
    [](CArray const &x) {
      auto a = ToPlanar(x, 2);
      mmr::kernels::Ifft2c(a.data(), 1, a.dim(1), a.dim(2));
      return FromPlanar(a);
    },
    py::arg("kspace"), "Inverse of fft2c.");

  m.def("phantom", [](std::size_t H, std::size_t W, std::uint64_t seed) { return FromPlanar(mmr::MakePhantom(H, W, seed).array()); },
        py::arg("H"), py::arg("W"), py::arg("seed"), "Random-ellipse phantom with peak magnitude 1.");
  m.def("coil_maps", [](std::size_t C, std::size_t H, std::size_t W, std::uint64_t seed) {
          return FromPlanar(mmr::MakeCoilMaps(C, H, W, seed).array());
        },
        py::arg("C"), py::arg("H"), py::arg("W"), py::arg("seed"), "Normalized synthetic coil sensitivities (C, H, W).");

  m.def("uniform_mask", [](std::size_t W, std::size_t R, std::size_t nAcs) { return mmr::UniformMask(W, R, nAcs).columns(); },
        py::arg("W"), py::arg("R"), py::arg("n_acs"));
  m.def("random_mask", [](std::size_t W, std::size_t R, std::size_t nAcs, std::uint64_t seed) {
          return mmr::RandomMask(W, R, nAcs, seed).columns();
        },
        py::arg("W"), py::arg("R"), py::arg("n_acs"), py::arg("seed"));
  m.def(
    "partition_masks",
    [](std::vector<std::size_t> const &columns, std::size_t W, std::size_t K, double rho, std::uint64_t seed,
       std::vector<std::size_t> const &acs, std::string const &policy) {
      std::vector<std::vector<std::size_t>> out;
      for (auto const &c : mmr::PartitionMasks(Mask(columns, W, acs), K, rho, seed, mmr::ParseAcsPolicy(policy)).children) {
        out.push_back(c.columns());
      }
      return out;
    },
    py::arg("columns"), py::arg("W"), py::arg("K"), py::arg("rho"), py::arg("seed"), py::arg("acs") = std::vector<std::size_t>{},
    py::arg("acs_policy") = "keep-acs", "K random subsets of the sampled columns.");

  m.def(
    "apply_e",
    [](CArray const &image, CArray const &coils, std::vector<std::size_t> const &columns) {
      auto const maps = Coils(coils);
      return FromPlanar(mmr::ApplyE(Image(image), maps, Mask(columns, maps.width(), {})).array());
    },
    py::arg("image"), py::arg("coils"), py::arg("columns"), "Masked multi-coil k-space of an image.");
  m.def(
    "apply_eh",
    [](CArray const &kspace, CArray const &coils, std::vector<std::size_t> const &columns) {
      auto const maps = Coils(coils);
      auto const mask = Mask(columns, maps.width(), {});
      return FromPlanar(mmr::ApplyEH(mmr::KSpace(ToPlanar(kspace, 3), mask), maps, mask).array());
    },
    py::arg("kspace"), py::arg("coils"), py::arg("columns"), "Adjoint of apply_e.");

  m.def(
    "cg_sense",
    [](CArray const &kspace, CArray const &coils, std::vector<std::size_t> const &columns, double lam, std::size_t iters) {
      auto const maps = Coils(coils);
      auto const mask = Mask(columns, maps.width(), {});
      return FromPlanar(mmr::CgSense(mmr::KSpace(ToPlanar(kspace, 3), mask), mask, maps, {lam, iters}).array());
    },
    py::arg("kspace"), py::arg("coils"), py::arg("columns"), py::arg("lam") = 0.0, py::arg("n_iter") = 30);

  m.def("psnr", [](CArray const &ref, CArray const &rec) { return mmr::Psnr(Image(ref), Image(rec)); },
        py::arg("reference"), py::arg("reconstruction"));
  m.def("ssim", [](CArray const &ref, CArray const &rec) { return mmr::Ssim(Image(ref), Image(rec)); },
        py::arg("reference"), py::arg("reconstruction"));
  m.def("loss_l1l2", [](CArray const &ref, CArray const &pred) { return mmr::LossL1L2(ToPlanar(ref, 3), ToPlanar(pred, 3)); },
        py::arg("reference"), py::arg("prediction"), "Normalized l2 + l1 loss between (C, H, W) k-space arrays.");

  m.def(
    "reconstruct",
    [](std::filesystem::path const &checkpoint, CArray const &kspace, CArray const &coils,
       std::vector<std::size_t> const &columns, std::vector<std::size_t> const &acs) {
      auto const ck = mmr::LoadCheckpoint(checkpoint);
      auto const maps = Coils(coils);
      auto const mask = Mask(columns, maps.width(), acs);
      return FromPlanar(mmr::Reconstruct(mmr::KSpace(ToPlanar(kspace, 3), mask), mask, maps, ck.state.params).image.array());
    },
    py::arg("checkpoint"), py::arg("kspace"), py::arg("coils"), py::arg("columns"), py::arg("acs") = std::vector<std::size_t>{},
    "Unrolled-network reconstruction with the parameters of a training checkpoint.");
}
