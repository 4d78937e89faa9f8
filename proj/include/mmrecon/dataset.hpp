#pragma once

#include "physics.hpp"
#include "sampling.hpp"
#include "train.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mmr {

struct DataSpec
{
  std::size_t H = 64, W = 64, C = 4;
  std::size_t nTrain = 100, nTest = 20;
  double sigma = 0.01; // k-space noise per real/imaginary component
  std::uint64_t seed = 1;
  friend bool operator==(DataSpec const &, DataSpec const &) = default;
};

struct SamplingSpec
{
  std::string pattern = "uniform"; // uniform | random
  std::size_t R = 4;
  std::size_t nAcs = 8;
  std::uint64_t seed = 2; // random pattern only
  friend bool operator==(SamplingSpec const &, SamplingSpec const &) = default;
};

/// Acquisition mask Omega of slice `id`.
SamplingMask AcquisitionMask(SamplingSpec const &spec, std::size_t W, std::size_t id);

/// One synthetic slice: clean image, coils, noisy fully sampled k-space and
/// its acquisition mask.
struct SliceData
{
  std::size_t id = 0;
  ComplexImage image;
  CoilMaps coils;
  KSpace full;
  SamplingMask omega;

  /// Noisy measurements on Omega.
  KSpace acquired() const { return full.restrict(omega); }
  TrainingSlice training() const { return {full, coils, omega}; }
};

SliceData MakeSlice(DataSpec const &data, SamplingSpec const &sampling, std::size_t id);

/// A dataset directory: manifest.json plus slice_NNNNN.bin per slice, each
/// holding little-endian float64 [image 2*H*W][coils C*2*H*W][k-space
/// C*2*H*W]. Slices [0, nTrain) are for training, the rest for testing.
class Dataset
{
public:
  /// Writes every slice and the manifest. Re-running with the same inputs
  /// reproduces the files byte for byte. Throws ConfigError if there are no
  /// slices and DataError if the directory is not writable.
  static Dataset Generate(
    std::filesystem::path const &dir, DataSpec const &data, SamplingSpec const &sampling,
    nlohmann::json const &config = nlohmann::json::object());
  /// Throws DataError if the manifest is missing or malformed.
  static Dataset Open(std::filesystem::path const &dir);

  std::filesystem::path const &dir() const { return dir_; }
  DataSpec const &data() const { return data_; }
  SamplingSpec const &sampling() const { return sampling_; }
  nlohmann::json const &manifest() const { return manifest_; }
  std::size_t size() const { return data_.nTrain + data_.nTest; }
  std::vector<std::size_t> trainIds() const;
  std::vector<std::size_t> testIds() const;
  SamplingMask const &omega(std::size_t id) const { return omegas_.at(id); }

  /// Throws DataError on a missing, truncated or non-finite slice file.
  SliceData load(std::size_t id) const;
  std::vector<TrainingSlice> trainingSlices() const;

  static std::string SliceFile(std::size_t id);

private:
  std::filesystem::path dir_;
  DataSpec data_;
  SamplingSpec sampling_;
  std::vector<SamplingMask> omegas_;
  nlohmann::json manifest_;
};

/// Raw little-endian float64 dump of an array and its inverse.
void WriteArray(std::filesystem::path const &path, ad::Array const &a);
ad::Array ReadArray(std::filesystem::path const &path, ad::Shape const &shape);

/// 16-bit binary PGM of |image|, scaled so the brightest pixel is 65535.
void WritePgm(std::filesystem::path const &path, ComplexImage const &image);

} // namespace mmr
