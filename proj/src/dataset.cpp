#include "mmrecon/dataset.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/rng.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>

namespace mmr {

using ad::Array;
using nlohmann::json;

namespace {

enum Stream : std::uint64_t
{
  kPhantom = 1,
  kCoils = 2,
  kNoise = 3,
  kMask = 4,
};

template <typename T>
T Field(json const &j, char const *key, std::filesystem::path const &dir)
{
  try {
    return j.at(key).get<T>();
  } catch (json::exception const &e) {
    throw DataError("dataset " + dir.string() + ": bad or missing manifest field '" + key + "': " + e.what());
  }
}

void WriteBytes(std::filesystem::path const &path, std::vector<char> const &bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw DataError("cannot write " + path.string()); }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) { throw DataError("write failed for " + path.string()); }
}

std::vector<char> ReadBytes(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw DataError("cannot open " + path.string()); }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> Decode(std::vector<char> const &bytes, std::size_t offset, std::size_t count)
{
  std::vector<double> v(count);
  io::DecodeDoubles(bytes.data() + offset, v);
  return v;
}

} // namespace

SamplingMask AcquisitionMask(SamplingSpec const &spec, std::size_t W, std::size_t id)
{
  if (spec.pattern == "uniform") { return UniformMask(W, spec.R, spec.nAcs); }
  if (spec.pattern == "random") { return RandomMask(W, spec.R, spec.nAcs, DeriveSeed(spec.seed, kMask, id)); }
  throw ConfigError("sampling: unknown pattern '" + spec.pattern + "' (expected uniform or random)");
}

SliceData MakeSlice(DataSpec const &data, SamplingSpec const &sampling, std::size_t id)
{
  SliceData s;
  s.id = id;
  s.image = MakePhantom(data.H, data.W, DeriveSeed(data.seed, kPhantom, id));
  s.coils = MakeCoilMaps(data.C, data.H, data.W, DeriveSeed(data.seed, kCoils, id));
  s.full = AddNoise(ApplyE(s.image, s.coils, SamplingMask::Full(data.W)), {data.sigma, DeriveSeed(data.seed, kNoise, id)});
  s.omega = AcquisitionMask(sampling, data.W, id);
  return s;
}

std::string Dataset::SliceFile(std::size_t id)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "slice_%05zu.bin", id);
  return buf;
}

Dataset Dataset::Generate(
  std::filesystem::path const &dir, DataSpec const &data, SamplingSpec const &sampling, json const &config)
{
  if (data.nTrain + data.nTest == 0) { throw ConfigError("generate-data: the dataset would be empty"); }
  if (data.nTrain == 0) { throw ConfigError("generate-data: n_train must be at least 1"); }
  if (data.C < 1) { throw ConfigError("generate-data: C must be at least 1"); }
  if (!(data.sigma >= 0.0)) { throw ConfigError("generate-data: noise sigma must be non-negative"); }
  // Validates the sampling parameters before anything touches the disk.
  (void)AcquisitionMask(sampling, data.W, 0);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) { throw DataError("generate-data: cannot create " + dir.string() + ": " + ec.message()); }

  std::size_t const n = data.nTrain + data.nTest;
  json omegas = json::array();
  for (std::size_t id = 0; id < n; ++id) {
    auto const s = MakeSlice(data, sampling, id);
    std::vector<char> bytes;
    io::AppendDoubles(bytes, s.image.array().values());
    io::AppendDoubles(bytes, s.coils.array().values());
    io::AppendDoubles(bytes, s.full.array().values());
    WriteBytes(dir / SliceFile(id), bytes);
    omegas.push_back(s.omega.columns());
  }
  auto const omega0 = AcquisitionMask(sampling, data.W, 0);
  json manifest = {
    {"format", "mmrecon-dataset"},
    {"version", 1},
    {"H", data.H},
    {"W", data.W},
    {"C", data.C},
    {"n_train", data.nTrain},
    {"n_test", data.nTest},
    {"slices", n},
    {"noise_sigma", data.sigma},
    {"data_seed", data.seed},
    {"sampling", {{"pattern", sampling.pattern}, {"R", sampling.R}, {"n_acs", sampling.nAcs}, {"seed", sampling.seed}}},
    {"acs", omega0.acs()},
    {"omega", omegas},
    {"layout", "float64 LE: image[2,H,W], coils[C,2,H,W], kspace_full[C,2,H,W]"},
    {"config", config},
  };
  std::string const text = manifest.dump(2) + "\n";
  WriteBytes(dir / "manifest.json", std::vector<char>(text.begin(), text.end()));
  return Open(dir);
}

Dataset Dataset::Open(std::filesystem::path const &dir)
{
  auto const path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) { throw DataError("dataset: no manifest.json in " + dir.string()); }
  Dataset d;
  d.dir_ = dir;
  try {
    auto const bytes = ReadBytes(path);
    d.manifest_ = json::parse(bytes.begin(), bytes.end());
  } catch (json::exception const &e) {
    throw DataError("dataset " + dir.string() + ": corrupt manifest: " + e.what());
  }
  auto const &m = d.manifest_;
  if (Field<std::string>(m, "format", dir) != "mmrecon-dataset" || Field<int>(m, "version", dir) != 1) {
    throw DataError("dataset " + dir.string() + ": unsupported manifest format or version");
  }
  d.data_.H = Field<std::size_t>(m, "H", dir);
  d.data_.W = Field<std::size_t>(m, "W", dir);
  d.data_.C = Field<std::size_t>(m, "C", dir);
  d.data_.nTrain = Field<std::size_t>(m, "n_train", dir);
  d.data_.nTest = Field<std::size_t>(m, "n_test", dir);
  d.data_.sigma = Field<double>(m, "noise_sigma", dir);
  d.data_.seed = Field<std::uint64_t>(m, "data_seed", dir);
  auto const s = Field<json>(m, "sampling", dir);
  d.sampling_.pattern = Field<std::string>(s, "pattern", dir);
  d.sampling_.R = Field<std::size_t>(s, "R", dir);
  d.sampling_.nAcs = Field<std::size_t>(s, "n_acs", dir);
  d.sampling_.seed = Field<std::uint64_t>(s, "seed", dir);
  auto const acs = Field<std::vector<std::size_t>>(m, "acs", dir);
  auto const omegas = Field<std::vector<std::vector<std::size_t>>>(m, "omega", dir);
  if (omegas.size() != d.size() || Field<std::size_t>(m, "slices", dir) != d.size()) {
    throw DataError("dataset " + dir.string() + ": slice count disagrees with the mask list");
  }
  try {
    for (auto const &cols : omegas) { d.omegas_.emplace_back(d.data_.W, cols, acs); }
  } catch (ConfigError const &e) {
    throw DataError("dataset " + dir.string() + ": invalid mask: " + e.what());
  }
  return d;
}

std::vector<std::size_t> Dataset::trainIds() const
{
  std::vector<std::size_t> ids(data_.nTrain);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

std::vector<std::size_t> Dataset::testIds() const
{
  std::vector<std::size_t> ids(data_.nTest);
  std::iota(ids.begin(), ids.end(), data_.nTrain);
  return ids;
}

SliceData Dataset::load(std::size_t id) const
{
  if (id >= size()) { throw DataError("dataset: slice " + std::to_string(id) + " out of range"); }
  auto const path = dir_ / SliceFile(id);
  auto const bytes = ReadBytes(path);
  std::size_t const HW = data_.H * data_.W, C = data_.C;
  std::size_t const n = 2 * HW + 2 * 2 * C * HW;
  if (bytes.size() != 8 * n) {
    throw DataError(
      path.string() + ": expected " + std::to_string(8 * n) + " bytes, found " + std::to_string(bytes.size()));
  }
  SliceData s;
  s.id = id;
  try {
    s.image = ComplexImage(Array({2, data_.H, data_.W}, Decode(bytes, 0, 2 * HW)));
    s.coils = CoilMaps(Array({C, 2, data_.H, data_.W}, Decode(bytes, 8 * 2 * HW, 2 * C * HW)));
    s.full = KSpace(
      Array({C, 2, data_.H, data_.W}, Decode(bytes, 8 * (2 * HW + 2 * C * HW), 2 * C * HW)),
      SamplingMask::Full(data_.W));
  } catch (Error const &e) {
    throw DataError(path.string() + ": " + e.what());
  }
  s.omega = omegas_[id];
  return s;
}

std::vector<TrainingSlice> Dataset::trainingSlices() const
{
  std::vector<TrainingSlice> out;
  for (auto id : trainIds()) { out.push_back(load(id).training()); }
  return out;
}

void WriteArray(std::filesystem::path const &path, Array const &a)
{
  std::vector<char> bytes;
  io::AppendDoubles(bytes, a.values());
  WriteBytes(path, bytes);
}

Array ReadArray(std::filesystem::path const &path, ad::Shape const &shape)
{
  auto const bytes = ReadBytes(path);
  std::size_t const n = ad::NumElements(shape);
  if (bytes.size() != 8 * n) {
    throw DataError(
      path.string() + ": expected " + std::to_string(8 * n) + " bytes for shape " + ad::ShapeString(shape) +
      ", found " + std::to_string(bytes.size()));
  }
  try {
    return Array(shape, Decode(bytes, 0, n));
  } catch (Error const &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void WritePgm(std::filesystem::path const &path, ComplexImage const &image)
{
  auto const mag = image.magnitude();
  double const peak = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
  std::string header = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n65535\n";
  std::vector<char> bytes(header.begin(), header.end());
  for (double m : mag) {
    auto const v = static_cast<std::uint16_t>(peak > 0.0 ? std::lround(65535.0 * m / peak) : 0);
    bytes.push_back(static_cast<char>(v >> 8)); // PGM samples are big-endian
    bytes.push_back(static_cast<char>(v & 0xff));
  }
  WriteBytes(path, bytes);
}

} // namespace mmr
