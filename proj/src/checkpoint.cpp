#include "mmrecon/checkpoint.hpp"
#include "mmrecon/error.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace mmr {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'M', 'M', 'R', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
T Field(json const &j, char const *key)
{
  try {
    return j.at(key).get<T>();
  } catch (json::exception const &e) {
    throw DataError(std::string("checkpoint: bad or missing field '") + key + "': " + e.what());
  }
}

} // namespace

json ToJson(ModelConfig const &c)
{
  return {
    {"T", c.unrolls},        {"n_cg", c.cgIters},
    {"B", c.blocks},         {"F", c.features},
    {"kernel", c.kernel},    {"shared_weights", c.sharedWeights},
    {"mu_init", c.muInit},
  };
}

ModelConfig ModelConfigFromJson(json const &j)
{
  ModelConfig c;
  c.unrolls = Field<std::size_t>(j, "T");
  c.cgIters = Field<std::size_t>(j, "n_cg");
  c.blocks = Field<std::size_t>(j, "B");
  c.features = Field<std::size_t>(j, "F");
  c.kernel = Field<std::size_t>(j, "kernel");
  c.sharedWeights = Field<bool>(j, "shared_weights");
  c.muInit = Field<double>(j, "mu_init");
  return c;
}

json ToJson(TrainConfig const &c)
{
  return {
    {"K", c.K},
    {"rho", c.rho},
    {"lr", c.lr},
    {"epochs", c.epochs},
    {"batch_size", c.batchSize},
    {"model", ToJson(c.model)},
    {"init_seed", c.initSeed},
    {"mask_seed", c.maskSeed},
    {"shuffle_seed", c.shuffleSeed},
    {"acs_policy", ToString(c.acsPolicy)},
    {"resample_masks", c.resampleMasks},
    {"loss_l2_weight", c.loss.l2},
    {"loss_l1_weight", c.loss.l1},
  };
}

TrainConfig TrainConfigFromJson(json const &j)
{
  TrainConfig c;
  c.K = Field<std::size_t>(j, "K");
  c.rho = Field<double>(j, "rho");
  c.lr = Field<double>(j, "lr");
  c.epochs = Field<std::size_t>(j, "epochs");
  c.batchSize = Field<std::size_t>(j, "batch_size");
  c.model = ModelConfigFromJson(Field<json>(j, "model"));
  c.initSeed = Field<std::uint64_t>(j, "init_seed");
  c.maskSeed = Field<std::uint64_t>(j, "mask_seed");
  c.shuffleSeed = Field<std::uint64_t>(j, "shuffle_seed");
  c.acsPolicy = ParseAcsPolicy(Field<std::string>(j, "acs_policy"));
  c.resampleMasks = Field<bool>(j, "resample_masks");
  c.loss.l2 = Field<double>(j, "loss_l2_weight");
  c.loss.l1 = Field<double>(j, "loss_l1_weight");
  return c;
}

void SaveCheckpoint(std::filesystem::path const &path, Checkpoint const &ckpt)
{
  auto const &s = ckpt.state;
  s.params.validate();
  if (s.adam.m.size() != s.params.tensors.size() || s.adam.v.size() != s.params.tensors.size()) {
    throw ConfigError("checkpoint: Adam state does not match the parameters");
  }
  std::vector<char> blob;
  for (auto const *group : {&s.params.tensors, &s.adam.m, &s.adam.v}) {
    for (auto const &t : *group) { io::AppendDoubles(blob, t.values()); }
  }
  json header = {
    {"format", "mmrecon-checkpoint"},
    {"version", kCheckpointVersion},
    {"model", ToJson(s.params.config)},
    {"train", ToJson(ckpt.config)},
    {"epoch", s.epochsDone},
    {"step", s.step},
    {"adam_t", s.adam.t},
    {"tensor_names", s.params.names()},
    {"blob_doubles", blob.size() / 8},
    {"checksum", io::Fnv1a(blob.data(), blob.size())},
    {"extra", ckpt.extra},
  };
  std::string const text = header.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) { throw DataError("checkpoint: cannot write " + tmp.string()); }
    out.write(kMagic, sizeof kMagic);
    io::WriteU64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out.flush()) { throw DataError("checkpoint: write failed for " + tmp.string()); }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) { throw DataError("checkpoint: cannot move " + tmp.string() + " into place: " + ec.message()); }
}

Checkpoint LoadCheckpoint(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw DataError("checkpoint: cannot open " + path.string()); }
  std::vector<char> const bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::string const where = "checkpoint " + path.string() + ": ";
  if (bytes.size() < 16 || !std::equal(kMagic, kMagic + 8, bytes.begin())) {
    throw DataError(where + "not a checkpoint file (bad magic or truncated)");
  }
  std::uint64_t headerLen;
  std::memcpy(&headerLen, bytes.data() + 8, 8);
  headerLen = io::ToLittle(headerLen);
  if (headerLen > bytes.size() - 16) { throw DataError(where + "truncated header"); }
  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(headerLen));
  } catch (json::exception const &e) {
    throw DataError(where + "corrupt header: " + e.what());
  }
  int const version = Field<int>(header, "version");
  if (version != kCheckpointVersion) {
    throw VersionError(
      where + "version " + std::to_string(version) + " is not supported (expected " +
      std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint c;
  try {
    c.config = TrainConfigFromJson(Field<json>(header, "train"));
    c.state.params = ModelParams::Zeros(ModelConfigFromJson(Field<json>(header, "model")));
  } catch (ConfigError const &e) {
    throw DataError(where + e.what());
  }
  c.state.epochsDone = Field<std::size_t>(header, "epoch");
  c.state.step = Field<std::size_t>(header, "step");
  c.state.adam = AdamState::For(c.state.params);
  c.state.adam.t = Field<std::size_t>(header, "adam_t");
  c.extra = header.contains("extra") ? header["extra"] : json::object();

  std::size_t const expected = 3 * c.state.params.scalarCount();
  std::size_t const blobBytes = bytes.size() - 16 - headerLen;
  if (Field<std::size_t>(header, "blob_doubles") != expected) {
    throw DataError(where + "parameter count disagrees with the model configuration");
  }
  if (blobBytes != expected * 8) {
    throw DataError(
      where + (blobBytes < expected * 8 ? "truncated" : "trailing bytes") + " (blob has " + std::to_string(blobBytes) +
      " bytes, expected " + std::to_string(expected * 8) + ")");
  }
  char const *blob = bytes.data() + 16 + headerLen;
  if (io::Fnv1a(blob, blobBytes) != Field<std::uint64_t>(header, "checksum")) {
    throw DataError(where + "checksum mismatch");
  }
  for (auto *group : {&c.state.params.tensors, &c.state.adam.m, &c.state.adam.v}) {
    for (auto &t : *group) {
      io::DecodeDoubles(blob, t.values());
      blob += 8 * t.size();
    }
  }
  try {
    c.state.params.validate();
  } catch (Error const &e) {
    throw DataError(where + e.what());
  }
  return c;
}

} // namespace mmr
