#pragma once

#include "train.hpp"

#include <json.hpp>

#include <filesystem>

namespace mmr {

inline constexpr int kCheckpointVersion = 1;

/// Training state plus the run settings it was produced with. `extra` holds
/// free-form metadata (e.g. the experiment config) stored verbatim.
struct Checkpoint
{
  TrainConfig config;
  TrainState state;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json ToJson(ModelConfig const &c);
ModelConfig ModelConfigFromJson(nlohmann::json const &j);
nlohmann::json ToJson(TrainConfig const &c);
TrainConfig TrainConfigFromJson(nlohmann::json const &j);

/// File layout:
///   8 bytes  magic "MMRCKPT\0"
///   8 bytes  header length n (little-endian uint64)
///   n bytes  UTF-8 JSON header (version, configs, epoch, step, counts,
///            FNV-1a checksum of the blob)
///   blob     little-endian float64: parameter tensors in ModelParams order,
///            then Adam m, then Adam v (same order)
/// The file is written to a temporary name and renamed into place.
void SaveCheckpoint(std::filesystem::path const &path, Checkpoint const &ckpt);
/// Throws VersionError on a version mismatch and DataError on a missing,
/// truncated or corrupt file.
Checkpoint LoadCheckpoint(std::filesystem::path const &path);

} // namespace mmr
