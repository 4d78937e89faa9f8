#pragma once

#include "baseline.hpp"
#include "checkpoint.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "train.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmr {

/// Every setting of a generate / train / reconstruct / evaluate run. The JSON
/// form has the sections data, sampling, model, train, baseline and eval;
/// missing keys take the defaults below and unknown keys are rejected.
struct ExperimentConfig
{
  DataSpec data;
  SamplingSpec sampling;
  std::size_t K = 1;
  double rho = 0.6;
  AcsPolicy acsPolicy = AcsPolicy::KeepAcs;
  std::uint64_t partitionSeed = 5;
  bool resampleMasks = false;
  ModelConfig model;
  double lr = 5e-4;
  std::size_t epochs = 30;
  std::size_t batchSize = 1;
  std::uint64_t initSeed = 3;
  std::uint64_t shuffleSeed = 4;
  LossWeights loss;
  CgSenseOptions baseline;
  std::string outputDir = "runs";
  std::vector<std::size_t> compareK{1, 3, 5, 7};

  /// Throws ConfigError on unknown keys, wrong types or invalid values.
  static ExperimentConfig FromJson(nlohmann::json const &j);
  /// Complete document with every default resolved.
  nlohmann::json toJson() const;
  TrainConfig trainConfig() const;
  void validate() const;
};

/// Reads a config file (ConfigError if unreadable or invalid).
nlohmann::json ReadConfigFile(std::filesystem::path const &path);
/// Applies "section.key=value" to a config document; the value is parsed as
/// JSON when possible and taken as a string otherwise.
void ApplyOverride(nlohmann::json &doc, std::string const &assignment);

/// Relative paths are placed under $MMRECON_OUTPUT_ROOT when it is set.
std::filesystem::path ResolveOutput(std::filesystem::path const &path);

/// Methods understood by CmdReconstruct.
inline constexpr char const *kMethods[] = {"unrolled", "cg-sense", "zero-filled", "reference"};

Dataset CmdGenerateData(ExperimentConfig const &cfg, std::filesystem::path const &dir);

struct TrainOutcome
{
  std::filesystem::path checkpoint; // latest checkpoint
  std::filesystem::path log;
  TrainState state;
};

/// Trains on the dataset's training split. K == 1 is conventional training
/// on Omega; K > 1 is multi-mask training. Writes config.json, train_log.csv,
/// checkpoint.bin and checkpoint_epochNNNN.bin into `outDir`. With `resume`
/// the run continues from outDir/checkpoint.bin. Throws ConfigError if the
/// dataset was generated with different data or sampling settings.
TrainOutcome CmdTrain(
  ExperimentConfig const &cfg, std::filesystem::path const &dataDir, std::filesystem::path const &outDir,
  bool resume = false, std::ostream *progress = nullptr);

/// Reconstructs every test slice with `method` and writes slice_NNNNN.bin
/// (image {2,H,W}), slice_NNNNN_kspace.bin ({C,2,H,W}), slice_NNNNN.pgm and
/// recon.json. `checkpoint` is required for "unrolled" and ignored otherwise.
/// `label` names the method in evaluation reports (defaults to `method`).
void CmdReconstruct(
  ExperimentConfig const &cfg, std::filesystem::path const &dataDir, std::string const &method,
  std::optional<std::filesystem::path> const &checkpoint, std::filesystem::path const &outDir,
  std::string label = "");

struct Evaluation
{
  std::vector<SliceMetrics> metrics;
  AggregateReport report;
};

/// Scores reconstruction directories against the clean test images and
/// writes metrics.csv, report.csv and report.txt into `outDir`. Throws
/// DataError listing any missing slices.
Evaluation CmdEvaluate(
  std::filesystem::path const &dataDir, std::vector<std::filesystem::path> const &reconDirs,
  std::filesystem::path const &outDir);

/// Full sweep: data (generated into outDir/data unless `dataDir` is given),
/// zero-filled and CG-SENSE baselines, one model per K in cfg.compareK, and a
/// combined evaluation in outDir/eval.
Evaluation CmdCompare(
  ExperimentConfig const &cfg, std::filesystem::path const &outDir,
  std::optional<std::filesystem::path> const &dataDir = std::nullopt, std::ostream *progress = nullptr);

} // namespace mmr
