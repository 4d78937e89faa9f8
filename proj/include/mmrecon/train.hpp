#pragma once

#include "model.hpp"
#include "physics.hpp"
#include "sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mmr {

struct LossWeights
{
  double l2 = 1.0;
  double l1 = 1.0;
  friend bool operator==(LossWeights const &, LossWeights const &) = default;
};

/// w.l2 * |u - v|_2 / |u|_2 + w.l1 * |u - v|_1 / |u|_1 over all complex
/// entries, with the complex modulus inside the l1 norm. Throws ConfigError if
/// the shapes differ or u is zero.
double LossL1L2(KSpace const &ref, KSpace const &pred, LossWeights const &w = {});
double LossL1L2(ad::Array const &ref, ad::Array const &pred, LossWeights const &w = {});
/// Graph version; `ref` is a constant.
ad::Value LossL1L2(ad::Graph &g, ad::Array const &ref, ad::Value pred, LossWeights const &w = {});

struct TrainConfig
{
  std::size_t K = 1;
  double rho = 1.0;
  double lr = 5e-4;
  std::size_t epochs = 30;
  std::size_t batchSize = 1; // only 1 is supported
  ModelConfig model;
  std::uint64_t initSeed = 3;
  std::uint64_t maskSeed = 2;
  std::uint64_t shuffleSeed = 4;
  AcsPolicy acsPolicy = AcsPolicy::KeepAcs;
  bool resampleMasks = false; // draw fresh subsets every epoch
  LossWeights loss;

  /// Throws ConfigError on K == 0, rho outside (0, 1], lr <= 0, batch size
  /// other than 1.
  void validate() const;
  friend bool operator==(TrainConfig const &, TrainConfig const &) = default;
};

struct TrainRecord
{
  std::size_t step = 0; // global, 1-based
  std::size_t epoch = 0; // 0-based
  std::size_t slice = 0;
  std::size_t mask = 0;
  double loss = 0.0;
  double gradNorm = 0.0;
  double wallTime = 0.0; // seconds since the start of this run
};

/// One training example: fully sampled reference k-space, coils and the
/// acquisition mask Omega.
struct TrainingSlice
{
  KSpace reference;
  CoilMaps coils;
  SamplingMask omega;
};

struct AdamState
{
  std::size_t t = 0;
  std::vector<ad::Array> m, v;

  static AdamState For(ModelParams const &params);
  friend bool operator==(AdamState const &, AdamState const &) = default;
};

struct AdamOptions
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `params` in place.
void AdamStep(
  std::vector<ad::Array> &params, std::vector<ad::Array> const &grads, AdamState &state, double lr,
  AdamOptions const &opt = {});

/// Everything needed to continue a run exactly where it stopped.
struct TrainState
{
  ModelParams params;
  AdamState adam;
  std::size_t epochsDone = 0;
  std::size_t step = 0;
};

struct TrainHooks
{
  std::function<void(TrainRecord const &)> onStep;
  /// Called after every completed epoch (e.g. to write a checkpoint).
  std::function<void(TrainState const &)> onEpoch;
};

struct StepResult
{
  double loss;
  double gradNorm;
};

/// Forward on (y restricted to `theta`), loss against the full reference,
/// backward and one Adam update. Throws NumericalError on a non-finite loss
/// or gradient, leaving the state untouched.
StepResult TrainStep(TrainingSlice const &slice, SamplingMask const &theta, TrainConfig const &config, TrainState &state);

/// Fresh state: initialized parameters and zero Adam moments.
TrainState InitialState(TrainConfig const &config);

/// Supervised training on Omega itself: one step per slice per epoch.
TrainState TrainConventional(
  std::vector<TrainingSlice> const &slices, TrainConfig const &config, TrainHooks const &hooks = {},
  std::optional<TrainState> resume = std::nullopt);

/// Multi-mask training: every slice gets K subsets of Omega and each (slice,
/// subset) pair is one step per epoch, visited in a seeded shuffled order.
TrainState TrainMultiMask(
  std::vector<TrainingSlice> const &slices, TrainConfig const &config, TrainHooks const &hooks = {},
  std::optional<TrainState> resume = std::nullopt);

/// The K subsets used for slice `index` during `epoch` (epoch only matters
/// when resampleMasks is set).
MaskFamily SliceMaskFamily(SamplingMask const &omega, std::size_t index, std::size_t epoch, TrainConfig const &config);

/// Appends TrainRecords to a CSV file (header written when the file is new).
class TrainLog
{
public:
  explicit TrainLog(std::filesystem::path path);
  void append(TrainRecord const &r);
  static std::string Header();

private:
  std::filesystem::path path_;
};

} // namespace mmr
