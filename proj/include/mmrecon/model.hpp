#pragma once

#include "graph.hpp"
#include "physics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mmr {

struct ModelConfig
{
  std::size_t unrolls = 10;   // T
  std::size_t cgIters = 10;   // CG iterations per data-consistency unit
  std::size_t blocks = 4;     // residual blocks B
  std::size_t features = 16;  // feature channels F
  std::size_t kernel = 3;
  bool sharedWeights = true;  // one regularizer for all unrolls
  double muInit = 0.05;

  std::size_t weightSets() const { return sharedWeights ? 1 : unrolls; }
  friend bool operator==(ModelConfig const &, ModelConfig const &) = default;
};

/// Trainable values of the unrolled network. Tensor order, per weight set:
///   in_w {F,2,k,k}, in_b {F},
///   per block: w1 {F,F,k,k}, b1 {F}, w2 {F,F,k,k}, b2 {F},
///   out_w {2,F,k,k}, out_b {2},
/// repeated for each weight set, followed by log_mu {} last.
struct ModelParams
{
  ModelConfig config;
  std::vector<ad::Array> tensors;

  /// He-normal kernels (std sqrt(2/fan_in)), zero biases, mu = muInit.
  static ModelParams Initialize(ModelConfig const &config, std::uint64_t seed);
  /// All kernels and biases zero: the regularizer is the identity map.
  static ModelParams Zeros(ModelConfig const &config);

  static std::size_t TensorsPerSet(ModelConfig const &config) { return 4 + 4 * config.blocks; }
  static std::vector<ad::Shape> Shapes(ModelConfig const &config);
  std::vector<std::string> names() const;

  double mu() const;
  std::size_t scalarCount() const;
  /// Throws ConfigError if shapes disagree with the config or mu is not positive.
  void validate() const;

  friend bool operator==(ModelParams const &, ModelParams const &) = default;
};

/// Graph handles for one weight set of the regularizer.
struct RegularizerWeights
{
  ad::Value inW, inB;
  std::vector<ad::Value> blockW1, blockB1, blockW2, blockB2;
  ad::Value outW, outB;
};

/// ModelParams placed on a graph, as parameters (training) or constants.
struct ModelHandles
{
  std::vector<ad::Value> tensors;
  std::vector<RegularizerWeights> sets;
  ad::Value logMu, mu;
};

ModelHandles PlaceParams(ad::Graph &g, ModelParams const &params, bool trainable);

/// Residual CNN on the 2-channel image: output = input + correction.
ad::Value RegularizerUnit(ad::Graph &g, ad::Value image, RegularizerWeights const &w);

/// `cgIters` conjugate-gradient steps on (E^H E + mu I) x = E^H y + mu z
/// starting from x = z. `adjointData` is E^H y. Stops early only if the
/// residual is exactly zero. If `residuals` is given, it receives the
/// residual norm before the first and after every iteration.
ad::Value DcUnit(
  ad::Graph &g,
  ad::Value z,
  ad::Value adjointData,
  CoilMaps const &coils,
  SamplingMask const &mask,
  ad::Value mu,
  std::size_t cgIters,
  std::vector<double> *residuals = nullptr);

struct UnrolledGraph
{
  ad::Value image;  // x^(T)
  ad::Value kspace; // E_full x^(T)
  std::vector<ad::Value> intermediates; // x^(0) .. x^(T)
  ModelHandles params;
};

/// x0 = E^H y; then T rounds of z = R(x), x = DC(z). `y` must already be
/// restricted to `mask`.
UnrolledGraph UnrolledForward(
  ad::Graph &g, KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, ModelParams const &params,
  bool trainable);

struct ReconResult
{
  ComplexImage image;
  KSpace kspace; // fully sampled
  std::vector<ComplexImage> intermediates;
};

ComplexImage Regularize(ComplexImage const &image, ModelParams const &params, std::size_t weightSet = 0);
ComplexImage DataConsistency(
  ComplexImage const &z, KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, double mu,
  std::size_t cgIters, std::vector<double> *residuals = nullptr);
ReconResult Reconstruct(KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, ModelParams const &params);

} // namespace mmr
