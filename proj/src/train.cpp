#include "mmrecon/train.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numeric>

namespace mmr {

using ad::Array;
using ad::Graph;
using ad::Value;

namespace {

double ComplexL1(Array const &a)
{
  auto const &s = a.shape();
  std::size_t const HW = s[s.size() - 2] * s[s.size() - 1];
  std::size_t const count = a.size() / (2 * HW);
  double sum = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    double const *re = a.data() + 2 * HW * n, *im = re + HW;
    for (std::size_t p = 0; p < HW; ++p) { sum += std::hypot(re[p], im[p]); }
  }
  return sum;
}

struct RefNorms
{
  double l2, l1;
};

RefNorms CheckLossInputs(Array const &ref, Array const &pred)
{
  if (ref.shape() != pred.shape()) {
    throw ConfigError("loss_l1l2: shapes differ: " + ad::ShapeString(ref.shape()) + " vs " + ad::ShapeString(pred.shape()));
  }
  if (ref.rank() < 3 || ref.dim(ref.rank() - 3) != 2) {
    throw ShapeError("loss_l1l2: expected complex {..., 2, H, W} data, got " + ad::ShapeString(ref.shape()));
  }
  RefNorms n{ad::Norm2(ref), ComplexL1(ref)};
  if (!std::isfinite(n.l2) || !std::isfinite(n.l1)) { throw NumericalError("loss_l1l2: reference is not finite"); }
  if (!(n.l2 > 0.0) || !(n.l1 > 0.0)) { throw ConfigError("loss_l1l2: reference is zero"); }
  return n;
}

} // namespace

double LossL1L2(Array const &ref, Array const &pred, LossWeights const &w)
{
  auto const n = CheckLossInputs(ref, pred);
  Array diff = pred;
  ad::Axpy(-1.0, ref, diff);
  return w.l2 * ad::Norm2(diff) / n.l2 + w.l1 * ComplexL1(diff) / n.l1;
}

double LossL1L2(KSpace const &ref, KSpace const &pred, LossWeights const &w)
{
  return LossL1L2(ref.array(), pred.array(), w);
}

Value LossL1L2(Graph &g, Array const &ref, Value pred, LossWeights const &w)
{
  auto const n = CheckLossInputs(ref, g.value(pred));
  Value const diff = g.sub(pred, g.input(ref));
  return g.add(g.scale(g.l2norm(diff), w.l2 / n.l2), g.scale(g.l1norm(diff), w.l1 / n.l1));
}

void TrainConfig::validate() const
{
  if (K < 1) { throw ConfigError("train: K must be at least 1"); }
  if (!(rho > 0.0 && rho <= 1.0)) { throw ConfigError("train: rho must lie in (0, 1]"); }
  if (!(lr > 0.0) || !std::isfinite(lr)) { throw ConfigError("train: learning rate must be positive"); }
  if (batchSize != 1) { throw ConfigError("train: only batch size 1 is supported"); }
  if (!(loss.l2 >= 0.0 && loss.l1 >= 0.0) || loss.l2 + loss.l1 == 0.0) {
    throw ConfigError("train: loss weights must be non-negative and not both zero");
  }
  if (model.kernel % 2 == 0) { throw ConfigError("train: kernel size must be odd"); }
  if (model.cgIters < 1) { throw ConfigError("train: n_cg must be at least 1"); }
  if (model.features < 1) { throw ConfigError("train: F must be at least 1"); }
}

AdamState AdamState::For(ModelParams const &params)
{
  AdamState s;
  for (auto const &t : params.tensors) {
    s.m.emplace_back(t.shape());
    s.v.emplace_back(t.shape());
  }
  return s;
}

void AdamStep(
  std::vector<Array> &params, std::vector<Array> const &grads, AdamState &state, double lr, AdamOptions const &opt)
{
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) {
      throw ShapeError(
        "adam_step: gradient " + std::to_string(i) + " has shape " + ad::ShapeString(grads[i].shape()) +
        ", parameter has " + ad::ShapeString(params[i].shape()));
    }
  }
  ++state.t;
  double const c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  double const c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double *p = params[i].data(), *m = state.m[i].data(), *v = state.v[i].data();
    double const *g = grads[i].data();
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt.eps);
    }
  }
}

TrainState InitialState(TrainConfig const &config)
{
  config.validate();
  TrainState s;
  s.params = ModelParams::Initialize(config.model, config.initSeed);
  s.adam = AdamState::For(s.params);
  return s;
}

StepResult TrainStep(TrainingSlice const &slice, SamplingMask const &theta, TrainConfig const &config, TrainState &state)
{
  Graph g;
  auto const y = slice.reference.restrict(theta);
  auto const u = UnrolledForward(g, y, theta, slice.coils, state.params, true);
  Value const loss = LossL1L2(g, slice.reference.array(), u.kspace, config.loss);
  double const value = g.value(loss).item();
  if (!std::isfinite(value)) { throw NumericalError("non-finite loss"); }
  auto const grads = g.backward(loss);
  double sq = 0.0;
  for (auto const &gr : grads) { sq += ad::Dot(gr, gr); }
  if (!std::isfinite(sq)) { throw NumericalError("non-finite gradient"); }
  auto tensors = state.params.tensors;
  auto adam = state.adam;
  AdamStep(tensors, grads, adam, config.lr);
  for (auto const &t : tensors) {
    if (!t.allFinite()) { throw NumericalError("update produced non-finite parameters"); }
  }
  if (!(std::exp(tensors.back().item()) > 0.0) || !std::isfinite(std::exp(tensors.back().item()))) {
    throw NumericalError("update drove mu out of the positive finite range");
  }
  state.params.tensors = std::move(tensors);
  state.adam = std::move(adam);
  return {value, std::sqrt(sq)};
}

MaskFamily SliceMaskFamily(SamplingMask const &omega, std::size_t index, std::size_t epoch, TrainConfig const &config)
{
  std::uint64_t const seed = config.resampleMasks ? DeriveSeed(config.maskSeed, index, epoch + 1)
                                                  : DeriveSeed(config.maskSeed, index);
  return PartitionMasks(omega, config.K, config.rho, seed, config.acsPolicy);
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;

// Visiting order of `count` items in `epoch`.
std::vector<std::size_t> EpochOrder(std::size_t count, std::size_t epoch, std::uint64_t seed)
{
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(DeriveSeed(seed, kShuffleStream, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void CheckSlices(std::vector<TrainingSlice> const &slices, TrainConfig const &config)
{
  config.validate();
  if (slices.empty()) { throw DataError("train: no training slices"); }
  for (auto const &s : slices) {
    if (s.reference.mask().size() != s.reference.width()) {
      throw DataError("train: reference k-space must be fully sampled");
    }
    if (s.omega.width() != s.reference.width()) { throw DataError("train: mask width differs from k-space width"); }
  }
}

TrainState Resume(TrainConfig const &config, std::optional<TrainState> resume)
{
  if (!resume) { return InitialState(config); }
  if (!(resume->params.config == config.model)) { throw ConfigError("train: resumed model differs from config"); }
  resume->params.validate();
  return std::move(*resume);
}

// Runs the epoch loop; `pick(epoch, k)` maps position k of the shuffled
// order to a (slice, mask index, subset) triple.
template <typename PickFn>
TrainState Loop(
  std::vector<TrainingSlice> const &slices, TrainConfig const &config, TrainHooks const &hooks, TrainState state,
  std::size_t stepsPerEpoch, PickFn pick)
{
  auto const start = std::chrono::steady_clock::now();
  for (std::size_t epoch = state.epochsDone; epoch < config.epochs; ++epoch) {
    auto const order = EpochOrder(stepsPerEpoch, epoch, config.shuffleSeed);
    for (std::size_t k = 0; k < stepsPerEpoch; ++k) {
      auto const [i, j, theta] = pick(epoch, order[k]);
      StepResult r;
      try {
        r = TrainStep(slices[i], theta, config, state);
      } catch (NumericalError const &e) {
        throw NumericalError(
          std::string("train: ") + e.what() + " at step " + std::to_string(state.step + 1) + " (epoch " +
          std::to_string(epoch) + ", slice " + std::to_string(i) + ", mask " + std::to_string(j) + ")");
      }
      ++state.step;
      if (hooks.onStep) {
        double const wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        hooks.onStep(TrainRecord{state.step, epoch, i, j, r.loss, r.gradNorm, wall});
      }
    }
    state.epochsDone = epoch + 1;
    if (hooks.onEpoch) { hooks.onEpoch(state); }
  }
  return state;
}

struct Pick
{
  std::size_t slice, mask;
  SamplingMask const &theta;
};

} // namespace

TrainState TrainConventional(
  std::vector<TrainingSlice> const &slices, TrainConfig const &config, TrainHooks const &hooks,
  std::optional<TrainState> resume)
{
  CheckSlices(slices, config);
  return Loop(slices, config, hooks, Resume(config, std::move(resume)), slices.size(), [&](std::size_t, std::size_t i) {
    return Pick{i, 0, slices[i].omega};
  });
}

TrainState TrainMultiMask(
  std::vector<TrainingSlice> const &slices, TrainConfig const &config, TrainHooks const &hooks,
  std::optional<TrainState> resume)
{
  CheckSlices(slices, config);
  std::size_t const K = config.K;
  std::vector<MaskFamily> families;
  std::size_t familyEpoch = 0;
  auto refresh = [&](std::size_t epoch) {
    families.clear();
    for (std::size_t i = 0; i < slices.size(); ++i) {
      families.push_back(SliceMaskFamily(slices[i].omega, i, epoch, config));
    }
    familyEpoch = epoch;
  };
  TrainState state = Resume(config, std::move(resume));
  refresh(state.epochsDone);
  return Loop(slices, config, hooks, std::move(state), slices.size() * K, [&](std::size_t epoch, std::size_t pair) {
    if (config.resampleMasks && epoch != familyEpoch) { refresh(epoch); }
    std::size_t const i = pair / K, j = pair % K;
    return Pick{i, j, families[i].children[j]};
  });
}

TrainLog::TrainLog(std::filesystem::path path) : path_(std::move(path))
{
  if (!std::filesystem::exists(path_)) {
    std::ofstream out(path_);
    if (!out) { throw DataError("train log: cannot create " + path_.string()); }
    out << Header() << '\n';
  }
}

std::string TrainLog::Header() { return "step,epoch,slice,mask,loss,grad_norm,wall_time"; }

void TrainLog::append(TrainRecord const &r)
{
  std::ofstream out(path_, std::ios::app);
  if (!out) { throw DataError("train log: cannot append to " + path_.string()); }
  char buf[256];
  std::snprintf(
    buf, sizeof buf, "%zu,%zu,%zu,%zu,%.17g,%.17g,%.3f", r.step, r.epoch, r.slice, r.mask, r.loss, r.gradNorm,
    r.wallTime);
  out << buf << '\n';
}

} // namespace mmr
