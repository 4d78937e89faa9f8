#include "mmrecon/model.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/rng.hpp"

#include <cmath>

namespace mmr {

using ad::Array;
using ad::Graph;
using ad::Value;

std::vector<ad::Shape> ModelParams::Shapes(ModelConfig const &c)
{
  std::size_t const F = c.features, k = c.kernel;
  std::vector<ad::Shape> shapes;
  for (std::size_t s = 0; s < c.weightSets(); ++s) {
    shapes.push_back({F, 2, k, k});
    shapes.push_back({F});
    for (std::size_t b = 0; b < c.blocks; ++b) {
      shapes.push_back({F, F, k, k});
      shapes.push_back({F});
      shapes.push_back({F, F, k, k});
      shapes.push_back({F});
    }
    shapes.push_back({2, F, k, k});
    shapes.push_back({2});
  }
  shapes.push_back({});
  return shapes;
}

std::vector<std::string> ModelParams::names() const
{
  std::vector<std::string> out;
  for (std::size_t s = 0; s < config.weightSets(); ++s) {
    std::string const p = "set" + std::to_string(s) + ".";
    out.push_back(p + "in_w");
    out.push_back(p + "in_b");
    for (std::size_t b = 0; b < config.blocks; ++b) {
      std::string const q = p + "block" + std::to_string(b) + ".";
      out.push_back(q + "w1");
      out.push_back(q + "b1");
      out.push_back(q + "w2");
      out.push_back(q + "b2");
    }
    out.push_back(p + "out_w");
    out.push_back(p + "out_b");
  }
  out.push_back("log_mu");
  return out;
}

ModelParams ModelParams::Zeros(ModelConfig const &config)
{
  if (!(config.muInit > 0.0)) { throw ConfigError("model: initial mu must be positive"); }
  ModelParams p{config, {}};
  for (auto const &shape : Shapes(config)) { p.tensors.emplace_back(shape); }
  p.tensors.back() = Array::Scalar(std::log(config.muInit));
  return p;
}

ModelParams ModelParams::Initialize(ModelConfig const &config, std::uint64_t seed)
{
  ModelParams p = Zeros(config);
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < p.tensors.size(); ++i) {
    auto &t = p.tensors[i];
    if (t.rank() != 4) { continue; }
    double const fanIn = static_cast<double>(t.dim(1) * t.dim(2) * t.dim(3));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fanIn));
    for (auto &v : t.values()) { v = normal(rng); }
  }
  return p;
}

double ModelParams::mu() const { return std::exp(tensors.back().item()); }

std::size_t ModelParams::scalarCount() const
{
  std::size_t n = 0;
  for (auto const &t : tensors) { n += t.size(); }
  return n;
}

void ModelParams::validate() const
{
  auto const shapes = Shapes(config);
  if (shapes.size() != tensors.size()) {
    throw ConfigError(
      "model: expected " + std::to_string(shapes.size()) + " tensors, got " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (tensors[i].shape() != shapes[i]) {
      throw ConfigError(
        "model: tensor " + std::to_string(i) + " has shape " + ad::ShapeString(tensors[i].shape()) + ", expected " +
        ad::ShapeString(shapes[i]));
    }
    if (!tensors[i].allFinite()) { throw NumericalError("model: non-finite value in tensor " + std::to_string(i)); }
  }
  if (!(mu() > 0.0)) { throw ConfigError("model: mu must be positive"); }
}

ModelHandles PlaceParams(Graph &g, ModelParams const &params, bool trainable)
{
  params.validate();
  ModelHandles h;
  for (auto const &t : params.tensors) { h.tensors.push_back(trainable ? g.parameter(t) : g.input(t)); }
  std::size_t i = 0;
  for (std::size_t s = 0; s < params.config.weightSets(); ++s) {
    RegularizerWeights w;
    w.inW = h.tensors[i++];
    w.inB = h.tensors[i++];
    for (std::size_t b = 0; b < params.config.blocks; ++b) {
      w.blockW1.push_back(h.tensors[i++]);
      w.blockB1.push_back(h.tensors[i++]);
      w.blockW2.push_back(h.tensors[i++]);
      w.blockB2.push_back(h.tensors[i++]);
    }
    w.outW = h.tensors[i++];
    w.outB = h.tensors[i++];
    h.sets.push_back(std::move(w));
  }
  h.logMu = h.tensors[i];
  h.mu = g.exp(h.logMu);
  return h;
}

Value RegularizerUnit(Graph &g, Value image, RegularizerWeights const &w)
{
  auto const &s = g.shape(image);
  if (s.size() != 3 || s[0] != 2) { throw ShapeError("regularizer: expected {2, H, W}, got " + ad::ShapeString(s)); }
  Value h = g.biasAdd(g.conv2d(image, w.inW), w.inB);
  for (std::size_t b = 0; b < w.blockW1.size(); ++b) {
    Value t = g.relu(g.biasAdd(g.conv2d(h, w.blockW1[b]), w.blockB1[b]));
    t = g.biasAdd(g.conv2d(t, w.blockW2[b]), w.blockB2[b]);
    h = g.add(h, g.scale(t, 0.1));
  }
  Value correction = g.biasAdd(g.conv2d(h, w.outW), w.outB);
  return g.add(image, correction);
}

Value DcUnit(
  Graph &g,
  Value z,
  Value adjointData,
  CoilMaps const &coils,
  SamplingMask const &mask,
  Value mu,
  std::size_t cgIters,
  std::vector<double> *residuals)
{
  if (!(g.value(mu).item() > 0.0)) { throw ConfigError("dc_unit: mu must be positive"); }
  if (cgIters < 1) { throw ConfigError("dc_unit: at least one CG iteration is required"); }
  auto normal = [&](Value v) { return g.add(EncodeNormal(g, v, coils, mask), g.scaleBy(v, mu)); };

  Value const rhs = g.add(adjointData, g.scaleBy(z, mu));
  Value x = z;
  Value r = g.sub(rhs, normal(x));
  Value p = r;
  Value rs = g.dot(r, r);
  if (residuals) { residuals->push_back(std::sqrt(g.value(rs).item())); }
  for (std::size_t it = 0; it < cgIters; ++it) {
    if (g.value(rs).item() == 0.0) { break; }
    Value const ap = normal(p);
    Value const alpha = g.div(rs, g.dot(p, ap));
    x = g.add(x, g.scaleBy(p, alpha));
    r = g.sub(r, g.scaleBy(ap, alpha));
    Value const rsNext = g.dot(r, r);
    if (residuals) { residuals->push_back(std::sqrt(g.value(rsNext).item())); }
    if (it + 1 < cgIters) { p = g.add(r, g.scaleBy(p, g.div(rsNext, rs))); }
    rs = rsNext;
  }
  return x;
}

UnrolledGraph UnrolledForward(
  Graph &g, KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, ModelParams const &params,
  bool trainable)
{
  if (y.coils() != coils.coils() || y.height() != coils.height() || y.width() != coils.width() ||
      mask.width() != y.width()) {
    throw ShapeError("unrolled_forward: k-space, coil maps and mask disagree in size");
  }
  UnrolledGraph out;
  out.params = PlaceParams(g, params, trainable);
  Value const data = g.input(y.array());
  Value const adjoint = EncodeAdjoint(g, data, coils, mask);
  Value x = adjoint;
  out.intermediates.push_back(x);
  for (std::size_t i = 0; i < params.config.unrolls; ++i) {
    auto const &w = out.params.sets[params.config.sharedWeights ? 0 : i];
    Value const z = RegularizerUnit(g, x, w);
    x = DcUnit(g, z, adjoint, coils, mask, out.params.mu, params.config.cgIters);
    out.intermediates.push_back(x);
  }
  out.image = x;
  out.kspace = g.fft2c(g.coilExpand(x, coils.shared()));
  return out;
}

ComplexImage Regularize(ComplexImage const &image, ModelParams const &params, std::size_t weightSet)
{
  Graph g;
  auto h = PlaceParams(g, params, false);
  return ComplexImage(g.value(RegularizerUnit(g, g.input(image.array()), h.sets.at(weightSet))));
}

ComplexImage DataConsistency(
  ComplexImage const &z, KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, double mu,
  std::size_t cgIters, std::vector<double> *residuals)
{
  if (!(mu > 0.0)) { throw ConfigError("dc_unit: mu must be positive"); }
  Graph g;
  Value const adjoint = g.input(ApplyEH(y, coils, mask).array());
  Value const x = DcUnit(g, g.input(z.array()), adjoint, coils, mask, g.input(Array::Scalar(mu)), cgIters, residuals);
  return ComplexImage(g.value(x));
}

ReconResult Reconstruct(KSpace const &y, SamplingMask const &mask, CoilMaps const &coils, ModelParams const &params)
{
  Graph g;
  auto const u = UnrolledForward(g, y, mask, coils, params, false);
  ReconResult r{ComplexImage(g.value(u.image)), KSpace(g.value(u.kspace), SamplingMask::Full(y.width())), {}};
  for (auto v : u.intermediates) { r.intermediates.emplace_back(g.value(v)); }
  return r;
}

} // namespace mmr
