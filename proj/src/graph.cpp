#include "mmrecon/graph.hpp"
#include "mmrecon/error.hpp"
#include "mmrecon/kernels.hpp"

#include <cmath>
#include <utility>

namespace mmr::ad {

std::string_view OpName(OpKind kind)
{
  switch (kind) {
  case OpKind::Input: return "input";
  case OpKind::Parameter: return "parameter";
  case OpKind::Add: return "add";
  case OpKind::Sub: return "sub";
  case OpKind::Mul: return "mul";
  case OpKind::Scale: return "scale";
  case OpKind::ScaleBy: return "scale_by";
  case OpKind::Exp: return "exp";
  case OpKind::Div: return "div";
  case OpKind::Relu: return "relu";
  case OpKind::Conv2d: return "conv2d";
  case OpKind::BiasAdd: return "bias_add";
  case OpKind::Fft2c: return "fft2c";
  case OpKind::Ifft2c: return "ifft2c";
  case OpKind::CoilExpand: return "coil_expand";
  case OpKind::CoilCombine: return "coil_combine";
  case OpKind::CoilGram: return "coil_gram";
  case OpKind::MaskColumns: return "mask_columns";
  case OpKind::Dot: return "dot";
  case OpKind::Sum: return "sum";
  case OpKind::L2Norm: return "l2norm";
  case OpKind::L1Norm: return "l1norm";
  }
  return "unknown";
}

namespace {

struct ComplexDims
{
  std::size_t count, H, W;
};

// Leading planes, height and width of a {..., 2, H, W} array.
ComplexDims Complex(Shape const &s)
{
  std::size_t const r = s.size();
  return {NumElements(s) / (2 * s[r - 2] * s[r - 1]), s[r - 2], s[r - 1]};
}

} // namespace

Node const &Graph::node(Value v) const
{
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error("Graph: invalid node id " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Node &Graph::at(Value v) { return const_cast<Node &>(std::as_const(*this).node(v)); }

Value Graph::push(OpKind kind, std::vector<std::int32_t> inputs, Array value)
{
  Node n;
  n.id = static_cast<std::int32_t>(nodes_.size());
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.needsGrad = kind == OpKind::Parameter;
  for (auto id : n.inputs) { n.needsGrad = n.needsGrad || nodes_[static_cast<std::size_t>(id)].needsGrad; }
  nodes_.push_back(std::move(n));
  return Value{nodes_.back().id};
}

void Graph::requireSameShape(OpKind kind, Value a, Value b) const
{
  if (shape(a) != shape(b)) {
    throw ShapeError(
      std::string(OpName(kind)) + ": shape mismatch " + ShapeString(shape(a)) + " vs " + ShapeString(shape(b)));
  }
}

void Graph::requireScalar(OpKind kind, Value a) const
{
  if (!value(a).isScalar()) {
    throw ShapeError(std::string(OpName(kind)) + ": expected a scalar, got " + ShapeString(shape(a)));
  }
}

void Graph::requireComplex(OpKind kind, Value a) const
{
  auto const &s = shape(a);
  if (s.size() < 3 || s[s.size() - 3] != 2) {
    throw ShapeError(std::string(OpName(kind)) + ": expected {..., 2, H, W}, got " + ShapeString(s));
  }
}

Value Graph::input(Array value)
{
  if (!value.allFinite()) { throw NumericalError("input: non-finite value"); }
  return push(OpKind::Input, {}, std::move(value));
}

Value Graph::parameter(Array value)
{
  if (!value.allFinite()) { throw NumericalError("parameter: non-finite value"); }
  auto v = push(OpKind::Parameter, {}, std::move(value));
  parameters_.push_back(v.id);
  return v;
}

Value Graph::add(Value a, Value b)
{
  requireSameShape(OpKind::Add, a, b);
  Array out = value(a);
  Axpy(1.0, value(b), out);
  return push(OpKind::Add, {a.id, b.id}, std::move(out));
}

Value Graph::sub(Value a, Value b)
{
  requireSameShape(OpKind::Sub, a, b);
  Array out = value(a);
  Axpy(-1.0, value(b), out);
  return push(OpKind::Sub, {a.id, b.id}, std::move(out));
}

Value Graph::mul(Value a, Value b)
{
  requireSameShape(OpKind::Mul, a, b);
  Array out = value(a);
  auto const &bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) { out[i] *= bv[i]; }
  return push(OpKind::Mul, {a.id, b.id}, std::move(out));
}

Value Graph::scale(Value a, double s)
{
  Array out = value(a);
  for (auto &x : out.values()) { x *= s; }
  auto v = push(OpKind::Scale, {a.id}, std::move(out));
  at(v).scalar = s;
  return v;
}

Value Graph::scaleBy(Value a, Value s)
{
  requireScalar(OpKind::ScaleBy, s);
  Array out = value(a);
  double const f = value(s).item();
  for (auto &x : out.values()) { x *= f; }
  return push(OpKind::ScaleBy, {a.id, s.id}, std::move(out));
}

Value Graph::exp(Value a)
{
  Array out = value(a);
  for (auto &x : out.values()) { x = std::exp(x); }
  return push(OpKind::Exp, {a.id}, std::move(out));
}

Value Graph::div(Value a, Value b)
{
  requireScalar(OpKind::Div, a);
  requireScalar(OpKind::Div, b);
  double const den = value(b).item();
  if (den == 0.0) { throw NumericalError("div: division by zero"); }
  return push(OpKind::Div, {a.id, b.id}, Array::Scalar(value(a).item() / den));
}

Value Graph::relu(Value a)
{
  Array out = value(a);
  for (auto &x : out.values()) { x = x > 0.0 ? x : 0.0; }
  return push(OpKind::Relu, {a.id}, std::move(out));
}

Value Graph::conv2d(Value x, Value w)
{
  auto const &xs = shape(x);
  auto const &ws = shape(w);
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || ws[2] % 2 == 0) {
    throw ShapeError("conv2d: incompatible input " + ShapeString(xs) + " and kernel " + ShapeString(ws));
  }
  kernels::ConvDims const d{xs[0], ws[0], xs[1], xs[2], ws[2]};
  Array out({d.cout, d.H, d.W});
  kernels::ConvForward(d, value(x).data(), value(w).data(), out.data());
  return push(OpKind::Conv2d, {x.id, w.id}, std::move(out));
}

Value Graph::biasAdd(Value x, Value b)
{
  auto const &xs = shape(x);
  auto const &bs = shape(b);
  if (xs.size() != 3 || bs.size() != 1 || bs[0] != xs[0]) {
    throw ShapeError("bias_add: input " + ShapeString(xs) + " with bias " + ShapeString(bs));
  }
  Array out = value(x);
  std::size_t const HW = xs[1] * xs[2];
  for (std::size_t c = 0; c < xs[0]; ++c) {
    double const bc = value(b)[c];
    for (std::size_t p = 0; p < HW; ++p) { out[c * HW + p] += bc; }
  }
  return push(OpKind::BiasAdd, {x.id, b.id}, std::move(out));
}

Value Graph::fft2c(Value a)
{
  requireComplex(OpKind::Fft2c, a);
  Array out = value(a);
  auto const d = Complex(out.shape());
  kernels::Fft2c(out.data(), d.count, d.H, d.W);
  return push(OpKind::Fft2c, {a.id}, std::move(out));
}

Value Graph::ifft2c(Value a)
{
  requireComplex(OpKind::Ifft2c, a);
  Array out = value(a);
  auto const d = Complex(out.shape());
  kernels::Ifft2c(out.data(), d.count, d.H, d.W);
  return push(OpKind::Ifft2c, {a.id}, std::move(out));
}

Value Graph::coilExpand(Value x, std::shared_ptr<Array const> coils)
{
  auto const &xs = shape(x);
  auto const &cs = coils->shape();
  if (xs.size() != 3 || xs[0] != 2 || cs.size() != 4 || cs[1] != 2 || cs[2] != xs[1] || cs[3] != xs[2]) {
    throw ShapeError("coil_expand: image " + ShapeString(xs) + " with coils " + ShapeString(cs));
  }
  Array out(cs);
  kernels::CoilExpand(value(x).data(), coils->data(), out.data(), cs[0], cs[2] * cs[3]);
  auto v = push(OpKind::CoilExpand, {x.id}, std::move(out));
  at(v).coils = std::move(coils);
  return v;
}

Value Graph::coilCombine(Value k, std::shared_ptr<Array const> coils)
{
  auto const &ks = shape(k);
  if (ks != coils->shape() || ks.size() != 4 || ks[1] != 2) {
    throw ShapeError("coil_combine: data " + ShapeString(ks) + " with coils " + ShapeString(coils->shape()));
  }
  Array out({2, ks[2], ks[3]});
  kernels::CoilCombine(value(k).data(), coils->data(), out.data(), ks[0], ks[2] * ks[3]);
  auto v = push(OpKind::CoilCombine, {k.id}, std::move(out));
  at(v).coils = std::move(coils);
  return v;
}

Value Graph::coilGram(Value x, std::shared_ptr<Array const> coils, std::shared_ptr<ColumnMask const> keep)
{
  auto const &xs = shape(x);
  auto const &cs = coils->shape();
  if (xs.size() != 3 || xs[0] != 2 || cs.size() != 4 || cs[1] != 2 || cs[2] != xs[1] || cs[3] != xs[2] ||
      keep->size() != xs[2]) {
    throw ShapeError(
      "coil_gram: image " + ShapeString(xs) + " with coils " + ShapeString(cs) + " and mask width " +
      std::to_string(keep->size()));
  }
  Array out(xs);
  kernels::CoilGram(value(x).data(), coils->data(), *keep, out.data(), cs[0], xs[1], xs[2]);
  auto v = push(OpKind::CoilGram, {x.id}, std::move(out));
  at(v).coils = std::move(coils);
  at(v).mask = std::move(keep);
  return v;
}

Value Graph::maskColumns(Value a, std::shared_ptr<ColumnMask const> keep)
{
  auto const &s = shape(a);
  if (s.size() < 2 || keep->size() != s.back()) {
    throw ShapeError(
      "mask_columns: mask of width " + std::to_string(keep->size()) + " for " + ShapeString(s));
  }
  Array out = value(a);
  std::size_t const W = s.back(), H = s[s.size() - 2];
  kernels::MaskColumns(out.data(), out.size() / (H * W), H, W, *keep);
  auto v = push(OpKind::MaskColumns, {a.id}, std::move(out));
  at(v).mask = std::move(keep);
  return v;
}

Value Graph::dot(Value a, Value b)
{
  requireSameShape(OpKind::Dot, a, b);
  return push(OpKind::Dot, {a.id, b.id}, Array::Scalar(Dot(value(a), value(b))));
}

Value Graph::sum(Value a)
{
  double s = 0.0;
  for (double x : value(a).values()) { s += x; }
  return push(OpKind::Sum, {a.id}, Array::Scalar(s));
}

Value Graph::l2norm(Value a) { return push(OpKind::L2Norm, {a.id}, Array::Scalar(Norm2(value(a)))); }

Value Graph::l1norm(Value a)
{
  requireComplex(OpKind::L1Norm, a);
  auto const &v = value(a);
  auto const d = Complex(v.shape());
  std::size_t const HW = d.H * d.W;
  double s = 0.0;
  for (std::size_t n = 0; n < d.count; ++n) {
    double const *re = v.data() + 2 * HW * n, *im = re + HW;
    for (std::size_t p = 0; p < HW; ++p) { s += std::hypot(re[p], im[p]); }
  }
  return push(OpKind::L1Norm, {a.id}, Array::Scalar(s));
}

Array Graph::grad(Value v) const
{
  auto const &n = node(v);
  auto const &g = grads_.size() > static_cast<std::size_t>(v.id) ? grads_[static_cast<std::size_t>(v.id)] : Array{};
  if (g.size() == n.value.size() && g.shape() == n.value.shape()) { return g; }
  return Array(n.value.shape());
}

std::vector<Array> Graph::backward(Value loss)
{
  auto const &ln = node(loss);
  if (!ln.value.isScalar()) {
    throw ShapeError("backward: loss must be a scalar, got " + ShapeString(ln.value.shape()));
  }
  grads_.assign(nodes_.size(), Array{});
  grads_[static_cast<std::size_t>(loss.id)] = Array::Scalar(1.0);

  auto wants = [&](std::int32_t id) { return nodes_[static_cast<std::size_t>(id)].needsGrad; };
  // Adds a contribution to an input's gradient, taking ownership when it is
  // the first one.
  auto accumulate = [&](std::int32_t id, Array contribution) {
    auto &slot = grads_[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
      slot = std::move(contribution);
    } else {
      Axpy(1.0, contribution, slot);
    }
  };
  // Zero-initialized gradient buffer for kernels that accumulate in place.
  auto buffer = [&](std::int32_t id) -> Array & {
    auto &slot = grads_[static_cast<std::size_t>(id)];
    if (slot.size() == 0) { slot = Array(nodes_[static_cast<std::size_t>(id)].value.shape()); }
    return slot;
  };
  auto scaled = [](Array a, double s) {
    for (auto &v : a.values()) { v *= s; }
    return a;
  };

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node const &n = *it;
    auto const self = static_cast<std::size_t>(n.id);
    if (!n.needsGrad || grads_[self].size() == 0) { continue; }
    if (n.kind == OpKind::Parameter) { continue; }
    Array g = std::move(grads_[self]);
    auto in = [&](std::size_t k) -> Array const & { return nodes_[static_cast<std::size_t>(n.inputs[k])].value; };
    std::int32_t const a = n.inputs.empty() ? -1 : n.inputs[0];
    std::int32_t const b = n.inputs.size() > 1 ? n.inputs[1] : -1;

    switch (n.kind) {
    case OpKind::Input:
    case OpKind::Parameter: break;
    case OpKind::Add:
      if (wants(b)) { accumulate(b, g); }
      if (wants(a)) { accumulate(a, std::move(g)); }
      break;
    case OpKind::Sub:
      if (wants(b)) { accumulate(b, scaled(g, -1.0)); }
      if (wants(a)) { accumulate(a, std::move(g)); }
      break;
    case OpKind::Mul:
      if (wants(a)) {
        Array t = g;
        for (std::size_t i = 0; i < t.size(); ++i) { t[i] *= in(1)[i]; }
        accumulate(a, std::move(t));
      }
      if (wants(b)) {
        for (std::size_t i = 0; i < g.size(); ++i) { g[i] *= in(0)[i]; }
        accumulate(b, std::move(g));
      }
      break;
    case OpKind::Scale:
      if (wants(a)) { accumulate(a, scaled(std::move(g), n.scalar)); }
      break;
    case OpKind::ScaleBy:
      if (wants(b)) { accumulate(b, Array::Scalar(Dot(g, in(0)))); }
      if (wants(a)) { accumulate(a, scaled(std::move(g), in(1).item())); }
      break;
    case OpKind::Exp:
      if (wants(a)) {
        for (std::size_t i = 0; i < g.size(); ++i) { g[i] *= n.value[i]; }
        accumulate(a, std::move(g));
      }
      break;
    case OpKind::Div: {
      double const num = in(0).item(), den = in(1).item();
      if (wants(a)) { accumulate(a, Array::Scalar(g[0] / den)); }
      if (wants(b)) { accumulate(b, Array::Scalar(-g[0] * num / (den * den))); }
      break;
    }
    case OpKind::Relu:
      if (wants(a)) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!(in(0)[i] > 0.0)) { g[i] = 0.0; }
        }
        accumulate(a, std::move(g));
      }
      break;
    case OpKind::Conv2d: {
      auto const &xs = in(0).shape();
      auto const &ws = in(1).shape();
      kernels::ConvDims const d{xs[0], ws[0], xs[1], xs[2], ws[2]};
      if (wants(a)) { kernels::ConvBackwardInput(d, g.data(), in(1).data(), buffer(a).data()); }
      if (wants(b)) { kernels::ConvBackwardWeight(d, g.data(), in(0).data(), buffer(b).data()); }
      break;
    }
    case OpKind::BiasAdd: {
      if (wants(b)) {
        std::size_t const C = g.dim(0), HW = g.size() / C;
        Array gb({C});
        for (std::size_t c = 0; c < C; ++c) {
          double s = 0.0;
          for (std::size_t p = 0; p < HW; ++p) { s += g[c * HW + p]; }
          gb[c] = s;
        }
        accumulate(b, std::move(gb));
      }
      if (wants(a)) { accumulate(a, std::move(g)); }
      break;
    }
    case OpKind::Fft2c:
    case OpKind::Ifft2c:
      if (wants(a)) {
        // Unitary transforms: the adjoint is the inverse.
        auto const d = Complex(g.shape());
        if (n.kind == OpKind::Fft2c) {
          kernels::Ifft2c(g.data(), d.count, d.H, d.W);
        } else {
          kernels::Fft2c(g.data(), d.count, d.H, d.W);
        }
        accumulate(a, std::move(g));
      }
      break;
    case OpKind::CoilExpand:
      if (wants(a)) {
        auto const &cs = n.coils->shape();
        Array t({2, cs[2], cs[3]});
        kernels::CoilCombine(g.data(), n.coils->data(), t.data(), cs[0], cs[2] * cs[3]);
        accumulate(a, std::move(t));
      }
      break;
    case OpKind::CoilCombine:
      if (wants(a)) {
        auto const &cs = n.coils->shape();
        Array t(cs);
        kernels::CoilExpand(g.data(), n.coils->data(), t.data(), cs[0], cs[2] * cs[3]);
        accumulate(a, std::move(t));
      }
      break;
    case OpKind::CoilGram:
      if (wants(a)) {
        auto const &cs = n.coils->shape();
        Array t(g.shape());
        kernels::CoilGram(g.data(), n.coils->data(), *n.mask, t.data(), cs[0], cs[2], cs[3]);
        accumulate(a, std::move(t));
      }
      break;
    case OpKind::MaskColumns:
      if (wants(a)) {
        auto const &s = g.shape();
        std::size_t const W = s.back(), H = s[s.size() - 2];
        kernels::MaskColumns(g.data(), g.size() / (H * W), H, W, *n.mask);
        accumulate(a, std::move(g));
      }
      break;
    case OpKind::Dot:
      if (wants(a)) { accumulate(a, scaled(in(1), g[0])); }
      if (wants(b)) { accumulate(b, scaled(in(0), g[0])); }
      break;
    case OpKind::Sum:
      if (wants(a)) { accumulate(a, Array::Full(in(0).shape(), g[0])); }
      break;
    case OpKind::L2Norm:
      if (wants(a)) {
        double const norm = n.value.item();
        accumulate(a, norm > 0.0 ? scaled(in(0), g[0] / norm) : Array(in(0).shape()));
      }
      break;
    case OpKind::L1Norm:
      if (wants(a)) {
        Array t(in(0).shape());
        auto const d = Complex(t.shape());
        std::size_t const HW = d.H * d.W;
        for (std::size_t c = 0; c < d.count; ++c) {
          double const *re = in(0).data() + 2 * HW * c, *im = re + HW;
          double *gre = t.data() + 2 * HW * c, *gim = gre + HW;
          for (std::size_t p = 0; p < HW; ++p) {
            double const m = std::hypot(re[p], im[p]);
            if (m > 0.0) {
              gre[p] = g[0] * re[p] / m;
              gim[p] = g[0] * im[p] / m;
            }
          }
        }
        accumulate(a, std::move(t));
      }
      break;
    }
  }

  std::vector<Array> out;
  out.reserve(parameters_.size());
  for (auto id : parameters_) { out.push_back(grad(Value{id})); }
  return out;
}

} // namespace mmr::ad
