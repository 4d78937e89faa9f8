#pragma once

#include "array.hpp"

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace mmr::ad {

enum class OpKind : std::uint8_t
{
  Input,
  Parameter,
  Add,
  Sub,
  Mul,
  Scale,
  ScaleBy,
  Exp,
  Div,
  Relu,
  Conv2d,
  BiasAdd,
  Fft2c,
  Ifft2c,
  CoilExpand,
  CoilCombine,
  CoilGram,
  MaskColumns,
  Dot,
  Sum,
  L2Norm,
  L1Norm,
};

std::string_view OpName(OpKind kind);

using ColumnMask = std::vector<std::uint8_t>;

struct Node
{
  std::int32_t id;
  OpKind kind;
  std::vector<std::int32_t> inputs;
  Array value;
  bool needsGrad = false;
  double scalar = 0.0;
  std::shared_ptr<Array const> coils;
  std::shared_ptr<ColumnMask const> mask;
};

/// Handle to a node of a Graph.
struct Value
{
  std::int32_t id = -1;
};

/// Tape of primitive operations with eager forward evaluation and a
/// reverse-mode backward pass. Nodes are appended in evaluation order, so the
/// node list is a topological order by construction.
///
/// Complex-valued ops expect the planar layout {..., 2, H, W}.
class Graph
{
public:
  Value input(Array value);
  Value parameter(Array value);

  Array const &value(Value v) const { return node(v).value; }
  Shape const &shape(Value v) const { return node(v).value.shape(); }
  Node const &node(Value v) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameterCount() const { return parameters_.size(); }

  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double s);
  /// Multiplies every element of `a` by the scalar node `s`.
  Value scaleBy(Value a, Value s);
  Value exp(Value a);
  /// Scalar division a / b.
  Value div(Value a, Value b);
  Value relu(Value a);
  /// x: {Cin, H, W}, w: {Cout, Cin, k, k} with odd k; "same" zero padding.
  Value conv2d(Value x, Value w);
  /// x: {C, H, W}, b: {C}.
  Value biasAdd(Value x, Value b);
  Value fft2c(Value a);
  Value ifft2c(Value a);
  /// Complex multiply of an image {2, H, W} by every coil map {C, 2, H, W}.
  Value coilExpand(Value x, std::shared_ptr<Array const> coils);
  /// Conjugate multiply by the coil maps, summed over coils: {C,2,H,W} -> {2,H,W}.
  Value coilCombine(Value k, std::shared_ptr<Array const> coils);
  /// Fused, self-adjoint E^H E: sum_c conj(S_c) IFFT2(mask * FFT2(S_c x)).
  Value coilGram(Value x, std::shared_ptr<Array const> coils, std::shared_ptr<ColumnMask const> keep);
  /// Zeroes the unsampled columns (last axis) of every plane.
  Value maskColumns(Value a, std::shared_ptr<ColumnMask const> keep);
  Value dot(Value a, Value b);
  Value sum(Value a);
  Value l2norm(Value a);
  /// Sum of complex moduli over all complex entries.
  Value l1norm(Value a);

  /// Reverse pass from a scalar node. Returns d(loss)/d(parameter) for every
  /// parameter, in registration order; unreachable parameters get zeros.
  std::vector<Array> backward(Value loss);

  /// Gradient of a parameter node after the last backward(); zeros if the
  /// parameter was unreachable. Intermediate gradients are released during
  /// the reverse pass.
  Array grad(Value v) const;

private:
  Value push(OpKind kind, std::vector<std::int32_t> inputs, Array value);
  Node &at(Value v);
  void requireSameShape(OpKind kind, Value a, Value b) const;
  void requireScalar(OpKind kind, Value a) const;
  void requireComplex(OpKind kind, Value a) const;

  std::vector<Node> nodes_;
  std::vector<std::int32_t> parameters_;
  std::vector<Array> grads_;
};

} // namespace mmr::ad
