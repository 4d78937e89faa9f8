#include "mmrecon/array.hpp"
#include "mmrecon/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace mmr::ad {

std::size_t NumElements(Shape const &shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string ShapeString(Shape const &shape)
{
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) { s += ", "; }
    s += std::to_string(shape[i]);
  }
  return s + "}";
}

Array::Array(Shape shape)
  : shape_(std::move(shape))
  , data_(NumElements(shape_), 0.0)
{
}

Array::Array(Shape shape, std::vector<double> data)
  : shape_(std::move(shape))
  , data_(std::move(data))
{
  if (NumElements(shape_) != data_.size()) {
    throw ShapeError(
      "Array: shape " + ShapeString(shape_) + " holds " + std::to_string(NumElements(shape_)) +
      " values but " + std::to_string(data_.size()) + " were given");
  }
  if (!allFinite()) { throw NumericalError("Array: non-finite value in " + ShapeString(shape_)); }
}

Array Array::Scalar(double value) { return Array({}, {value}); }

Array Array::Full(Shape shape, double value)
{
  Array a(std::move(shape));
  a.fill(value);
  return a;
}

double Array::item() const
{
  if (data_.size() != 1) { throw ShapeError("Array::item on non-scalar " + ShapeString(shape_)); }
  return data_[0];
}

bool Array::allFinite() const
{
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Array::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Dot(Array const &a, Array const &b)
{
  if (a.size() != b.size()) {
    throw ShapeError("Dot: " + ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { s += a[i] * b[i]; }
  return s;
}

double Norm2(Array const &a) { return std::sqrt(Dot(a, a)); }

void Axpy(double alpha, Array const &x, Array &y)
{
  if (x.size() != y.size()) {
    throw ShapeError("Axpy: " + ShapeString(x.shape()) + " vs " + ShapeString(y.shape()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) { y[i] += alpha * x[i]; }
}

} // namespace mmr::ad
