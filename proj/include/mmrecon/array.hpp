#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mmr::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(Shape const &shape);
std::string ShapeString(Shape const &shape);

/// Dense row-major array of doubles. Complex data is stored as two real
/// planes (real then imaginary) along the second-to-last-but-one axis, e.g.
/// an image is {2, H, W} and multi-coil data is {C, 2, H, W}.
class Array
{
public:
  Array() = default;
  explicit Array(Shape shape);
  /// Throws ShapeError if the data length does not match the shape, and
  /// NumericalError if any value is NaN or infinite.
  Array(Shape shape, std::vector<double> data);

  static Array Scalar(double value);
  static Array Full(Shape shape, double value);

  Shape const &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool isScalar() const { return data_.size() == 1 && shape_.empty(); }

  double *data() { return data_.data(); }
  double const *data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<double const> values() const { return data_; }
  std::vector<double> const &vector() const { return data_; }

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Value of a scalar array.
  double item() const;

  bool allFinite() const;
  void fill(double value);

  friend bool operator==(Array const &a, Array const &b) = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

// Helpers on raw arrays used by both the graph kernels and the plain APIs.
double Dot(Array const &a, Array const &b);
double Norm2(Array const &a);
void Axpy(double alpha, Array const &x, Array &y); // y += alpha * x

} // namespace mmr::ad
