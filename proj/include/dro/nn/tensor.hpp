#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dro/common.hpp"

namespace dro::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major double tensor.
struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  bool empty() const { return values.empty(); }
  /// Last dimension; the tensor is viewed as rows() x cols() by row-wise ops.
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }
  static Tensor randn(Shape s, Rng& rng, double stddev);

  bool operator==(const Tensor&) const = default;
};

}  // namespace dro::nn
