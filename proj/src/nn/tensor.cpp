#include "dro/nn/tensor.hpp"

#include <numeric>
#include <random>

namespace dro::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(numel(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (numel(shape) != values.size())
    throw InputError("tensor shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
}

Tensor Tensor::randn(Shape s, Rng& rng, double stddev) {
  Tensor t(std::move(s));
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : t.values) v = normal(rng);
  return t;
}

}  // namespace dro::nn
