#pragma once

#include "sonar/common.hpp"
#include "sonar/nn/tensor.hpp"

namespace sonar::nn {

// Kaiming-uniform fan-in: bound = sqrt(6 / fan_in), the ReLU-gain variant.
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("kaiming_uniform: fan_in == 0");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(shape_numel(shape));
  for (T& x : v) x = static_cast<T>(rand_range(rng, -bound, bound));
  return Tensor<T>::from_values(std::move(shape), std::move(v));
}

}  // namespace sonar::nn
