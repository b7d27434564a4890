#pragma once

#include "sonar/nn/tensor.hpp"

namespace sonar::nn {

// Adagrad: G += g^2; theta -= lr * g / (sqrt(G) + eps).
template <typename T>
class Adagrad {
 public:
  explicit Adagrad(double lr = 0.001, double eps = 1e-10) : lr_(lr), eps_(eps) {}

  void step(std::vector<Tensor<T>>& params) {
    if (accum_.empty()) {
      for (const auto& p : params) accum_.emplace_back(p.numel(), T(0));
    }
    if (accum_.size() != params.size()) {
      throw std::invalid_argument("Adagrad: parameter list changed size");
    }
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (p.grad().empty()) continue;
      if (accum_[i].size() != p.numel()) {
        throw std::invalid_argument("Adagrad: parameter " + std::to_string(i) +
                                    " changed shape");
      }
      auto& g = p.data()->g;
      auto& v = p.data()->v;
      auto& acc = accum_[i];
      for (size_t j = 0; j < v.size(); ++j) {
        acc[j] += g[j] * g[j];
        v[j] -= static_cast<T>(lr_ * g[j] / (std::sqrt(acc[j]) + eps_));
      }
    }
  }

  double lr() const { return lr_; }
  std::vector<std::vector<T>>& accumulators() { return accum_; }
  const std::vector<std::vector<T>>& accumulators() const { return accum_; }

 private:
  double lr_;
  double eps_;
  std::vector<std::vector<T>> accum_;
};

}  // namespace sonar::nn
