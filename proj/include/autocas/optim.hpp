#pragma once

#include <cmath>
#include <vector>

#include "autocas/autograd.hpp"

namespace autocas::ag {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      first_.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
      second_.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
    }
  }

  /// One bias-corrected update. Parameters without a gradient are skipped.
  void step() {
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<T>(cfg_.beta1);
    const auto b2 = static_cast<T>(cfg_.beta2);
    const auto lr = static_cast<T>(cfg_.learning_rate / c1);
    const auto inv_c2 = static_cast<T>(1.0 / c2);
    const auto eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      const auto& g = p.grad();
      first_[i] = b1 * first_[i] + (T(1) - b1) * g;
      second_[i] = b2 * second_[i] + (T(1) - b2) * g.cwiseProduct(g);
      p.value_mut().array() -= lr * first_[i].array() / ((second_[i].array() * inv_c2).sqrt() + eps);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  long steps() const { return steps_; }
  const std::vector<Tensor<T>>& parameters() const { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamConfig cfg_;
  std::vector<Matrix<T>> first_;
  std::vector<Matrix<T>> second_;
  long steps_ = 0;
};

}  // namespace autocas::ag
