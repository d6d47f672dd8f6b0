#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dgmn/tensor.hpp"

namespace dgmn {

template <class T>
struct AdamConfig {
  T learning_rate = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

// Adam with bias-corrected first and second moments.
template <class T>
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor<T>>> params, AdamConfig<T> cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (auto& [name, p] : params_) {
      m_.emplace_back(p.size(), T(0));
      v_.emplace_back(p.size(), T(0));
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& [name, p] = params_[i];
      if (!p.requires_grad()) continue;
      const auto& g = p.grad();
      auto& d = p.data();
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (std::isnan(g[j]))
          throw autodiff_error("NaN gradient in parameter " + name);
        m_[i][j] = cfg_.beta1 * m_[i][j] + (T(1) - cfg_.beta1) * g[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (T(1) - cfg_.beta2) * g[j] * g[j];
        const T m_hat = m_[i][j] / bc1;
        const T v_hat = v_[i][j] / bc2;
        d[j] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
      }
    }
  }

  long long steps() const { return t_; }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  std::vector<std::vector<T>> m_, v_;
  long long t_ = 0;
  AdamConfig<T> cfg_;
};

}  // namespace dgmn
