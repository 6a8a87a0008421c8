#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rgt/nn/tensor.hpp"

namespace rgt::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are matched to parameters by position
// in the ParamList, which must keep the same order and shapes between steps.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t steps() const { return step_; }

  void step(const ParamList<T>& params) {
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.emplace_back(p.size(), T(0));
        second_.emplace_back(p.size(), T(0));
      }
    }
    if (first_.size() != params.size()) throw ConfigError("adam: parameter list changed between steps");
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& p = params[k];
      if (static_cast<Index>(first_[k].size()) != p.size())
        throw ConfigError("adam: shape of '" + p.name + "' changed between steps");
      T* m = first_[k].data();
      T* v = second_[k].data();
      for (Index i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
        p.value[i] = static_cast<T>(p.value[i] - update);
      }
    }
  }

  // Moment buffers, exposed for checkpointing.
  std::vector<std::vector<T>>& first_moments() { return first_; }
  std::vector<std::vector<T>>& second_moments() { return second_; }
  const std::vector<std::vector<T>>& first_moments() const { return first_; }
  const std::vector<std::vector<T>>& second_moments() const { return second_; }
  void set_steps(std::int64_t s) { step_ = s; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
};

}  // namespace rgt::nn
