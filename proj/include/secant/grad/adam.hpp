#pragma once

#include <cstdint>
#include <vector>

#include "secant/grad/parameters.hpp"

namespace secant::grad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a parameter set. The optimizer shares storage with
/// the set it was built from; step() writes in place and zeroes the grads.
template <typename T>
class Adam {
 public:
  Adam(ParameterSet<T> params, AdamConfig config = {});

  /// Throws std::logic_error if any parameter has no grad buffer.
  void step();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  /// Restores serialized state; moment shapes must match the parameters.
  void load_state(std::uint64_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  ParameterSet<T> params_;
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace secant::grad
