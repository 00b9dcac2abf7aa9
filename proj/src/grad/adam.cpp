#include "secant/grad/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace secant::grad {

template <typename T>
Adam<T>::Adam(ParameterSet<T> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& [_, t] : params_) {
    m_.emplace_back(t.numel(), T(0));
    v_.emplace_back(t.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& [name, t] : params_) {
    if (!t.has_grad()) throw std::logic_error("adam: parameter '" + name + "' has no gradient");
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  std::size_t k = 0;
  for (auto& [_, t] : params_) {
    auto data = t.data();
    auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      data[i] = static_cast<T>(data[i] - update);
      grad[i] = T(0);
    }
    ++k;
  }
  ++tape_counters().parameter_writes;
}

template <typename T>
void Adam<T>::load_state(std::uint64_t step, std::vector<std::vector<T>> m,
                         std::vector<std::vector<T>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw std::invalid_argument("adam: state has wrong parameter count");
  }
  for (std::size_t k = 0; k < m_.size(); ++k) {
    if (m[k].size() != m_[k].size() || v[k].size() != v_[k].size()) {
      throw std::invalid_argument("adam: moment shape mismatch at parameter " + std::to_string(k));
    }
  }
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace secant::grad
