#pragma once

#include <string>
#include <vector>

#include "secant/core/observation.hpp"
#include "secant/core/rng.hpp"
#include "secant/grad/ops.hpp"
#include "secant/grad/parameters.hpp"

namespace secant::nets {

using grad::Architecture;
using grad::ParameterSet;
using grad::Tensor;

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

/// Conv stack (ReLU after each layer), flatten, linear projection to the
/// feature dim, layer norm, tanh. Reads the "encoder.*" entries of `params`.
template <typename T>
Tensor<T> encode(const ParameterSet<T>& params, const Architecture& arch, const Tensor<T>& obs);

/// Encoder up to (and including) the last conv ReLU, flattened.
template <typename T>
Tensor<T> encode_conv(const ParameterSet<T>& params, const Architecture& arch, const Tensor<T>& obs);
/// Projection + layer norm + tanh on flattened conv output.
template <typename T>
Tensor<T> encode_head(const ParameterSet<T>& params, const Tensor<T>& conv_flat);

template <typename T>
struct GaussianHead {
  Tensor<T> mean;
  Tensor<T> log_std;  // clamped to [kLogStdMin, kLogStdMax]
};

/// ReLU MLP from features to (mean, log_std) of the pre-tanh action Gaussian.
template <typename T>
GaussianHead<T> actor_head(const ParameterSet<T>& params, const Architecture& arch, const Tensor<T>& features);

/// Q(features, action) -> [N,1] using the "<which>.*" entries (critic1 / critic2).
template <typename T>
Tensor<T> critic_head(const ParameterSet<T>& params, const Architecture& arch, const std::string& which,
                      const Tensor<T>& features, const Tensor<T>& action);

template <typename T>
struct PolicySample {
  Tensor<T> action;    // tanh(z), [N,d]
  Tensor<T> log_prob;  // [N,1]
};

/// Reparameterized draw a = tanh(mean + std * eps).
template <typename T>
PolicySample<T> sample_action(const GaussianHead<T>& head, Rng& rng);

/// Encoder + Gaussian actor head. The deterministic action is tanh(mean).
template <typename T>
class Policy {
 public:
  Policy() = default;
  Policy(Architecture arch, ParameterSet<T> params);
  static Policy initialize(const Architecture& arch, Rng& rng);
  /// Pulls encoder.* and actor.* out of a larger set (e.g. a SAC agent), deep-copied.
  static Policy extract(const Architecture& arch, const ParameterSet<T>& source);

  const Architecture& arch() const { return arch_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  Tensor<T> features(const Tensor<T>& obs) const { return encode(params_, arch_, obs); }
  GaussianHead<T> head(const Tensor<T>& obs) const { return actor_head(params_, arch_, features(obs)); }
  Tensor<T> act(const Tensor<T>& obs) const;
  std::vector<float> act(const Observation& obs) const;

 private:
  Architecture arch_;
  ParameterSet<T> params_;
};

}  // namespace secant::nets
