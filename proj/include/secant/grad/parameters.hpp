#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "secant/core/rng.hpp"
#include "secant/grad/tensor.hpp"

namespace secant::grad {

/// Network geometry. Every parameter shape is a function of these fields.
/// Defaults reproduce the DMControl encoder: 4 unpadded 3x3 convs with 32
/// channels and strides [2,1,1,2], a 50-d feature, and 3-layer 1024-wide heads.
struct Architecture {
  int in_channels = 9;
  int height = 84;
  int width = 84;
  int conv_channels = 32;
  std::vector<int> conv_strides{2, 1, 1, 2};
  int kernel_size = 3;
  int feature_dim = 50;
  int mlp_layers = 3;
  int hidden_dim = 1024;
  int action_dim = 1;

  int conv_layers() const { return static_cast<int>(conv_strides.size()); }
  /// Spatial extent after the conv stack, {h, w}.
  std::pair<int, int> conv_output_hw() const;
  std::size_t flatten_dim() const;
  /// Throws std::invalid_argument on an unusable geometry.
  void validate() const;

  bool operator==(const Architecture&) const = default;
};

/// Ordered (name, shape) list for the parameters of one network part.
/// Parts: "encoder", "actor", "critic1", "critic2".
std::vector<std::pair<std::string, Shape>> parameter_shapes(const Architecture& arch,
                                                            const std::string& part);

/// Named tensors in insertion order.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;

  void add(std::string name, Tensor<T> tensor);
  bool contains(const std::string& name) const;
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::vector<Tensor<T>> tensors() const;
  std::size_t numel() const;

  /// Entries whose names start with `prefix` (shared storage).
  ParameterSet subset(const std::string& prefix) const;
  /// Deep copy; each tensor becomes a fresh leaf.
  ParameterSet clone() const;
  /// Copies that no gradient reaches; values are shared at call time only.
  ParameterSet detached() const;
  /// Overwrites values of same-named tensors; shapes must match.
  void copy_values_from(const ParameterSet& other);

  void zero_grad();
  void set_requires_grad(bool value);
  /// FNV-1a over names and raw value bytes.
  std::uint64_t checksum() const;

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

/// Xavier-uniform weights, zero biases, unit layer-norm gains.
template <typename T>
void init_parameters(ParameterSet<T>& set, const Architecture& arch, const std::string& part, Rng& rng);

}  // namespace secant::grad
