#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "secant/grad/tensor.hpp"

namespace secant {

/// Channel-major image stack with values in [0,1]. A pixel-env observation
/// holds `stack` RGB frames, so channels = 3 * stack.
struct Observation {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Observation() = default;
  Observation(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }
  float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool same_shape(const Observation& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const Observation&) const = default;
};

/// Quantized storage form used by replay buffers. Renderer output lies on the
/// k/255 grid, so encode/decode is lossless for raw observations.
std::vector<std::uint8_t> encode_u8(const Observation& obs);
Observation decode_u8(std::span<const std::uint8_t> bytes, int channels, int height, int width);
inline float quantize_255(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

/// [N,C,H,W] tensor from a batch of same-shaped observations.
template <typename T>
grad::Tensor<T> to_tensor(std::span<const Observation> batch);
template <typename T>
grad::Tensor<T> to_tensor(const Observation& obs) {
  return to_tensor<T>(std::span<const Observation>(&obs, 1));
}

}  // namespace secant
