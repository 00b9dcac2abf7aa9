#include "secant/core/observation.hpp"

#include <stdexcept>

namespace secant {

std::vector<std::uint8_t> encode_u8(const Observation& obs) {
  std::vector<std::uint8_t> out(obs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(quantize_255(obs.data[i]) * 255.0f + 0.5f);
  }
  return out;
}

Observation decode_u8(std::span<const std::uint8_t> bytes, int channels, int height, int width) {
  Observation obs(channels, height, width);
  if (bytes.size() != obs.size()) throw std::invalid_argument("decode_u8: size mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i) obs.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  return obs;
}

template <typename T>
grad::Tensor<T> to_tensor(std::span<const Observation> batch) {
  if (batch.empty()) throw std::invalid_argument("to_tensor: empty batch");
  const auto& first = batch.front();
  const std::size_t per = first.size();
  std::vector<T> data(per * batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (!batch[n].same_shape(first)) throw std::invalid_argument("to_tensor: mixed observation shapes");
    std::copy(batch[n].data.begin(), batch[n].data.end(), data.begin() + n * per);
  }
  return grad::Tensor<T>({batch.size(), static_cast<std::size_t>(first.channels),
                          static_cast<std::size_t>(first.height), static_cast<std::size_t>(first.width)},
                         std::move(data));
}

template grad::Tensor<float> to_tensor<float>(std::span<const Observation>);
template grad::Tensor<double> to_tensor<double>(std::span<const Observation>);

}  // namespace secant
