#include "secant/sac/replay_buffer.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace secant::sac {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int channels, int height, int width, int action_dim,
                           int frame_channels)
    : capacity_(capacity),
      channels_(channels),
      height_(height),
      width_(width),
      action_dim_(action_dim),
      frame_channels_(frame_channels) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  if (channels <= 0 || height <= 0 || width <= 0 || action_dim <= 0) {
    throw std::invalid_argument("replay buffer extents must be positive");
  }
  if (frame_channels <= 0 || channels % frame_channels != 0) {
    throw std::invalid_argument("channels must be a multiple of the frame channels");
  }
  frame_bytes_ = static_cast<std::size_t>(frame_channels) * height * width;
  obs_bytes_ = static_cast<std::size_t>(channels) * height * width;
}

void ReplayBuffer::add(const Observation& obs, std::span<const float> action, double reward,
                       const Observation& next_obs, bool done) {
  if (obs.channels != channels_ || obs.height != height_ || obs.width != width_) {
    throw std::invalid_argument("observation shape does not match the replay buffer");
  }
  if (!obs.same_shape(next_obs)) throw std::invalid_argument("o_t and o_{t+1} differ in shape");
  if (action.size() != static_cast<std::size_t>(action_dim_)) {
    throw std::invalid_argument("action has " + std::to_string(action.size()) + " entries, expected " +
                                std::to_string(action_dim_));
  }
  const auto enc = encode_u8(obs);
  const auto enc_next = encode_u8(next_obs);
  const std::size_t shift = obs_bytes_ - frame_bytes_;
  const bool shifted = std::equal(enc.begin() + static_cast<std::ptrdiff_t>(frame_bytes_), enc.end(),
                                  enc_next.begin());

  const std::size_t s = cursor_;
  if (size_ < capacity_) {
    obs_.resize(obs_.size() + obs_bytes_);
    next_frame_.resize(next_frame_.size() + frame_bytes_);
    actions_.resize(actions_.size() + action.size());
    rewards_.push_back(0.0f);
    dones_.push_back(0);
    ++size_;
  }
  std::copy(enc.begin(), enc.end(), obs_.begin() + static_cast<std::ptrdiff_t>(s * obs_bytes_));
  std::copy(enc_next.begin() + static_cast<std::ptrdiff_t>(shift), enc_next.end(),
            next_frame_.begin() + static_cast<std::ptrdiff_t>(s * frame_bytes_));
  for (std::size_t i = 0; i < action.size(); ++i) {
    actions_[s * action.size() + i] = std::clamp(action[i], -1.0f, 1.0f);
  }
  rewards_[s] = static_cast<float>(reward);
  dones_[s] = done ? 1 : 0;
  if (shifted) {
    full_next_.erase(s);
  } else {
    full_next_[s] = enc_next;
  }
  cursor_ = (cursor_ + 1) % capacity_;
  ++inserted_;
}

std::size_t ReplayBuffer::slot(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("replay index out of range");
  return size_ < capacity_ ? index : (cursor_ + index) % capacity_;
}

Observation ReplayBuffer::decode_obs(std::size_t s) const {
  return decode_u8(std::span<const std::uint8_t>(obs_.data() + s * obs_bytes_, obs_bytes_), channels_,
                   height_, width_);
}

Observation ReplayBuffer::decode_next(std::size_t s, const Observation& obs) const {
  if (auto it = full_next_.find(s); it != full_next_.end()) {
    return decode_u8(it->second, channels_, height_, width_);
  }
  Observation next(channels_, height_, width_);
  std::copy(obs.data.begin() + static_cast<std::ptrdiff_t>(frame_bytes_), obs.data.end(), next.data.begin());
  const std::uint8_t* frame = next_frame_.data() + s * frame_bytes_;
  const std::size_t offset = obs_bytes_ - frame_bytes_;
  for (std::size_t i = 0; i < frame_bytes_; ++i) next.data[offset + i] = frame[i] / 255.0f;
  return next;
}

Transition ReplayBuffer::get(std::size_t index) const {
  const std::size_t s = slot(index);
  Transition t;
  t.obs = decode_obs(s);
  t.next_obs = decode_next(s, t.obs);
  t.action.assign(actions_.begin() + static_cast<std::ptrdiff_t>(s * action_dim_),
                  actions_.begin() + static_cast<std::ptrdiff_t>((s + 1) * action_dim_));
  t.reward = rewards_[s];
  t.done = dones_[s] != 0;
  return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.index(size_);
  return idx;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  const auto idx = sample_indices(batch, rng);
  return gather(idx);
}

TransitionBatch ReplayBuffer::gather(std::span<const std::size_t> indices) const {
  TransitionBatch b;
  b.indices.assign(indices.begin(), indices.end());
  b.obs.reserve(indices.size());
  b.next_obs.reserve(indices.size());
  for (std::size_t index : indices) {
    const std::size_t s = slot(index);
    b.obs.push_back(decode_obs(s));
    b.next_obs.push_back(decode_next(s, b.obs.back()));
    for (int k = 0; k < action_dim_; ++k) b.actions.push_back(actions_[s * action_dim_ + k]);
    b.rewards.push_back(rewards_[s]);
    b.dones.push_back(dones_[s] ? 1.0f : 0.0f);
  }
  return b;
}

}  // namespace secant::sac
