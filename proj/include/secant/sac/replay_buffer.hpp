#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "secant/core/observation.hpp"
#include "secant/core/rng.hpp"

namespace secant::sac {

struct Transition {
  Observation obs;
  std::vector<float> action;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;  // true terminal only; time-limit truncation is not a terminal
};

struct TransitionBatch {
  std::vector<Observation> obs;
  std::vector<Observation> next_obs;
  std::vector<float> actions;  // row-major [N, action_dim]
  std::vector<float> rewards;  // [N]
  std::vector<float> dones;    // [N], 1 for terminal
  std::vector<std::size_t> indices;
  std::size_t size() const { return obs.size(); }
};

/// FIFO ring of transitions stored as uint8 pixels. When o_{t+1} is the
/// frame-stack shift of o_t (the normal case) only its newest frame is kept.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int channels, int height, int width, int action_dim,
               int frame_channels = 3);

  void add(const Observation& obs, std::span<const float> action, double reward,
           const Observation& next_obs, bool done);
  void add(const Transition& t) { add(t.obs, t.action, t.reward, t.next_obs, t.done); }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  /// Total insertions since construction.
  std::uint64_t inserted() const { return inserted_; }

  /// Logical index: 0 is the oldest stored transition.
  Transition get(std::size_t index) const;
  /// Uniform with replacement over current contents.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  TransitionBatch sample(std::size_t batch, Rng& rng) const;
  TransitionBatch gather(std::span<const std::size_t> indices) const;

 private:
  std::size_t slot(std::size_t index) const;
  Observation decode_obs(std::size_t slot) const;
  Observation decode_next(std::size_t slot, const Observation& obs) const;

  std::size_t capacity_;
  int channels_, height_, width_, action_dim_, frame_channels_;
  std::size_t obs_bytes_, frame_bytes_;
  std::vector<std::uint8_t> obs_, next_frame_;
  std::vector<float> actions_, rewards_;
  std::vector<std::uint8_t> dones_;
  std::unordered_map<std::size_t, std::vector<std::uint8_t>> full_next_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;
};

}  // namespace secant::sac
