#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "secant/core/observation.hpp"
#include "secant/core/rng.hpp"

namespace secant::env {

enum class TaskKind { point_reach, cart_balance };
enum class BackgroundMode { fixed_color, random_color, dynamic_texture };
enum class PaletteMode { fixed, randomized };
enum class Difficulty { train, test_color, test_dynamic };

TaskKind parse_task(const std::string& name);
std::string task_name(TaskKind task);

using Rgb = std::array<float, 3>;

/// Appearance of an environment. Dynamics and reward never depend on it.
struct VariantSpec {
  BackgroundMode background = BackgroundMode::fixed_color;
  PaletteMode palette = PaletteMode::fixed;
  std::uint64_t noise_seed = 0;
  Difficulty tag = Difficulty::train;

  static VariantSpec train();
  /// Per-episode random background and sprite colors.
  static VariantSpec test_color(std::uint64_t seed);
  /// Procedural value-noise background advanced every step; training palette.
  static VariantSpec test_dynamic(std::uint64_t seed);
  /// "train" | "test-color" | "test-dynamic"
  static VariantSpec from_name(const std::string& name, std::uint64_t seed);
  std::string name() const;

  bool operator==(const VariantSpec&) const = default;
};

struct EnvConfig {
  int height = 84;
  int width = 84;
  int frame_stack = 3;
  int action_repeat = 4;
  /// Cap in physics steps (before action repeat).
  int episode_length = 250;

  /// Agent decisions per full-length episode.
  int agent_steps() const { return (episode_length + action_repeat - 1) / action_repeat; }
};

/// Physical state. point-reach: {x, y, vx, vy, target_x, target_y} in a unit
/// arena. cart-balance: {x, x_dot, theta, theta_dot}.
struct EnvState {
  std::vector<double> physical;
  int step = 0;            // physics steps taken this episode
  int episode_length = 250;
  std::uint64_t episode = 0;  // index within this handle's lifetime, drives per-episode palettes
  bool terminal = false;
};

/// Returned by step(). Reading the reward goes through an instrumented accessor
/// so that reward-free code paths can prove they never look at it.
class StepResult {
 public:
  StepResult(Observation obs, double reward, bool done, bool terminal)
      : observation(std::move(obs)), done(done), terminal(terminal), reward_(reward) {}
  Observation observation;
  bool done;      // episode over (time limit or terminal)
  bool terminal;  // true terminal state; time-limit truncation leaves this false
  double reward() const;

 private:
  double reward_;
};

/// Number of StepResult::reward() reads on this thread.
std::uint64_t& reward_reads();

struct Palette {
  Rgb background;
  Rgb agent;   // point-reach agent / cart body
  Rgb target;  // point-reach target / pole
  Rgb track;
};

Palette train_palette();
/// Palette used for a given episode of a variant.
Palette variant_palette(const VariantSpec& variant, std::uint64_t episode);

/// One 3xHxW frame. Pure function of (task, state, variant, config); the dynamic
/// texture is indexed by state.step.
Observation render_frame(TaskKind task, const EnvState& state, const VariantSpec& variant,
                         const EnvConfig& config);

/// True where a sprite covers the pixel centre (row-major HxW).
std::vector<bool> foreground_mask(TaskKind task, const EnvState& state, const EnvConfig& config);

/// Single-threaded environment handle with frame stacking and action repeat.
class PixelEnv {
 public:
  PixelEnv(TaskKind task, VariantSpec variant, EnvConfig config, std::uint64_t seed);

  Observation reset();
  /// Action entries are clipped to [-1,1]. Throws std::logic_error once done.
  StepResult step(std::span<const float> action);

  TaskKind task() const { return task_; }
  int action_dim() const;
  const VariantSpec& variant() const { return variant_; }
  const EnvConfig& config() const { return config_; }
  const EnvState& state() const { return state_; }
  /// Replaces the physical state (tests, scripted scenarios); the frame stack is re-filled.
  Observation set_state(EnvState state);
  bool done() const { return done_; }
  Observation observation() const;
  Observation render() const { return render_frame(task_, state_, variant_, config_); }

 private:
  void physics_step(std::span<const double> action);
  double physics_reward() const;
  Observation stacked() const;

  TaskKind task_;
  VariantSpec variant_;
  EnvConfig config_;
  Rng rng_;
  EnvState state_;
  std::deque<Observation> frames_;
  bool done_ = true;
  std::uint64_t episodes_started_ = 0;
};

/// Privileged-state controller used as the reward ceiling reference.
std::vector<float> scripted_action(TaskKind task, const EnvState& state);

inline constexpr double kPointArenaDiagonal = 1.4142135623730951;

}  // namespace secant::env
