#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "secant/augment/augment.hpp"
#include "secant/env/pixel_env.hpp"
#include "secant/grad/adam.hpp"
#include "secant/grad/parameters.hpp"
#include "secant/nets/networks.hpp"
#include "secant/sac/replay_buffer.hpp"

namespace secant::sac {

using grad::Architecture;
using grad::ParameterSet;
using grad::Tensor;

struct SacConfig {
  double gamma = 0.99;
  std::size_t buffer_capacity = 100000;
  std::size_t batch_size = 512;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double alpha_lr = 1e-3;
  double init_temperature = 0.1;
  double ema_rate = 0.01;
  int target_update_every = 2;
  int actor_update_every = 2;
  /// Observation augmentation: "weak" (crop), "none", or any recipe name.
  std::string augmentation = "weak";
  augment::AugmentParams augment_params{};
  std::size_t warmup_steps = 1000;
  std::size_t total_steps = 100000;
  int updates_per_step = 1;
  std::size_t eval_every = 5000;
  int eval_episodes = 5;
  /// Training ends at the first evaluation whose mean reward reaches this; <= 0 disables.
  double stop_reward = 0.0;
  /// Evaluations before this step never stop training.
  std::size_t stop_min_steps = 0;
  std::optional<double> target_entropy;  // default: -action_dim

  void validate() const;
};

/// Batch in tensor form. not_done is 1 - done.
template <typename T>
struct BatchTensors {
  Tensor<T> obs;       // [N,C,H,W]
  Tensor<T> action;    // [N,d]
  Tensor<T> reward;    // [N,1]
  Tensor<T> next_obs;  // [N,C,H,W]
  Tensor<T> not_done;  // [N,1]
  std::size_t size() const { return obs.rank() ? obs.dim(0) : 0; }
};

template <typename T>
BatchTensors<T> to_tensors(const TransitionBatch& batch, int action_dim);

/// Online parameters (encoder.*, actor.*, critic1.*, critic2.*), EMA targets
/// of encoder and critics under the same names, and the log temperature.
template <typename T>
struct SacNetworks {
  Architecture arch;
  ParameterSet<T> online;
  ParameterSet<T> target;
  Tensor<T> log_alpha;
  double target_entropy = -1.0;

  static SacNetworks initialize(const Architecture& arch, double init_temperature, Rng& rng);
  T alpha() const;
  ParameterSet<T> critic_side() const;  // encoder.* + critic1.* + critic2.*
  ParameterSet<T> actor_side() const;   // actor.*
};

template <typename T>
struct CriticLoss {
  Tensor<T> loss;  // [1]
  Tensor<T> q1, q2, target;
  Tensor<T> features;  // online features of o_t, still on the tape
};

/// mean (Q1 - y)^2 + mean (Q2 - y)^2 with
/// y = r + gamma * not_done * (min(Qbar1, Qbar2)(o', a') - alpha * log pi(a'|o')),
/// a' ~ pi(.|o'). The target carries no gradient.
template <typename T>
CriticLoss<T> critic_loss(const SacNetworks<T>& nets, const BatchTensors<T>& batch, double gamma, Rng& rng);

template <typename T>
struct ActorLoss {
  Tensor<T> loss;      // [1]
  Tensor<T> log_prob;  // [N,1], detached
};

/// mean(alpha * log pi(a|o) - min(Q1,Q2)(o,a)), a reparameterized. Features are
/// detached and critic parameters are frozen, so only actor.* receives gradient.
/// If `features` is given it replaces encoding `obs`.
template <typename T>
ActorLoss<T> actor_loss(SacNetworks<T>& nets, const Tensor<T>& obs, Rng& rng,
                        const std::optional<Tensor<T>>& features = std::nullopt);

/// mean(-log_alpha * (log_prob + target_entropy)) with log_prob treated as data.
template <typename T>
Tensor<T> temperature_loss(const Tensor<T>& log_alpha, const Tensor<T>& log_prob, double target_entropy);

/// target <- (1 - rate) * target + rate * online for every target entry.
template <typename T>
void ema_update(ParameterSet<T>& target, const ParameterSet<T>& online, double rate);

/// Samples one op per batch item and applies it to both o_t and o_{t+1}, so a
/// crop uses the same offset on the pair. Returns the ops in item order.
std::vector<augment::AugmentationOp> augment_pairs(TransitionBatch& batch, const augment::ComboRecipe& recipe,
                                                   const augment::AugmentParams& params,
                                                   const augment::DistractorPool* pool, Rng& rng);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  bool actor_updated = false;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, std::uint64_t step) : std::runtime_error(what), step(step) {}
  std::uint64_t step;
};

/// Networks, optimizers and update schedule of one SAC learner (float).
class SacAgent {
 public:
  SacAgent(const Architecture& arch, const SacConfig& config, std::uint64_t seed,
           const augment::DistractorPool* pool = nullptr);

  /// Stochastic (training) or deterministic tanh(mean) action.
  std::vector<float> act(const Observation& obs, bool deterministic);
  /// One gradient update from a sampled, augmented batch.
  UpdateStats update(const ReplayBuffer& buffer);

  SacNetworks<float>& networks() { return nets_; }
  const SacNetworks<float>& networks() const { return nets_; }
  const SacConfig& config() const { return config_; }
  std::uint64_t update_count() const { return updates_; }
  nets::Policy<float> policy() const;

  /// Online, "target.", "optim." and "state." entries for a checkpoint.
  ParameterSet<float> export_state() const;
  void import_state(const ParameterSet<float>& state);

 private:
  Architecture arch_;
  SacConfig config_;
  Rng rng_;
  SacNetworks<float> nets_;
  grad::Adam<float> critic_opt_, actor_opt_, alpha_opt_;
  augment::ComboRecipe recipe_;
  const augment::DistractorPool* pool_;
  std::uint64_t updates_ = 0;
};

struct CurveRow {
  std::uint64_t step = 0;
  double episode_reward = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
};

struct ExpertRun {
  Architecture arch;
  ParameterSet<float> state;  // export_state() of the final agent
  std::vector<CurveRow> curve;
  std::size_t buffer_size = 0;
  std::vector<double> training_episode_rewards;
};

using ProgressFn = std::function<void(const CurveRow&)>;

/// Stage-1 training on the train variant of `task`. With `out_dir` set,
/// writes expert.ckpt and curve.csv there.
ExpertRun train_expert(env::TaskKind task, const env::EnvConfig& env_config, const Architecture& arch,
                       const SacConfig& config, std::uint64_t seed,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                       const augment::DistractorPool* pool = nullptr, const ProgressFn& progress = {});

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve);

}  // namespace secant::sac
