#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "secant/augment/augment.hpp"
#include "secant/env/pixel_env.hpp"
#include "secant/grad/adam.hpp"
#include "secant/nets/networks.hpp"
#include "secant/sac/sac.hpp"

namespace secant::distill {

using grad::Architecture;
using grad::Tensor;
using nets::Policy;

/// FIFO ring of raw (unaugmented) observations stored as uint8.
class DistillDataset {
 public:
  DistillDataset(std::size_t capacity, int channels, int height, int width);

  void add(const Observation& obs);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  /// Logical index: 0 is the oldest stored observation.
  Observation get(std::size_t index) const;
  std::vector<Observation> sample(std::size_t batch, Rng& rng) const;
  /// Logical indices drawn exactly as sample() draws them.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

  /// Optional per-entry label (e.g. a cached expert action). Labels live in the
  /// entry's slot and are evicted with it.
  void set_label(std::size_t index, std::span<const float> label);
  std::span<const float> label(std::size_t index) const;

 private:
  std::size_t capacity_;
  int channels_, height_, width_;
  std::size_t bytes_;
  std::vector<std::uint8_t> storage_;
  std::size_t label_dim_ = 0;
  std::vector<float> labels_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::uint64_t inserted_ = 0;

  std::size_t slot(std::size_t index) const;
};

enum class Collection { dagger, expert_only, student_only };
enum class Schedule { sequential, parallel };

std::string collection_name(Collection c);
Collection parse_collection(const std::string& name);

/// One cell of the strategy lattice. Augmentation regimes are "none", "weak",
/// "strong" or a recipe name; an empty student regime means no stage 2.
struct StrategyConfig {
  std::string expert_augmentation = "weak";
  std::string student_augmentation = "strong";
  Collection collection = Collection::dagger;
  Schedule schedule = Schedule::sequential;

  static StrategyConfig secant();
  /// W-only, S-only, no-aug, W->W, W->S, S->W, S->S, N->W, N->S (ASCII or
  /// unicode arrow), SECANT, SECANT-Parallel.
  static StrategyConfig from_label(const std::string& label);
  bool single_stage() const { return student_augmentation.empty(); }
  std::string label() const;
};

struct DistillConfig {
  std::size_t capacity = 10000;
  std::size_t batch_size = 512;
  double lr = 1e-3;
  std::size_t iterations = 30000;
  int seed_episodes = 10;
  /// Recipe substituted for the "strong" regime.
  std::string strong_recipe = "Combo1";
  augment::AugmentParams augment_params{};
  /// Std of Gaussian noise added to student rollout actions (0 = deterministic).
  double exploration_noise = 0.0;
  /// Regress onto sampled expert actions instead of tanh(mean).
  bool sampled_targets = false;
  std::size_t log_every = 1000;

  void validate() const;
};

/// Maps a regime name to a recipe ("strong" -> `strong_recipe`).
augment::ComboRecipe regime_recipe(const std::string& regime, const std::string& strong_recipe);

/// Squared Frobenius norm of (student - expert) divided by the row count.
template <typename T>
Tensor<T> action_regression_loss(const Tensor<T>& student_actions, const Tensor<T>& expert_actions);

/// Expert actions for raw observations (no gradient), deterministic unless
/// `sample_rng` is given.
template <typename T>
Tensor<T> expert_targets(const Policy<T>& expert, std::span<const Observation> raw, Rng* sample_rng = nullptr);

/// Loss of one batch: expert on raw observations, student on per-item
/// augmented copies. The result is on the tape of the student parameters.
template <typename T>
Tensor<T> distill_loss(const Policy<T>& student, const Policy<T>& expert, std::span<const Observation> raw,
                       const augment::ComboRecipe& recipe, const augment::AugmentParams& params,
                       const augment::DistractorPool* pool, Rng& rng, bool sampled_targets = false);

/// Same loss against precomputed expert actions [N, action_dim].
template <typename T>
Tensor<T> distill_loss(const Policy<T>& student, const Tensor<T>& targets, std::span<const Observation> raw,
                       const augment::ComboRecipe& recipe, const augment::AugmentParams& params,
                       const augment::DistractorPool* pool, Rng& rng);

/// distill_loss, backward, one optimizer step on the student. Returns the loss.
double distill_step(Policy<float>& student, grad::Adam<float>& optimizer, const Policy<float>& expert,
                    std::span<const Observation> raw, const augment::ComboRecipe& recipe,
                    const augment::AugmentParams& params, const augment::DistractorPool* pool, Rng& rng,
                    bool sampled_targets = false);
double distill_step(Policy<float>& student, grad::Adam<float>& optimizer, const Tensor<float>& targets,
                    std::span<const Observation> raw, const augment::ComboRecipe& recipe,
                    const augment::AugmentParams& params, const augment::DistractorPool* pool, Rng& rng);

/// Rolls out the deterministic `policy` for `episodes` episodes and appends every
/// observation it acts on. Reads no reward.
void collect_episodes(const Policy<float>& policy, env::PixelEnv& env, int episodes, DistillDataset& dataset);
DistillDataset seed_dataset(const Policy<float>& expert, env::PixelEnv& env, int episodes, std::size_t capacity);

struct DistillRun {
  Policy<float> student;
  std::vector<std::pair<std::uint64_t, double>> losses;  // (iteration, mean loss since last log)
  std::size_t seed_size = 0;
  std::size_t dataset_size = 0;
  std::uint64_t expert_checksum_before = 0;
  std::uint64_t expert_checksum_after = 0;
  std::uint64_t student_env_steps = 0;
  std::uint64_t expert_env_steps = 0;
  /// FNV-1a over the float bytes of every observation appended after seeding.
  std::uint64_t appended_checksum = 0;
};

/// Stage 2 on the train variant. `student_arch` defaults to the expert's.
DistillRun run_distillation(const Policy<float>& expert, env::TaskKind task, const env::EnvConfig& env_config,
                            const StrategyConfig& strategy, const DistillConfig& config, std::uint64_t seed,
                            const augment::DistractorPool* pool = nullptr,
                            const std::optional<Architecture>& student_arch = std::nullopt,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct ParallelRun {
  grad::ParameterSet<float> expert_state;
  Policy<float> student;
  std::vector<std::pair<std::uint64_t, double>> losses;
  std::vector<std::uint64_t> expert_checksums;  // one per logged cycle
  std::uint64_t distill_steps = 0;
};

/// Expert SAC and student distillation interleaved: each cycle performs one
/// SAC environment step plus update, then one distill step plus one student
/// environment step. Distillation starts once SAC warmup ends, from a dataset
/// seeded by the expert at that moment.
ParallelRun run_parallel_variant(env::TaskKind task, const env::EnvConfig& env_config, const Architecture& arch,
                                 const sac::SacConfig& sac_config, const DistillConfig& config,
                                 const StrategyConfig& strategy, std::uint64_t seed,
                                 const augment::DistractorPool* pool = nullptr,
                                 const std::optional<std::filesystem::path>& out_dir = std::nullopt);

void write_loss_csv(const std::filesystem::path& path, const std::vector<std::pair<std::uint64_t, double>>& losses);

}  // namespace secant::distill
