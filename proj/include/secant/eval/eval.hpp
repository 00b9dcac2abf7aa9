#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "secant/env/pixel_env.hpp"
#include "secant/eval/rollout.hpp"
#include "secant/nets/networks.hpp"

namespace secant::eval {

struct VariantResult {
  std::string policy;
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_means;  // mean episode reward per seed
  int episodes_per_seed = 0;
  double mean = 0.0;
  double std = 0.0;  // population std over seed means
};

struct EvalReport {
  std::string task;
  std::vector<VariantResult> rows;
  /// Tape activity observed while evaluating; both must stay 0.
  std::uint64_t backward_calls = 0;
  std::uint64_t parameter_writes = 0;

  const VariantResult& row(const std::string& policy, const std::string& variant) const;
  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

/// Deterministic rollouts of `act` on each variant. The variant's appearance
/// seed and the environment seed both derive from each entry of `seeds`.
EvalReport evaluate_policy(const std::string& policy_name, const ActionFn& act, env::TaskKind task,
                           const std::vector<std::string>& variants, const env::EnvConfig& env_config,
                           int episodes_per_seed, const std::vector<std::uint64_t>& seeds);
EvalReport evaluate_policy(const std::string& policy_name, const nets::Policy<float>& policy, env::TaskKind task,
                           const std::vector<std::string>& variants, const env::EnvConfig& env_config,
                           int episodes_per_seed, const std::vector<std::uint64_t>& seeds);

/// Environment handle for evaluation on a named variant under one seed.
env::PixelEnv make_eval_env(env::TaskKind task, const std::string& variant, const env::EnvConfig& env_config,
                            std::uint64_t seed);

ActionFn deterministic_actor(const nets::Policy<float>& policy);
ActionFn random_actor(int action_dim, std::uint64_t seed);

// ---- cycle consistency ----

using Feature = std::vector<float>;
using FeatureSequence = std::vector<Feature>;

/// `samples` indices spread over [0, length) with a fixed stride (first and last included).
std::vector<std::size_t> stride_indices(std::size_t length, std::size_t samples);
FeatureSequence subsample(const FeatureSequence& sequence, std::size_t samples);

/// Nearest neighbour by squared L2. Exact ties go to the candidate whose index
/// is closest to `hint`, then the lowest index.
std::size_t nearest(const Feature& query, const FeatureSequence& candidates, std::size_t hint = 0);

/// Fraction of u_i whose round trip U->V->U lands within index distance 1.
double cycle_consistency(const FeatureSequence& u, const FeatureSequence& v);
/// 3-way: both U->V->W->U and U->W->V->U must land within distance 1.
double cycle_consistency(const FeatureSequence& u, const FeatureSequence& v, const FeatureSequence& w);
/// Subsamples each trajectory to `samples` points, then scores.
double cycle_consistency_sampled(const FeatureSequence& u, const FeatureSequence& v, std::size_t samples = 15);
double cycle_consistency_sampled(const FeatureSequence& u, const FeatureSequence& v, const FeatureSequence& w,
                                 std::size_t samples = 15);

struct Trajectory {
  std::string id;
  std::string variant;
  std::vector<Observation> observations;
};

/// Deterministic rollout of one episode; records every observation acted on.
Trajectory collect_trajectory(const nets::Policy<float>& policy, env::TaskKind task, const std::string& variant,
                              const env::EnvConfig& env_config, std::uint64_t seed, const std::string& id = "");
FeatureSequence embed(const nets::Policy<float>& policy, const std::vector<Observation>& observations);

struct CycleReport {
  std::vector<double> trial_scores;
  double mean = 0.0;
  double std = 0.0;
};

/// Each trial re-collects one trajectory per variant from the same reset state
/// (shared environment seed) and scores them. Two variants give the 2-way
/// metric, three the 3-way metric.
CycleReport cycle_trials(const nets::Policy<float>& policy, env::TaskKind task,
                         const std::vector<std::string>& variants, const env::EnvConfig& env_config, int trials,
                         std::uint64_t seed, std::size_t samples = 15);

// ---- saliency ----

struct SaliencyMap {
  int rows = 0;
  int cols = 0;
  int patch = 5;
  std::vector<double> values;  // row-major rows x cols, non-negative
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// For every non-overlapping patch, adds N(0, sigma^2) noise to that patch in
/// every channel (clamped to [0,1]) and records the L2 change of the action.
SaliencyMap saliency_map(const ActionFn& act, const Observation& obs, int patch = 5, double sigma = 0.2,
                         std::uint64_t seed = 0);
SaliencyMap saliency_map(const nets::Policy<float>& policy, const Observation& obs, int patch = 5,
                         double sigma = 0.2, std::uint64_t seed = 0);
void write_saliency_csv(const std::filesystem::path& path, const SaliencyMap& map);
/// Newest RGB frame of `obs` tinted red by normalized saliency.
Observation saliency_overlay(const SaliencyMap& map, const Observation& obs);

// ---- embeddings ----

/// Rows: trajectory id, step, variant, then one column per feature.
void export_embeddings(const std::filesystem::path& path, const nets::Policy<float>& policy,
                       const std::vector<Trajectory>& trajectories);

// ---- latency ----

struct LatencyReport {
  std::size_t steps = 0;
  std::size_t warmup = 0;
  double mean_seconds = 0.0;
  std::vector<double> step_seconds;  // one per timed step
  std::uint64_t backward_calls = 0;
  std::uint64_t parameter_writes = 0;
};

/// Times policy.act on pre-rendered observations; rendering and stepping are
/// outside the timed region.
LatencyReport measure_latency(const nets::Policy<float>& policy, env::TaskKind task,
                              const env::EnvConfig& env_config, std::size_t steps = 1000, std::size_t warmup = 50,
                              std::uint64_t seed = 0);
void write_latency_json(const std::filesystem::path& path, const LatencyReport& report);

}  // namespace secant::eval
