#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "secant/augment/augment.hpp"
#include "secant/distill/distill.hpp"
#include "secant/env/pixel_env.hpp"
#include "secant/grad/parameters.hpp"
#include "secant/sac/sac.hpp"

namespace secant::cli {

/// Invalid configuration; the message names the offending [section] key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvalSettings {
  std::vector<std::string> variants{"train", "test-color", "test-dynamic"};
  int episodes = 5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> cycle_variants{"train", "test-color"};
  int cycle_trials = 5;
  int cycle_samples = 15;
  int saliency_patch = 5;
  double saliency_sigma = 0.2;
  std::size_t latency_steps = 1000;
  std::size_t latency_warmup = 50;
};

struct AblateSettings {
  std::string axis = "strategy";
  std::vector<std::string> cells;  // empty: every cell of the axis
};

/// Every tunable of an experiment. All fields have defaults; the desk-scale
/// defaults trade the 84x84 geometry for 32x32 frames and a narrower network.
struct ExperimentConfig {
  env::TaskKind task = env::TaskKind::point_reach;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int workers = 1;
  std::string distractor_dir;
  std::size_t distractor_fallback = 64;
  bool allow_fallback = true;

  env::EnvConfig env;
  grad::Architecture network;
  augment::AugmentParams augment;
  sac::SacConfig sac;
  distill::DistillConfig distill;
  distill::StrategyConfig strategy;
  EvalSettings eval;
  AblateSettings ablate;

  ExperimentConfig();

  /// Network with input and action geometry filled in from env and task.
  grad::Architecture architecture() const;
  /// SAC settings with the shared augmentation parameters applied.
  sac::SacConfig sac_config() const;
  distill::DistillConfig distill_config() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Parses INI text. Unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
/// Reads a file (missing file: ConfigError naming the path), then applies
/// SECANT_<SECTION>_<KEY> environment overrides, then validates.
ExperimentConfig load_config(const std::filesystem::path& path);
/// Defaults plus environment overrides, validated.
ExperimentConfig default_config();
/// Applies overrides from `environ`-style pairs (tests) or the process environment.
void apply_env_overrides(ExperimentConfig& config, const std::map<std::string, std::string>& vars);
void apply_env_overrides(ExperimentConfig& config);

/// Fully resolved INI; parse_config(to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& config);
void echo_config(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// (section, key) pairs the parser accepts.
std::vector<std::pair<std::string, std::string>> known_keys();

}  // namespace secant::cli
