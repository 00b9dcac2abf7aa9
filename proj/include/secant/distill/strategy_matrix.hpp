#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "secant/distill/distill.hpp"
#include "secant/eval/eval.hpp"

namespace secant::distill {

/// One requested cell: a strategy plus an optional student recipe that
/// replaces the "strong" regime (used by the augmentation sweep).
struct MatrixCell {
  std::string label;
  StrategyConfig strategy;
  std::optional<std::string> student_recipe;
};

MatrixCell cell_from_label(const std::string& label);

struct MatrixSettings {
  env::TaskKind task = env::TaskKind::point_reach;
  env::EnvConfig env_config{};
  grad::Architecture arch{};
  sac::SacConfig sac{};
  DistillConfig distill{};
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> variants{"train", "test-color", "test-dynamic"};
  int eval_episodes = 5;
  const augment::DistractorPool* pool = nullptr;
  int workers = 1;
  /// Checkpoints and curves per trained model when set.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const std::string&)> log;
};

struct MatrixRow {
  std::string strategy;
  std::string task;
  std::string variant;
  double mean_reward = 0.0;
  double std = 0.0;
  std::size_t seeds = 0;
  std::vector<double> seed_means;
};

/// Trains every cell for every seed and evaluates on every variant. Experts are
/// shared between cells with the same expert regime and seed, so W->S is
/// exactly train_expert followed by run_distillation.
std::vector<MatrixRow> run_strategy_matrix(const MatrixSettings& settings, const std::vector<MatrixCell>& cells);

/// strategy,task,variant,mean_reward,std,seeds
void write_matrix_csv(const std::filesystem::path& path, const std::vector<MatrixRow>& rows);

/// Runs fn(0..count-1) on up to `workers` threads; rethrows the first failure.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace secant::distill
