#include "secant/distill/strategy_matrix.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <thread>

namespace secant::distill {

MatrixCell cell_from_label(const std::string& label) { return {label, StrategyConfig::from_label(label), {}}; }

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t n_threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

struct ExpertKey {
  std::string regime;
  std::uint64_t seed;
  auto operator<=>(const ExpertKey&) const = default;
};

std::string sac_augmentation(const std::string& regime, const DistillConfig& cfg) {
  return regime == "strong" ? cfg.strong_recipe : regime;
}

std::string slug(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

}  // namespace

std::vector<MatrixRow> run_strategy_matrix(const MatrixSettings& settings, const std::vector<MatrixCell>& cells) {
  const auto& s = settings;
  auto log = [&](const std::string& m) {
    if (s.log) s.log(m);
  };
  auto dir_for = [&](const std::string& kind, const std::string& name, std::uint64_t seed)
      -> std::optional<std::filesystem::path> {
    if (!s.out_dir) return std::nullopt;
    return *s.out_dir / kind / slug(name) / ("seed" + std::to_string(seed));
  };

  // Stage 1: every distinct sequential expert.
  std::vector<ExpertKey> expert_jobs;
  for (const auto& cell : cells) {
    if (cell.strategy.schedule == Schedule::parallel) continue;
    for (auto seed : s.seeds) {
      ExpertKey key{cell.strategy.expert_augmentation, seed};
      if (std::find(expert_jobs.begin(), expert_jobs.end(), key) == expert_jobs.end()) expert_jobs.push_back(key);
    }
  }
  std::map<ExpertKey, Policy<float>> experts;
  std::mutex mutex;
  parallel_for(expert_jobs.size(), s.workers, [&](std::size_t i) {
    const auto& key = expert_jobs[i];
    sac::SacConfig cfg = s.sac;
    cfg.augmentation = sac_augmentation(key.regime, s.distill);
    log("expert " + key.regime + " seed " + std::to_string(key.seed));
    auto run = sac::train_expert(s.task, s.env_config, s.arch, cfg, key.seed, dir_for("experts", key.regime, key.seed),
                                 s.pool);
    auto policy = Policy<float>::extract(s.arch, run.state);
    std::lock_guard lock(mutex);
    experts.emplace(key, std::move(policy));
  });

  // Stage 2: students (or parallel runs), one per (cell, seed).
  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (auto seed : s.seeds) jobs.push_back({c, seed});
  }
  std::vector<Policy<float>> policies(jobs.size());
  parallel_for(jobs.size(), s.workers, [&](std::size_t i) {
    const auto& cell = cells[jobs[i].cell];
    const auto seed = jobs[i].seed;
    DistillConfig dcfg = s.distill;
    if (cell.student_recipe) dcfg.strong_recipe = *cell.student_recipe;
    if (cell.strategy.schedule == Schedule::parallel) {
      log("parallel " + cell.label + " seed " + std::to_string(seed));
      auto run = run_parallel_variant(s.task, s.env_config, s.arch, s.sac, dcfg, cell.strategy, seed, s.pool,
                                      dir_for("cells", cell.label, seed));
      policies[i] = std::move(run.student);
      return;
    }
    Policy<float> expert;
    {
      std::lock_guard lock(mutex);
      expert = experts.at(ExpertKey{cell.strategy.expert_augmentation, seed});
    }
    if (cell.strategy.single_stage()) {
      policies[i] = expert;
      return;
    }
    log("student " + cell.label + " seed " + std::to_string(seed));
    auto run = run_distillation(expert, s.task, s.env_config, cell.strategy, dcfg, seed, s.pool, std::nullopt,
                                dir_for("cells", cell.label, seed));
    policies[i] = std::move(run.student);
  });

  // Evaluation on every variant.
  std::vector<eval::EvalReport> reports(jobs.size());
  parallel_for(jobs.size(), s.workers, [&](std::size_t i) {
    reports[i] = eval::evaluate_policy(cells[jobs[i].cell].label, policies[i], s.task, s.variants, s.env_config,
                                       s.eval_episodes, {mix_seed(jobs[i].seed, 0xe7a1ULL)});
  });

  std::vector<MatrixRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto& variant : s.variants) {
      MatrixRow row;
      row.strategy = cells[c].label;
      row.task = env::task_name(s.task);
      row.variant = variant;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].cell == c) row.seed_means.push_back(reports[i].row(cells[c].label, variant).mean);
      }
      row.seeds = row.seed_means.size();
      std::tie(row.mean_reward, row.std) = eval::mean_std(row.seed_means);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<MatrixRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "strategy,task,variant,mean_reward,std,seeds\n" << std::setprecision(10);
  for (const auto& r : rows) {
    f << r.strategy << ',' << r.task << ',' << r.variant << ',' << r.mean_reward << ',' << r.std << ',' << r.seeds
      << '\n';
  }
}

}  // namespace secant::distill
