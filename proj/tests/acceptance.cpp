// End-to-end acceptance run at desk scale. Prints one PASS/FAIL line per
// criterion and writes every intermediate model and report under --work.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "secant/cli/app.hpp"
#include "secant/cli/config.hpp"
#include "secant/core/rng.hpp"
#include "secant/distill/distill.hpp"
#include "secant/eval/eval.hpp"
#include "secant/eval/rollout.hpp"
#include "secant/grad/checkpoint.hpp"
#include "secant/sac/sac.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace secant;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2) << '\n';
}

struct Verdict {
  int id = 0;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

/// Shared state of one acceptance run. Models are cached on disk so that a
/// --reuse run only recomputes what is missing.
class Acceptance {
 public:
  Acceptance(fs::path work, bool reuse, std::size_t seeds, std::size_t gate_iterations)
      : work_(std::move(work)), reuse_(reuse), gate_iterations_(gate_iterations) {
    config_ = cli::default_config();
    config_.sac.eval_every = 2000;
    config_.sac.total_steps = 100000;
    config_.sac.stop_min_steps = 10000;
    config_.seeds.clear();
    for (std::size_t s = 1; s <= seeds; ++s) config_.seeds.push_back(s);
    config_.validate();
    pool_ = augment::load_distractor_pool(config_.distractor_dir, config_.env.height, config_.env.width,
                                          config_.distractor_fallback, config_.allow_fallback,
                                          mix_seed(config_.seeds.front(), 0xd15ULL));
  }

  const cli::ExperimentConfig& config() const { return config_; }
  const fs::path& work() const { return work_; }

  double ceiling() {
    if (!ceiling_) {
      const auto returns = eval::scripted_returns(config_.task, env::VariantSpec::train(), config_.env, 20,
                                                  mix_seed(0xce11ULL));
      ceiling_ = mean_of(returns);
    }
    return *ceiling_;
  }

  double stop_threshold() { return 0.8 * ceiling(); }

  struct ExpertEntry {
    nets::Policy<float> policy;
    double best_reward = 0.0;
    std::uint64_t steps = 0;
  };

  /// SAC expert for `seed` with the given augmentation regime.
  const ExpertEntry& expert(std::uint64_t seed, const std::string& regime = "weak") {
    const auto key = regime + "/" + std::to_string(seed);
    if (auto it = experts_.find(key); it != experts_.end()) return it->second;
    const fs::path dir = work_ / ("expert-" + regime) / ("seed" + std::to_string(seed));
    ExpertEntry entry;
    if (reuse_ && fs::exists(dir / "expert.ckpt") && fs::exists(dir / "summary.json")) {
      const auto ck = grad::load_checkpoint<float>(dir / "expert.ckpt");
      entry.policy = nets::Policy<float>::extract(ck.arch, ck.params);
      const auto s = json::parse(read_file(dir / "summary.json"));
      entry.best_reward = s.at("best_reward");
      entry.steps = s.at("steps");
    } else {
      auto sac_config = config_.sac_config();
      sac_config.augmentation = regime;
      sac_config.stop_reward = stop_threshold();
      if (regime != "weak") {
        // Comparison baselines get exactly the environment steps the weak expert used.
        sac_config.total_steps = expert(seed, "weak").steps;
        sac_config.stop_reward = 0.0;
      }
      const auto start = Clock::now();
      auto run = sac::train_expert(config_.task, config_.env, config_.architecture(), sac_config, seed, dir, &pool_,
                                   [&](const sac::CurveRow& r) {
                                     progress("expert " + regime + " seed " + std::to_string(seed) + " step " +
                                              std::to_string(r.step) + " reward " + fmt(r.episode_reward, 1));
                                   });
      entry.policy = nets::Policy<float>::extract(run.arch, run.state);
      for (const auto& r : run.curve) entry.best_reward = std::max(entry.best_reward, r.episode_reward);
      entry.steps = run.curve.empty() ? 0 : run.curve.back().step;
      write_json(dir / "summary.json",
                 {{"best_reward", entry.best_reward}, {"steps", entry.steps}, {"seconds", seconds_since(start)}});
    }
    return experts_.emplace(key, std::move(entry)).first->second;
  }

  struct StudentEntry {
    nets::Policy<float> policy;
    json stats;
  };

  /// Sequential W->S student distilled from the weak expert of `seed`.
  const StudentEntry& student(std::uint64_t seed, distill::Collection collection, std::size_t iterations) {
    const auto name = distill::collection_name(collection) + "-" + std::to_string(iterations);
    const auto key = name + "/" + std::to_string(seed);
    if (auto it = students_.find(key); it != students_.end()) return it->second;
    const fs::path dir = work_ / ("student-" + name) / ("seed" + std::to_string(seed));
    StudentEntry entry;
    if (reuse_ && fs::exists(dir / "student.ckpt") && fs::exists(dir / "summary.json")) {
      const auto ck = grad::load_checkpoint<float>(dir / "student.ckpt");
      entry.policy = nets::Policy<float>::extract(ck.arch, ck.params);
      entry.stats = json::parse(read_file(dir / "summary.json"));
    } else {
      const auto& teacher = expert(seed).policy;
      auto strategy = distill::StrategyConfig::secant();
      strategy.collection = collection;
      auto dcfg = config_.distill_config();
      dcfg.iterations = iterations;
      dcfg.log_every = 5000;
      const auto start = Clock::now();
      progress("distilling " + name + " seed " + std::to_string(seed));
      const auto reads_before = env::reward_reads();
      auto run = distill::run_distillation(teacher, config_.task, config_.env, strategy, dcfg, seed, &pool_,
                                           std::nullopt, dir);
      const auto reads = env::reward_reads() - reads_before;
      entry.policy = run.student;
      entry.stats = {{"seed_size", run.seed_size},
                     {"dataset_size", run.dataset_size},
                     {"capacity", dcfg.capacity},
                     {"iterations", iterations},
                     {"expert_checksum_before", run.expert_checksum_before},
                     {"expert_checksum_after", run.expert_checksum_after},
                     {"expert_checksum_now", teacher.params().checksum()},
                     {"student_env_steps", run.student_env_steps},
                     {"expert_env_steps", run.expert_env_steps},
                     {"reward_reads", reads},
                     {"final_loss", run.losses.empty() ? 0.0 : run.losses.back().second},
                     {"seconds", seconds_since(start)}};
      write_json(dir / "summary.json", entry.stats);
    }
    return students_.emplace(key, std::move(entry)).first->second;
  }

  eval::EvalReport evaluate(const std::string& name, const nets::Policy<float>& policy) {
    auto report = eval::evaluate_policy(name, policy, config_.task, config_.eval.variants, config_.env,
                                        config_.eval.episodes, config_.eval.seeds);
    eval_backward_calls_ += report.backward_calls;
    eval_parameter_writes_ += report.parameter_writes;
    ++evaluations_;
    return report;
  }

  std::uint64_t eval_backward_calls() const { return eval_backward_calls_; }
  std::uint64_t eval_parameter_writes() const { return eval_parameter_writes_; }
  std::size_t evaluations() const { return evaluations_; }
  std::size_t gate_iterations() const { return gate_iterations_; }
  const augment::DistractorPool& pool() const { return pool_; }

  static void progress(const std::string& line) { std::cerr << "[acceptance] " << line << std::endl; }

 private:
  fs::path work_;
  bool reuse_;
  std::size_t gate_iterations_;
  cli::ExperimentConfig config_;
  augment::DistractorPool pool_;
  std::optional<double> ceiling_;
  std::map<std::string, ExpertEntry> experts_;
  std::map<std::string, StudentEntry> students_;
  std::uint64_t eval_backward_calls_ = 0;
  std::uint64_t eval_parameter_writes_ = 0;
  std::size_t evaluations_ = 0;
};

// ---- criteria ----

Verdict check_suite(int id, const std::string& what, const std::vector<testing::CheckResult>& results,
                    double seconds) {
  std::size_t ok = 0;
  std::string failed;
  for (const auto& r : results) {
    if (r.passed) {
      ++ok;
    } else {
      failed += " " + r.name + "(" + r.detail + ")";
    }
  }
  Verdict v{id};
  v.passed = ok == results.size() && !results.empty() && seconds < 60.0;
  v.detail = what + " " + std::to_string(ok) + "/" + std::to_string(results.size()) + " in " + fmt(seconds, 1) +
             " s (limit 60 s)" + (failed.empty() ? "" : "; failed:" + failed);
  return v;
}

Verdict criterion_1() {
  const auto start = Clock::now();
  const auto results = testing::run_gradient_suite(100, 1e-4);
  return check_suite(1, "gradient checks,", results, seconds_since(start));
}

Verdict criterion_2() {
  const auto start = Clock::now();
  const auto results = testing::run_augment_suite();
  return check_suite(2, "augmentation properties,", results, seconds_since(start));
}

Verdict criterion_3(Acceptance& a) {
  const double threshold = a.stop_threshold();
  std::size_t reached = 0;
  std::ostringstream d;
  d << "oracle ceiling " << fmt(a.ceiling(), 1) << ", threshold " << fmt(threshold, 1) << "; best rewards";
  for (auto seed : a.config().seeds) {
    const auto& e = a.expert(seed);
    if (e.best_reward >= threshold) ++reached;
    d << ' ' << fmt(e.best_reward, 1) << '@' << e.steps;
  }
  d << "; " << reached << "/" << a.config().seeds.size() << " seeds reached (need 3 of 5)";
  Verdict v{3};
  v.passed = reached >= 3;
  v.detail = d.str();
  return v;
}

/// Observations from deterministic rollouts of `policy` on the clean train variant.
std::vector<Observation> clean_observations(const nets::Policy<float>& policy, const cli::ExperimentConfig& c,
                                            std::size_t count, std::uint64_t seed) {
  std::vector<Observation> out;
  auto env = eval::make_eval_env(c.task, "train", c.env, seed);
  while (out.size() < count) {
    auto obs = env.reset();
    while (out.size() < count) {
      out.push_back(obs);
      auto step = env.step(policy.act(obs));
      if (step.done) break;
      obs = std::move(step.observation);
    }
  }
  return out;
}

double mean_action_l2(const nets::Policy<float>& a, const nets::Policy<float>& b, const std::vector<Observation>& obs) {
  double total = 0.0;
  for (const auto& o : obs) {
    const auto x = a.act(o);
    const auto y = b.act(o);
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sq += (static_cast<double>(x[i]) - y[i]) * (static_cast<double>(x[i]) - y[i]);
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(obs.size());
}

struct SeedEval {
  eval::EvalReport expert;
  eval::EvalReport student;
};

Verdict criterion_4(Acceptance& a, const std::map<std::uint64_t, SeedEval>& evals, std::size_t iterations) {
  std::vector<double> l2, expert_train, student_train;
  std::ostringstream d;
  for (auto seed : a.config().seeds) {
    const auto& e = a.expert(seed).policy;
    const auto& s = a.student(seed, distill::Collection::dagger, iterations).policy;
    auto obs = clean_observations(e, a.config(), 500, mix_seed(seed, 0xa9a1ULL));
    auto visited = clean_observations(s, a.config(), 500, mix_seed(seed, 0xa9a2ULL));
    obs.insert(obs.end(), visited.begin(), visited.end());
    l2.push_back(mean_action_l2(s, e, obs));
    expert_train.push_back(evals.at(seed).expert.row("expert", "train").mean);
    student_train.push_back(evals.at(seed).student.row("student", "train").mean);
  }
  const double agreement = mean_of(l2);
  const double ratio = mean_of(student_train) / mean_of(expert_train);
  d << "mean action L2 " << fmt(agreement, 4) << " (limit 0.05), per seed";
  for (double x : l2) d << ' ' << fmt(x, 4);
  d << "; train reward student " << fmt(mean_of(student_train), 1) << " / expert " << fmt(mean_of(expert_train), 1)
    << " = " << fmt(ratio, 3) << " (need >= 0.9)";
  Verdict v{4};
  v.passed = agreement <= 0.05 && ratio >= 0.9;
  v.detail = d.str();
  return v;
}

Verdict criterion_5(Acceptance& a, const std::map<std::uint64_t, SeedEval>& evals) {
  std::ostringstream d;
  bool ok = true;
  for (const std::string variant : {"test-color", "test-dynamic"}) {
    std::vector<double> expert_ratio, student_ratio;
    for (auto seed : a.config().seeds) {
      const auto& ev = evals.at(seed);
      expert_ratio.push_back(ev.expert.row("expert", variant).mean /
                             std::max(1e-9, ev.expert.row("expert", "train").mean));
      student_ratio.push_back(ev.student.row("student", variant).mean /
                              std::max(1e-9, ev.student.row("student", "train").mean));
    }
    const double margin = mean_of(student_ratio) - mean_of(expert_ratio);
    ok = ok && margin >= 0.15;
    d << variant << ": student " << fmt(mean_of(student_ratio)) << " vs expert " << fmt(mean_of(expert_ratio))
      << " (margin " << fmt(margin) << ", need >= 0.15); ";
  }
  Verdict v{5};
  v.passed = ok;
  v.detail = d.str();
  return v;
}

Verdict criterion_6(Acceptance& a, std::size_t iterations) {
  const auto& c = a.config();
  const auto seed = c.seeds.front();
  const auto& student = a.student(seed, distill::Collection::dagger, iterations).policy;
  const auto& baseline = a.expert(seed, "none").policy;
  const int trials = 5;
  const auto cycle_seed = mix_seed(seed, 0xc7c1ULL);
  auto score = [&](const nets::Policy<float>& p) {
    std::vector<double> means;
    for (const std::string variant : {"test-color", "test-dynamic"}) {
      means.push_back(
          eval::cycle_trials(p, c.task, {"train", variant}, c.env, trials, cycle_seed, c.eval.cycle_samples).mean);
    }
    return means;
  };
  const auto s = score(student);
  const auto b = score(baseline);
  const double self = eval::cycle_trials(student, c.task, {"train", "train"}, c.env, trials, cycle_seed,
                                         c.eval.cycle_samples).mean;
  Verdict v{6};
  v.passed = mean_of(s) > mean_of(b) && self == 1.0;
  v.detail = "2-way consistency over " + std::to_string(trials) + " trials: student " + fmt(mean_of(s)) +
             " (color " + fmt(s[0]) + ", dynamic " + fmt(s[1]) + ") vs no-aug SAC " + fmt(mean_of(b)) + " (color " +
             fmt(b[0]) + ", dynamic " + fmt(b[1]) + "); self-pair " + fmt(self, 4);
  return v;
}

Verdict criterion_7(Acceptance& a, std::size_t iterations) {
  bool ok = true;
  std::ostringstream d;
  auto check = [&](const json& s, const std::string& tag) {
    const std::size_t seed_size = s.at("seed_size");
    const std::size_t n = s.at("iterations");
    const std::size_t cap = s.at("capacity");
    const std::size_t expected = std::min(seed_size + n, cap);
    const bool this_ok = s.at("expert_checksum_before") == s.at("expert_checksum_after") &&
                         s.at("expert_checksum_before") == s.at("expert_checksum_now") &&
                         s.at("reward_reads") == 0 && s.at("dataset_size") == expected &&
                         s.at("student_env_steps") == n;
    if (!this_ok) d << tag << " violated: " << s.dump() << "; ";
    ok = ok && this_ok;
  };
  for (auto seed : a.config().seeds) {
    check(a.student(seed, distill::Collection::dagger, iterations).stats, "seed " + std::to_string(seed));
  }
  // Uncapped run: the dataset must be exactly seed + n.
  const auto& uncapped = a.student(a.config().seeds.front(), distill::Collection::dagger, 500).stats;
  check(uncapped, "uncapped run");
  const std::size_t seed_size = uncapped.at("seed_size");
  d << "expert checksums unchanged, 0 reward reads, dataset = min(seed + n, capacity) over "
    << a.config().seeds.size() << " capped runs and one uncapped run (" << seed_size << " + 500 = "
    << uncapped.at("dataset_size").get<std::size_t>() << ")";
  Verdict v{7};
  v.passed = ok;
  v.detail = d.str();
  return v;
}

Verdict criterion_8(Acceptance& a, std::size_t iterations) {
  const auto& c = a.config();
  const auto& student = a.student(c.seeds.front(), distill::Collection::dagger, iterations).policy;
  const auto report = eval::measure_latency(student, c.task, c.env, 1000, 50, mix_seed(0x1a7ULL));
  const double arithmetic = mean_of(report.step_seconds);
  const bool mean_ok = report.step_seconds.size() == 1000 && report.warmup == 50 &&
                       std::abs(report.mean_seconds - arithmetic) <= 1e-12 * std::max(1.0, arithmetic);
  const bool pure = report.backward_calls == 0 && report.parameter_writes == 0 && a.eval_backward_calls() == 0 &&
                    a.eval_parameter_writes() == 0;
  Verdict v{8};
  v.passed = mean_ok && pure;
  v.detail = "latency mean " + fmt(report.mean_seconds * 1e3, 4) + " ms over " +
             std::to_string(report.step_seconds.size()) + " steps after 50 warmup (arithmetic mean " +
             fmt(arithmetic * 1e3, 4) + " ms); backward calls " + std::to_string(report.backward_calls) + " / " +
             std::to_string(a.eval_backward_calls()) + " across " + std::to_string(a.evaluations()) +
             " evaluations, parameter writes " + std::to_string(report.parameter_writes) + " / " +
             std::to_string(a.eval_parameter_writes());
  return v;
}

std::vector<std::string> csv_header(const fs::path& path) {
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) out.push_back(cell);
  return out;
}

std::size_t line_count(const fs::path& path) {
  const auto text = read_file(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

Verdict criterion_9(Acceptance& a, const fs::path& source_dir) {
  std::ostringstream d;
  bool ok = true;

  // Every ablation axis at smoke scale, twice: same tables, expected layout.
  auto smoke = cli::load_config(source_dir / "configs" / "smoke.ini");
  smoke.seeds = {1, 2};
  for (const std::string axis : {"augmentation", "strategy", "imitation", "parallel"}) {
    const auto cells = cli::axis_cells(axis, smoke);
    std::vector<std::string> expected{"task", "variant"};
    for (const auto& cell : cells) expected.push_back(cell.label);
    const auto dir = a.work() / "ablate-smoke";
    const auto first = cli::run_ablation(smoke, axis, dir / "run1");
    const auto second = cli::run_ablation(smoke, axis, dir / "run2");
    const auto t1 = dir / "run1" / (axis + "_table.csv");
    const auto t2 = dir / "run2" / (axis + "_table.csv");
    const bool same = read_file(t1) == read_file(t2) &&
                      read_file(dir / "run1" / (axis + "_long.csv")) == read_file(dir / "run2" / (axis + "_long.csv"));
    const bool layout = csv_header(t1) == expected && line_count(t1) == 1 + smoke.eval.variants.size() &&
                        first.rows.size() == cells.size() * smoke.eval.variants.size();
    ok = ok && same && layout;
    d << axis << " " << cells.size() << " cells " << (same ? "reproducible" : "NOT reproducible") << ", layout "
      << (layout ? "ok" : "wrong") << "; ";
  }

  // Imitation gate: DAgger >= max(expert-only, student-only) - 1 std on every variant.
  const auto n = a.gate_iterations();
  std::map<std::string, std::map<std::string, std::vector<double>>> rewards;  // collection -> variant -> seeds
  for (auto collection : {distill::Collection::dagger, distill::Collection::expert_only,
                          distill::Collection::student_only}) {
    const auto name = distill::collection_name(collection);
    for (auto seed : a.config().seeds) {
      const auto report = a.evaluate("student", a.student(seed, collection, n).policy);
      for (const auto& variant : a.config().eval.variants) {
        rewards[name][variant].push_back(report.row("student", variant).mean);
      }
    }
  }
  d << "imitation gate at " << n << " iterations:";
  for (const auto& variant : a.config().eval.variants) {
    const auto [dm, ds] = eval::mean_std(rewards["dagger"][variant]);
    const double e = mean_of(rewards["expert-only"][variant]);
    const double s = mean_of(rewards["student-only"][variant]);
    const bool pass = dm >= std::max(e, s) - ds;
    ok = ok && pass;
    d << ' ' << variant << " DAgger " << fmt(dm, 1) << "±" << fmt(ds, 1) << " vs expert-only " << fmt(e, 1)
      << ", student-only " << fmt(s, 1) << (pass ? "" : " (FAIL)") << ';';
  }
  Verdict v{9};
  v.passed = ok;
  v.detail = d.str();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria at desk scale"};
  fs::path work = "acceptance_work";
  bool reuse = false;
  std::size_t seeds = 5;
  std::size_t iterations = 30000;
  std::size_t gate_iterations = 10000;
  std::vector<int> only;
  app.add_option("--work", work, "Directory for models and reports");
  app.add_flag("--reuse", reuse, "Load models already present under --work instead of retraining");
  app.add_option("--seeds", seeds, "Number of seeds")->check(CLI::Range(1, 20));
  app.add_option("--iterations", iterations, "Distillation iterations of the main students");
  app.add_option("--gate-iterations", gate_iterations, "Distillation iterations of the imitation gate");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  try {
    if (!reuse && fs::exists(work)) fs::remove_all(work);
    fs::create_directories(work);
    const auto start = Clock::now();
    Acceptance a(work, reuse, seeds, gate_iterations);
    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

    std::vector<Verdict> verdicts;
    auto record = [&](Verdict v) {
      std::cout << "criterion " << v.id << ": " << (v.skipped ? "SKIP" : v.passed ? "PASS" : "FAIL") << " ("
                << v.detail << ")" << std::endl;
      verdicts.push_back(std::move(v));
    };
    auto skip = [&](int id) { record(Verdict{id, false, true, "not selected"}); };

    wanted(1) ? record(criterion_1()) : skip(1);
    wanted(2) ? record(criterion_2()) : skip(2);
    wanted(3) ? record(criterion_3(a)) : skip(3);

    std::map<std::uint64_t, SeedEval> evals;
    if (wanted(4) || wanted(5)) {
      for (auto seed : a.config().seeds) {
        evals[seed].expert = a.evaluate("expert", a.expert(seed).policy);
        evals[seed].student = a.evaluate("student", a.student(seed, distill::Collection::dagger, iterations).policy);
        evals[seed].student.write_csv(work / ("eval-seed" + std::to_string(seed) + "-student.csv"));
        evals[seed].expert.write_csv(work / ("eval-seed" + std::to_string(seed) + "-expert.csv"));
      }
    }
    wanted(4) ? record(criterion_4(a, evals, iterations)) : skip(4);
    wanted(5) ? record(criterion_5(a, evals)) : skip(5);
    wanted(6) ? record(criterion_6(a, iterations)) : skip(6);
    wanted(7) ? record(criterion_7(a, iterations)) : skip(7);
    wanted(8) ? record(criterion_8(a, iterations)) : skip(8);
    wanted(9) ? record(criterion_9(a, SECANT_SOURCE_DIR)) : skip(9);

    json summary = json::array();
    bool all = true;
    for (const auto& v : verdicts) {
      summary.push_back({{"criterion", v.id}, {"passed", v.passed}, {"skipped", v.skipped}, {"detail", v.detail}});
      all = all && (v.passed || v.skipped);
    }
    write_json(work / "acceptance.json", {{"criteria", summary}, {"seconds", seconds_since(start)}});
    std::cout << "acceptance " << (all ? "PASS" : "FAIL") << " in " << fmt(seconds_since(start) / 60.0, 1)
              << " min" << std::endl;
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << std::endl;
    return 2;
  }
}
