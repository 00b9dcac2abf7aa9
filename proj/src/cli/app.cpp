#include "secant/cli/app.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "secant/augment/augment.hpp"
#include "secant/eval/eval.hpp"
#include "secant/grad/checkpoint.hpp"
#include "secant/io/png.hpp"

namespace secant::cli {

namespace fs = std::filesystem;

std::vector<distill::MatrixCell> axis_cells(const std::string& axis, const ExperimentConfig& config) {
  using distill::MatrixCell;
  using distill::StrategyConfig;
  std::vector<MatrixCell> cells;
  StrategyConfig secant = StrategyConfig::secant();
  secant.collection = config.strategy.collection;
  if (axis == "augmentation") {
    for (const char* tag : {"Cc", "Cv", "G", "I", "M", "Cm", "Combo1", "Combo2", "Combo3"}) {
      cells.push_back({tag, secant, std::string(tag)});
    }
  } else if (axis == "strategy") {
    for (const char* label : {"W-only", "S-only", "no-aug", "W->W", "W->S", "S->W", "S->S", "N->W", "N->S"}) {
      cells.push_back(distill::cell_from_label(label));
    }
  } else if (axis == "imitation") {
    const std::pair<const char*, distill::Collection> cols[] = {{"DAgger", distill::Collection::dagger},
                                                               {"Expert", distill::Collection::expert_only},
                                                               {"Student", distill::Collection::student_only}};
    for (const auto& [name, collection] : cols) {
      StrategyConfig s = StrategyConfig::secant();
      s.collection = collection;
      cells.push_back({name, s, std::nullopt});
    }
  } else if (axis == "parallel") {
    cells.push_back({"SECANT", secant, std::nullopt});
    StrategyConfig p = secant;
    p.schedule = distill::Schedule::parallel;
    cells.push_back({"SECANT-Parallel", p, std::nullopt});
  } else {
    throw UsageError("unknown ablation axis '" + axis + "' (expected augmentation, strategy, imitation or parallel)");
  }
  if (!config.ablate.cells.empty()) {
    std::vector<MatrixCell> picked;
    for (const auto& want : config.ablate.cells) {
      auto it = std::find_if(cells.begin(), cells.end(), [&](const MatrixCell& c) { return c.label == want; });
      if (it == cells.end()) throw ConfigError("[ablate] cells: '" + want + "' is not a cell of axis " + axis);
      picked.push_back(*it);
    }
    cells = std::move(picked);
  }
  return cells;
}

namespace {

augment::DistractorPool make_pool(const ExperimentConfig& c) {
  return augment::load_distractor_pool(c.distractor_dir, c.env.height, c.env.width, c.distractor_fallback,
                                       c.allow_fallback, mix_seed(c.seeds.front(), 0xd15ULL));
}

std::string pm(double mean, double std) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << mean << "±" << std;
  return s.str();
}

}  // namespace

void write_ablation_table(const fs::path& path, const AblationResult& result) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "task,variant";
  for (const auto& c : result.columns) f << ',' << c;
  f << '\n';
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& r : result.rows) {
    std::pair<std::string, std::string> k{r.task, r.variant};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  for (const auto& [task, variant] : keys) {
    f << task << ',' << variant;
    for (const auto& col : result.columns) {
      auto it = std::find_if(result.rows.begin(), result.rows.end(), [&](const distill::MatrixRow& r) {
        return r.task == task && r.variant == variant && r.strategy == col;
      });
      f << ',' << (it == result.rows.end() ? std::string() : pm(it->mean_reward, it->std));
    }
    f << '\n';
  }
}

AblationResult run_ablation(const ExperimentConfig& config, const std::string& axis, const fs::path& out_dir,
                            const std::function<void(const std::string&)>& log) {
  const auto cells = axis_cells(axis, config);
  const auto pool = make_pool(config);
  distill::MatrixSettings s;
  s.task = config.task;
  s.env_config = config.env;
  s.arch = config.architecture();
  s.sac = config.sac_config();
  s.distill = config.distill_config();
  s.seeds = config.seeds;
  s.variants = config.eval.variants;
  s.eval_episodes = config.eval.episodes;
  s.pool = &pool;
  s.workers = config.workers;
  s.out_dir = out_dir / "models";
  s.log = log;
  AblationResult result;
  result.axis = axis;
  for (const auto& c : cells) result.columns.push_back(c.label);
  result.rows = distill::run_strategy_matrix(s, cells);
  fs::create_directories(out_dir);
  distill::write_matrix_csv(out_dir / (axis + "_long.csv"), result.rows);
  write_ablation_table(out_dir / (axis + "_table.csv"), result);
  return result;
}

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::string expert;
  std::string student;
  std::string axis;
  bool baselines = false;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (o.seed) c.seeds = {*o.seed};
  if (o.workers) {
    if (*o.workers < 1) throw UsageError("--workers must be >= 1");
    c.workers = *o.workers;
  }
  c.validate();
  return c;
}

nets::Policy<float> load_policy(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("checkpoint '" + path + "' does not exist");
  auto ck = grad::load_checkpoint<float>(path);
  return nets::Policy<float>::extract(ck.arch, ck.params);
}

void require_geometry(const nets::Policy<float>& p, const ExperimentConfig& c, const std::string& what) {
  if (!(p.arch().in_channels == 3 * c.env.frame_stack && p.arch().height == c.env.height &&
        p.arch().width == c.env.width && p.arch().action_dim == c.architecture().action_dim)) {
    throw std::runtime_error(what + " checkpoint architecture (" + std::to_string(p.arch().in_channels) + "x" +
                             std::to_string(p.arch().height) + "x" + std::to_string(p.arch().width) + ", action dim " +
                             std::to_string(p.arch().action_dim) + ") does not match the configured environment");
  }
}

std::vector<std::pair<std::string, nets::Policy<float>>> requested_policies(const Options& o,
                                                                            const ExperimentConfig& c) {
  std::vector<std::pair<std::string, nets::Policy<float>>> out;
  if (!o.expert.empty()) out.emplace_back("expert", load_policy(o.expert));
  if (!o.student.empty()) out.emplace_back("student", load_policy(o.student));
  if (out.empty()) throw UsageError("pass --expert and/or --student with a checkpoint path");
  for (const auto& [name, p] : out) require_geometry(p, c, name);
  return out;
}

std::mutex print_mutex;
void say(const std::string& line) {
  std::lock_guard lock(print_mutex);
  std::cout << line << std::endl;
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed" + std::to_string(seed)); }

int cmd_train_expert(const Options& o) {
  const auto c = resolve(o);
  const fs::path out = o.out.empty() ? "runs/train-expert" : o.out;
  echo_config(c, out);
  const auto pool = make_pool(c);
  distill::parallel_for(c.seeds.size(), c.workers, [&](std::size_t i) {
    const auto seed = c.seeds[i];
    auto run = sac::train_expert(c.task, c.env, c.architecture(), c.sac_config(), seed, seed_dir(out, seed), &pool,
                                 [&](const sac::CurveRow& r) {
                                   std::ostringstream s;
                                   s << "seed " << seed << " step " << r.step << " eval_reward " << std::fixed
                                     << std::setprecision(2) << r.episode_reward << " alpha " << std::setprecision(4)
                                     << r.alpha;
                                   say(s.str());
                                 });
    say("seed " + std::to_string(seed) + " wrote " + (seed_dir(out, seed) / "expert.ckpt").string());
  });
  return kExitOk;
}

int cmd_distill(const Options& o) {
  const auto c = resolve(o);
  if (c.strategy.single_stage()) throw ConfigError("[distill] strategy: '" + c.strategy.label() + "' has no stage 2");
  const fs::path out = o.out.empty() ? "runs/distill" : o.out;
  const auto pool = make_pool(c);
  std::optional<nets::Policy<float>> expert;
  if (c.strategy.schedule == distill::Schedule::sequential) {
    if (o.expert.empty()) throw UsageError("distill needs --expert <checkpoint>");
    expert = load_policy(o.expert);
    require_geometry(*expert, c, "expert");
  }
  echo_config(c, out);
  distill::parallel_for(c.seeds.size(), c.workers, [&](std::size_t i) {
    const auto seed = c.seeds[i];
    if (expert) {
      auto run = distill::run_distillation(*expert, c.task, c.env, c.strategy, c.distill_config(), seed, &pool,
                                           std::nullopt, seed_dir(out, seed));
      say("seed " + std::to_string(seed) + " final loss " +
          (run.losses.empty() ? std::string("n/a") : std::to_string(run.losses.back().second)) + ", dataset " +
          std::to_string(run.dataset_size));
    } else {
      distill::run_parallel_variant(c.task, c.env, c.architecture(), c.sac_config(), c.distill_config(), c.strategy,
                                    seed, &pool, seed_dir(out, seed));
    }
    say("seed " + std::to_string(seed) + " wrote " + (seed_dir(out, seed) / "student.ckpt").string());
  });
  return kExitOk;
}

int cmd_evaluate(const Options& o) {
  const auto c = resolve(o);
  const fs::path out = o.out.empty() ? "runs/evaluate" : o.out;
  const auto policies = requested_policies(o, c);
  echo_config(c, out);
  std::vector<eval::EvalReport> reports;
  for (const auto& [name, p] : policies) {
    reports.push_back(eval::evaluate_policy(name, p, c.task, c.eval.variants, c.env, c.eval.episodes, c.eval.seeds));
  }
  if (o.baselines) {
    const int d = c.architecture().action_dim;
    const auto task = c.task;
    reports.push_back(eval::evaluate_policy("random", eval::random_actor(d, mix_seed(c.eval.seeds.front(), 0xbadULL)),
                                            task, c.eval.variants, c.env, c.eval.episodes, c.eval.seeds));
  }
  std::ofstream csv(out / "eval.csv");
  csv << "policy,task,variant,seed,mean_reward\n" << std::setprecision(10);
  nlohmann::json summary;
  summary["task"] = env::task_name(c.task);
  summary["rows"] = nlohmann::json::array();
  for (const auto& r : reports) {
    if (r.backward_calls != 0 || r.parameter_writes != 0) {
      throw std::logic_error("evaluation touched the tape or parameters");
    }
    for (const auto& row : r.rows) {
      for (std::size_t k = 0; k < row.seeds.size(); ++k) {
        csv << row.policy << ',' << r.task << ',' << row.variant << ',' << row.seeds[k] << ',' << row.seed_means[k]
            << '\n';
      }
      summary["rows"].push_back({{"policy", row.policy},
                                 {"variant", row.variant},
                                 {"mean_reward", row.mean},
                                 {"std", row.std},
                                 {"seeds", row.seeds.size()},
                                 {"episodes_per_seed", row.episodes_per_seed}});
      std::ostringstream s;
      s << row.policy << " " << row.variant << " " << pm(row.mean, row.std);
      say(s.str());
    }
  }
  std::ofstream(out / "eval.json") << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_cycle(const Options& o) {
  const auto c = resolve(o);
  if (c.eval.cycle_variants.size() < 2 || c.eval.cycle_variants.size() > 3) {
    throw ConfigError("[eval] cycle_variants: cycle consistency needs 2 or 3 trajectories, got " +
                      std::to_string(c.eval.cycle_variants.size()));
  }
  const fs::path out = o.out.empty() ? "runs/cycle" : o.out;
  const auto policies = requested_policies(o, c);
  echo_config(c, out);
  nlohmann::json j;
  j["variants"] = c.eval.cycle_variants;
  j["samples"] = c.eval.cycle_samples;
  for (const auto& [name, p] : policies) {
    const auto rep = eval::cycle_trials(p, c.task, c.eval.cycle_variants, c.env, c.eval.cycle_trials,
                                        c.seeds.front(), static_cast<std::size_t>(c.eval.cycle_samples));
    j[name] = {{"trials", rep.trial_scores}, {"mean", rep.mean}, {"std", rep.std}};
    std::vector<eval::Trajectory> trajs;
    for (const auto& v : c.eval.cycle_variants) {
      trajs.push_back(eval::collect_trajectory(p, c.task, v, c.env, mix_seed(c.seeds.front(), 0), v));
    }
    eval::export_embeddings(out / (name + "_embeddings.csv"), p, trajs);
    std::ostringstream s;
    s << name << " cycle consistency " << std::fixed << std::setprecision(3) << rep.mean << " (std " << rep.std << ")";
    say(s.str());
  }
  std::ofstream(out / "cycle.json") << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_saliency(const Options& o) {
  const auto c = resolve(o);
  const fs::path out = o.out.empty() ? "runs/saliency" : o.out;
  const auto policies = requested_policies(o, c);
  echo_config(c, out);
  for (const auto& [name, p] : policies) {
    for (const auto& variant : c.eval.variants) {
      auto traj = eval::collect_trajectory(p, c.task, variant, c.env, c.seeds.front());
      const auto& obs = traj.observations[std::min<std::size_t>(10, traj.observations.size() - 1)];
      const auto map = eval::saliency_map(p, obs, c.eval.saliency_patch, c.eval.saliency_sigma, c.seeds.front());
      eval::write_saliency_csv(out / (name + "_" + variant + ".csv"), map);
      io::write_png(out / (name + "_" + variant + ".png"), eval::saliency_overlay(map, obs));
      say(name + " " + variant + " saliency " + std::to_string(map.rows) + "x" + std::to_string(map.cols));
    }
  }
  return kExitOk;
}

int cmd_latency(const Options& o) {
  const auto c = resolve(o);
  const fs::path out = o.out.empty() ? "runs/latency" : o.out;
  const auto policies = requested_policies(o, c);
  echo_config(c, out);
  for (const auto& [name, p] : policies) {
    const auto rep = eval::measure_latency(p, c.task, c.env, c.eval.latency_steps, c.eval.latency_warmup,
                                           c.seeds.front());
    eval::write_latency_json(out / (name + "_latency.json"), rep);
    std::ostringstream s;
    s << name << " latency " << std::scientific << std::setprecision(3) << rep.mean_seconds << " s/action over "
      << rep.steps << " steps";
    say(s.str());
  }
  return kExitOk;
}

int cmd_ablate(const Options& o) {
  auto c = resolve(o);
  if (!o.axis.empty()) c.ablate.axis = o.axis;
  c.validate();
  const fs::path out = o.out.empty() ? "runs/ablate" : o.out;
  echo_config(c, out);
  const auto result = run_ablation(c, c.ablate.axis, out, say);
  for (const auto& r : result.rows) say(r.strategy + " " + r.variant + " " + pm(r.mean_reward, r.std));
  return kExitOk;
}

int cmd_render_dump(const Options& o) {
  const auto c = resolve(o);
  const fs::path out = o.out.empty() ? "runs/render-dump" : o.out;
  echo_config(c, out);
  auto newest = [](const Observation& obs) {
    Observation f(3, obs.height, obs.width);
    std::copy(obs.data.end() - static_cast<std::ptrdiff_t>(3 * obs.plane()), obs.data.end(), f.data.begin());
    return f;
  };
  const std::uint64_t seed = c.seeds.front();
  Observation sample;
  for (const auto& variant : c.eval.variants) {
    fs::create_directories(out / variant);
    auto environment = eval::make_eval_env(c.task, variant, c.env, seed);
    Observation obs = environment.reset();
    for (int i = 0; i < 8; ++i) {
      io::write_png(out / variant / ("frame_" + std::to_string(i) + ".png"), newest(obs));
      if (sample.data.empty() && variant == c.eval.variants.front() && i == 4) sample = obs;
      auto r = environment.step(env::scripted_action(c.task, environment.state()));
      if (r.done) break;
      obs = std::move(r.observation);
    }
  }
  if (sample.data.empty()) sample = eval::make_eval_env(c.task, "train", c.env, seed).reset();
  const auto pool = make_pool(c);
  fs::create_directories(out / "augment");
  Rng rng(mix_seed(seed, 0xa06ULL));
  for (auto kind : {augment::OpKind::crop, augment::OpKind::cutout_color, augment::OpKind::random_conv,
                    augment::OpKind::gaussian, augment::OpKind::impulse, augment::OpKind::mixup,
                    augment::OpKind::cutmix}) {
    const auto op = augment::sample_op(kind, c.augment, sample.height, sample.width, &pool, rng);
    io::write_png(out / "augment" / (augment::op_name(kind) + ".png"), newest(augment::apply(op, sample, &pool)));
  }
  fs::create_directories(out / "distractors");
  for (std::size_t i = 0; i < std::min<std::size_t>(4, pool.count()); ++i) {
    io::write_png(out / "distractors" / ("image_" + std::to_string(i) + ".png"), pool.images[i]);
  }
  say("wrote frames, augmentation samples and distractors to " + out.string());
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Two-stage robust visual policy training: SAC expert, augmented student distillation, evaluation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Experiment INI file (defaults apply when omitted)");
    sub->add_option("--seed", o.seed, "Run a single seed instead of the configured list");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--workers", o.workers, "Parallel seed workers");
  };
  auto add_policies = [&](CLI::App* sub) {
    sub->add_option("--expert", o.expert, "Expert checkpoint");
    sub->add_option("--student", o.student, "Student checkpoint");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
    bool policies;
  };
  const Command commands[] = {
      {"train-expert", "Stage 1: SAC with weak augmentation", cmd_train_expert, false},
      {"distill", "Stage 2: distill a student from --expert", cmd_distill, true},
      {"evaluate", "Zero-shot reward on the configured variants", cmd_evaluate, true},
      {"cycle", "Cycle consistency across variant trajectories", cmd_cycle, true},
      {"saliency", "Perturbation saliency maps", cmd_saliency, true},
      {"latency", "Inference latency per action", cmd_latency, true},
      {"ablate", "Ablation sweeps emitting table-shaped CSVs", cmd_ablate, false},
      {"render-dump", "Write rendered frames, augmentation samples and distractors", cmd_render_dump, false},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub);
    if (cmd.policies) add_policies(sub);
    if (std::string(cmd.name) == "ablate") {
      sub->add_option("--axis", o.axis, "augmentation | strategy | imitation | parallel");
    }
    if (std::string(cmd.name) == "evaluate") {
      sub->add_flag("--baselines", o.baselines, "Also evaluate a uniform-random policy");
    }
    subs.emplace_back(sub, &cmd);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      return cmd->run(o);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"secant"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace secant::cli
