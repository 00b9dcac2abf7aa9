#include "secant/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "secant/grad/tensor.hpp"

namespace secant::eval {

using grad::NoGradGuard;
using grad::tape_counters;

namespace {

std::uint64_t variant_seed(std::uint64_t seed) { return mix_seed(seed, 0xa77e57ULL); }
std::uint64_t env_seed(std::uint64_t seed) { return mix_seed(seed, 0xe7a1ULL); }

}  // namespace

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - m) * (v - m);
  return {m, std::sqrt(var / static_cast<double>(values.size()))};
}

const VariantResult& EvalReport::row(const std::string& policy, const std::string& variant) const {
  for (const auto& r : rows) {
    if (r.policy == policy && r.variant == variant) return r;
  }
  throw std::out_of_range("no report row for " + policy + " / " + variant);
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "policy,task,variant,mean_reward,std,seeds,episodes_per_seed\n" << std::setprecision(10);
  for (const auto& r : rows) {
    f << r.policy << ',' << task << ',' << r.variant << ',' << r.mean << ',' << r.std << ',' << r.seeds.size() << ','
      << r.episodes_per_seed << '\n';
  }
}

void EvalReport::write_json(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["task"] = task;
  j["backward_calls"] = backward_calls;
  j["parameter_writes"] = parameter_writes;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"policy", r.policy},
                         {"variant", r.variant},
                         {"mean_reward", r.mean},
                         {"std", r.std},
                         {"seeds", r.seeds},
                         {"seed_means", r.seed_means},
                         {"episodes_per_seed", r.episodes_per_seed}});
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

env::PixelEnv make_eval_env(env::TaskKind task, const std::string& variant, const env::EnvConfig& env_config,
                            std::uint64_t seed) {
  return env::PixelEnv(task, env::VariantSpec::from_name(variant, variant_seed(seed)), env_config, env_seed(seed));
}

EvalReport evaluate_policy(const std::string& policy_name, const ActionFn& act, env::TaskKind task,
                           const std::vector<std::string>& variants, const env::EnvConfig& env_config,
                           int episodes_per_seed, const std::vector<std::uint64_t>& seeds) {
  if (episodes_per_seed < 1) throw std::invalid_argument("episodes per seed must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("evaluation needs at least one seed");
  const auto before = tape_counters();
  EvalReport report;
  report.task = env::task_name(task);
  for (const auto& variant : variants) {
    VariantResult row;
    row.policy = policy_name;
    row.variant = variant;
    row.seeds = seeds;
    row.episodes_per_seed = episodes_per_seed;
    for (std::uint64_t seed : seeds) {
      auto environment = make_eval_env(task, variant, env_config, seed);
      std::vector<double> returns;
      for (int e = 0; e < episodes_per_seed; ++e) returns.push_back(run_episode(environment, act));
      row.seed_means.push_back(mean_std(returns).first);
    }
    std::tie(row.mean, row.std) = mean_std(row.seed_means);
    report.rows.push_back(std::move(row));
  }
  report.backward_calls = tape_counters().backward_calls - before.backward_calls;
  report.parameter_writes = tape_counters().parameter_writes - before.parameter_writes;
  return report;
}

ActionFn deterministic_actor(const nets::Policy<float>& policy) {
  return [&policy](const Observation& obs) { return policy.act(obs); };
}

ActionFn random_actor(int action_dim, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng, action_dim](const Observation&) {
    std::vector<float> a(static_cast<std::size_t>(action_dim));
    for (auto& v : a) v = static_cast<float>(rng->uniform(-1.0, 1.0));
    return a;
  };
}

EvalReport evaluate_policy(const std::string& policy_name, const nets::Policy<float>& policy, env::TaskKind task,
                           const std::vector<std::string>& variants, const env::EnvConfig& env_config,
                           int episodes_per_seed, const std::vector<std::uint64_t>& seeds) {
  const auto& arch = policy.arch();
  env::PixelEnv probe(task, env::VariantSpec::train(), env_config, 0);
  if (arch.in_channels != 3 * env_config.frame_stack || arch.height != env_config.height ||
      arch.width != env_config.width || arch.action_dim != probe.action_dim()) {
    throw std::invalid_argument("policy architecture does not match the evaluation environment");
  }
  return evaluate_policy(policy_name, deterministic_actor(policy), task, variants, env_config, episodes_per_seed,
                         seeds);
}

std::vector<std::size_t> stride_indices(std::size_t length, std::size_t samples) {
  if (samples == 0 || samples > length) {
    throw std::invalid_argument("cannot take " + std::to_string(samples) + " samples from a trajectory of length " +
                                std::to_string(length));
  }
  std::vector<std::size_t> idx(samples);
  if (samples == 1) return idx;
  for (std::size_t i = 0; i < samples; ++i) {
    idx[i] = static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(length - 1) /
                                                   static_cast<double>(samples - 1)));
  }
  return idx;
}

FeatureSequence subsample(const FeatureSequence& sequence, std::size_t samples) {
  FeatureSequence out;
  for (std::size_t i : stride_indices(sequence.size(), samples)) out.push_back(sequence[i]);
  return out;
}

std::size_t nearest(const Feature& query, const FeatureSequence& candidates, std::size_t hint) {
  if (candidates.empty()) throw std::invalid_argument("nearest neighbour over an empty set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  auto gap = [hint](std::size_t j) { return j > hint ? j - hint : hint - j; };
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j].size() != query.size()) throw std::invalid_argument("embedding dimensions differ");
    double d = 0.0;
    for (std::size_t k = 0; k < query.size(); ++k) {
      const double diff = static_cast<double>(query[k]) - candidates[j][k];
      d += diff * diff;
    }
    if (d < best_d || (d == best_d && gap(j) < gap(best))) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

namespace {

void require_length(const FeatureSequence& s) {
  if (s.size() < 2) throw std::invalid_argument("cycle consistency needs trajectories of length >= 2");
}

bool within_one(std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= 1; }

}  // namespace

double cycle_consistency(const FeatureSequence& u, const FeatureSequence& v) {
  require_length(u);
  require_length(v);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const std::size_t j = nearest(u[i], v, i);
    if (within_one(i, nearest(v[j], u, j))) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(u.size());
}

double cycle_consistency(const FeatureSequence& u, const FeatureSequence& v, const FeatureSequence& w) {
  require_length(u);
  require_length(v);
  require_length(w);
  auto round_trip = [](const FeatureSequence& a, const FeatureSequence& b, const FeatureSequence& c, std::size_t i) {
    const std::size_t j = nearest(a[i], b, i);
    const std::size_t k = nearest(b[j], c, j);
    return nearest(c[k], a, k);
  };
  std::size_t ok = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (within_one(i, round_trip(u, v, w, i)) && within_one(i, round_trip(u, w, v, i))) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(u.size());
}

double cycle_consistency_sampled(const FeatureSequence& u, const FeatureSequence& v, std::size_t samples) {
  require_length(u);
  require_length(v);
  return cycle_consistency(subsample(u, samples), subsample(v, samples));
}

double cycle_consistency_sampled(const FeatureSequence& u, const FeatureSequence& v, const FeatureSequence& w,
                                 std::size_t samples) {
  require_length(u);
  require_length(v);
  require_length(w);
  return cycle_consistency(subsample(u, samples), subsample(v, samples), subsample(w, samples));
}

Trajectory collect_trajectory(const nets::Policy<float>& policy, env::TaskKind task, const std::string& variant,
                              const env::EnvConfig& env_config, std::uint64_t seed, const std::string& id) {
  Trajectory t;
  t.id = id;
  t.variant = variant;
  env::PixelEnv environment(task, env::VariantSpec::from_name(variant, variant_seed(seed)), env_config,
                            env_seed(seed));
  Observation obs = environment.reset();
  while (true) {
    t.observations.push_back(obs);
    auto result = environment.step(policy.act(obs));
    if (result.done) break;
    obs = std::move(result.observation);
  }
  return t;
}

FeatureSequence embed(const nets::Policy<float>& policy, const std::vector<Observation>& observations) {
  NoGradGuard no_grad;
  FeatureSequence out;
  constexpr std::size_t chunk = 64;
  for (std::size_t start = 0; start < observations.size(); start += chunk) {
    const std::size_t n = std::min(chunk, observations.size() - start);
    auto f = policy.features(to_tensor<float>(std::span<const Observation>(observations.data() + start, n)));
    const std::size_t d = f.dim(1);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(f.raw() + i * d, f.raw() + (i + 1) * d);
  }
  return out;
}

CycleReport cycle_trials(const nets::Policy<float>& policy, env::TaskKind task,
                         const std::vector<std::string>& variants, const env::EnvConfig& env_config, int trials,
                         std::uint64_t seed, std::size_t samples) {
  if (variants.size() != 2 && variants.size() != 3) {
    throw std::invalid_argument("cycle consistency compares 2 or 3 variants");
  }
  if (trials < 1) throw std::invalid_argument("cycle consistency needs at least one trial");
  CycleReport report;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = mix_seed(seed, static_cast<std::uint64_t>(t));
    std::vector<FeatureSequence> seqs;
    for (const auto& v : variants) {
      seqs.push_back(embed(policy, collect_trajectory(policy, task, v, env_config, trial_seed).observations));
    }
    report.trial_scores.push_back(seqs.size() == 2 ? cycle_consistency_sampled(seqs[0], seqs[1], samples)
                                                   : cycle_consistency_sampled(seqs[0], seqs[1], seqs[2], samples));
  }
  std::tie(report.mean, report.std) = mean_std(report.trial_scores);
  return report;
}

SaliencyMap saliency_map(const ActionFn& act, const Observation& obs, int patch, double sigma, std::uint64_t seed) {
  if (patch < 1) throw std::invalid_argument("saliency patch must be >= 1");
  if (!(sigma >= 0)) throw std::invalid_argument("saliency sigma must be >= 0");
  SaliencyMap map;
  map.patch = patch;
  map.rows = (obs.height + patch - 1) / patch;
  map.cols = (obs.width + patch - 1) / patch;
  map.values.assign(static_cast<std::size_t>(map.rows) * map.cols, 0.0);
  const auto base = act(obs);
  Rng rng(seed);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      Observation perturbed = obs;
      for (int ch = 0; ch < obs.channels; ++ch) {
        for (int y = r * patch; y < std::min(obs.height, (r + 1) * patch); ++y) {
          for (int x = c * patch; x < std::min(obs.width, (c + 1) * patch); ++x) {
            float& p = perturbed.at(ch, y, x);
            p = std::clamp(static_cast<float>(p + rng.normal(0.0, sigma)), 0.0f, 1.0f);
          }
        }
      }
      const auto a = act(perturbed);
      double d = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) d += (static_cast<double>(a[k]) - base[k]) * (a[k] - base[k]);
      map.values[static_cast<std::size_t>(r) * map.cols + c] = std::sqrt(d);
    }
  }
  return map;
}

SaliencyMap saliency_map(const nets::Policy<float>& policy, const Observation& obs, int patch, double sigma,
                         std::uint64_t seed) {
  return saliency_map(deterministic_actor(policy), obs, patch, sigma, seed);
}

void write_saliency_csv(const std::filesystem::path& path, const SaliencyMap& map) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << std::setprecision(10);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) f << (c ? "," : "") << map.at(r, c);
    f << '\n';
  }
}

Observation saliency_overlay(const SaliencyMap& map, const Observation& obs) {
  if (obs.channels < 3) throw std::invalid_argument("overlay needs an RGB frame");
  const double peak = map.values.empty() ? 0.0 : *std::max_element(map.values.begin(), map.values.end());
  Observation out(3, obs.height, obs.width);
  const int first = obs.channels - 3;
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      const double s = peak > 0 ? map.at(y / map.patch, x / map.patch) / peak : 0.0;
      for (int c = 0; c < 3; ++c) {
        const double base = obs.at(first + c, y, x);
        const double tint = c == 0 ? 1.0 : 0.0;
        out.at(c, y, x) = static_cast<float>((1 - 0.6 * s) * base + 0.6 * s * tint);
      }
    }
  }
  return out;
}

void export_embeddings(const std::filesystem::path& path, const nets::Policy<float>& policy,
                       const std::vector<Trajectory>& trajectories) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "trajectory,step,variant";
  for (int k = 0; k < policy.arch().feature_dim; ++k) f << ",f" << k;
  f << '\n' << std::setprecision(9);
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const auto& traj = trajectories[t];
    const auto features = embed(policy, traj.observations);
    const std::string id = traj.id.empty() ? std::to_string(t) : traj.id;
    for (std::size_t s = 0; s < features.size(); ++s) {
      f << id << ',' << s << ',' << traj.variant;
      for (float v : features[s]) f << ',' << v;
      f << '\n';
    }
  }
}

LatencyReport measure_latency(const nets::Policy<float>& policy, env::TaskKind task, const env::EnvConfig& env_config,
                              std::size_t steps, std::size_t warmup, std::uint64_t seed) {
  if (steps == 0) throw std::invalid_argument("latency needs at least one timed step");
  env::PixelEnv environment(task, env::VariantSpec::train(), env_config, seed);
  constexpr std::size_t kPoolSize = 64;
  std::vector<Observation> pool;
  Rng rng(mix_seed(seed, 0x1a7ULL));
  Observation obs = environment.reset();
  std::vector<float> action(static_cast<std::size_t>(environment.action_dim()));
  while (pool.size() < kPoolSize) {
    pool.push_back(obs);
    for (auto& a : action) a = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto result = environment.step(action);
    obs = result.done ? environment.reset() : std::move(result.observation);
  }

  const auto before = tape_counters();
  LatencyReport report;
  report.steps = steps;
  report.warmup = warmup;
  report.step_seconds.reserve(steps);
  volatile float sink = 0.0f;
  for (std::size_t i = 0; i < warmup + steps; ++i) {
    const Observation& o = pool[i % pool.size()];
    const auto t0 = std::chrono::steady_clock::now();
    const auto a = policy.act(o);
    const auto t1 = std::chrono::steady_clock::now();
    sink = sink + a[0];
    if (i >= warmup) report.step_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  double total = 0.0;
  for (double s : report.step_seconds) total += s;
  report.mean_seconds = total / static_cast<double>(report.step_seconds.size());
  report.backward_calls = tape_counters().backward_calls - before.backward_calls;
  report.parameter_writes = tape_counters().parameter_writes - before.parameter_writes;
  return report;
}

void write_latency_json(const std::filesystem::path& path, const LatencyReport& report) {
  nlohmann::json j{{"steps", report.steps},
                   {"warmup", report.warmup},
                   {"mean_seconds_per_action", report.mean_seconds},
                   {"backward_calls", report.backward_calls},
                   {"parameter_writes", report.parameter_writes}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

}  // namespace secant::eval
