#include "secant/distill/distill.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <stdexcept>

#include "secant/grad/checkpoint.hpp"
#include "secant/grad/ops.hpp"

namespace secant::distill {

using namespace secant::grad;

DistillDataset::DistillDataset(std::size_t capacity, int channels, int height, int width)
    : capacity_(capacity), channels_(channels), height_(height), width_(width) {
  if (capacity == 0) throw std::invalid_argument("dataset capacity must be positive");
  if (channels <= 0 || height <= 0 || width <= 0) throw std::invalid_argument("dataset extents must be positive");
  bytes_ = static_cast<std::size_t>(channels) * height * width;
}

void DistillDataset::add(const Observation& obs) {
  if (obs.channels != channels_ || obs.height != height_ || obs.width != width_) {
    throw std::invalid_argument("observation shape does not match the dataset");
  }
  const auto enc = encode_u8(obs);
  if (size_ < capacity_) {
    storage_.resize(storage_.size() + bytes_);
    ++size_;
  }
  std::copy(enc.begin(), enc.end(), storage_.begin() + static_cast<std::ptrdiff_t>(cursor_ * bytes_));
  if (label_dim_ > 0) {
    std::fill_n(labels_.begin() + static_cast<std::ptrdiff_t>(cursor_ * label_dim_), label_dim_,
                std::numeric_limits<float>::quiet_NaN());
  }
  cursor_ = (cursor_ + 1) % capacity_;
  ++inserted_;
}

std::size_t DistillDataset::slot(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("dataset index out of range");
  return size_ < capacity_ ? index : (cursor_ + index) % capacity_;
}

Observation DistillDataset::get(std::size_t index) const {
  const std::size_t s = slot(index);
  return decode_u8(std::span<const std::uint8_t>(storage_.data() + s * bytes_, bytes_), channels_, height_, width_);
}

std::vector<Observation> DistillDataset::sample(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty dataset");
  std::vector<Observation> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(get(rng.index(size_)));
  return out;
}

std::vector<std::size_t> DistillDataset::sample_indices(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty dataset");
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = rng.index(size_);
  return out;
}

void DistillDataset::set_label(std::size_t index, std::span<const float> label) {
  const std::size_t s = slot(index);
  if (label_dim_ == 0) {
    if (label.empty()) throw std::invalid_argument("labels must be non-empty");
    label_dim_ = label.size();
    labels_.assign(capacity_ * label_dim_, 0.0f);
  } else if (label.size() != label_dim_) {
    throw std::invalid_argument("label size " + std::to_string(label.size()) + " differs from " +
                                std::to_string(label_dim_));
  }
  std::copy(label.begin(), label.end(), labels_.begin() + static_cast<std::ptrdiff_t>(s * label_dim_));
}

std::span<const float> DistillDataset::label(std::size_t index) const {
  const std::size_t s = slot(index);
  if (label_dim_ == 0) throw std::logic_error("dataset has no labels");
  return {labels_.data() + s * label_dim_, label_dim_};
}

std::string collection_name(Collection c) {
  switch (c) {
    case Collection::dagger: return "dagger";
    case Collection::expert_only: return "expert-only";
    case Collection::student_only: return "student-only";
  }
  return "?";
}

Collection parse_collection(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "dagger") return Collection::dagger;
  if (n == "expert-only" || n == "expert") return Collection::expert_only;
  if (n == "student-only" || n == "student") return Collection::student_only;
  throw std::invalid_argument("unknown data-collection policy '" + name + "'");
}

StrategyConfig StrategyConfig::secant() { return {}; }

StrategyConfig StrategyConfig::from_label(const std::string& label) {
  std::string n = label;
  for (const std::string arrow : {"→", "->"}) {
    if (auto pos = n.find(arrow); pos != std::string::npos) n.replace(pos, arrow.size(), ">");
  }
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  auto regime = [&](char c) -> std::string {
    switch (c) {
      case 'w': return "weak";
      case 's': return "strong";
      case 'n': return "none";
    }
    throw std::invalid_argument("unknown strategy '" + label + "'");
  };
  StrategyConfig s;
  if (n == "secant") return s;
  if (n == "secant-parallel") {
    s.schedule = Schedule::parallel;
    return s;
  }
  if (n == "w-only") return {"weak", "", Collection::dagger, Schedule::sequential};
  if (n == "s-only") return {"strong", "", Collection::dagger, Schedule::sequential};
  if (n == "no-aug") return {"none", "", Collection::dagger, Schedule::sequential};
  if (n.size() == 3 && n[1] == '>') return {regime(n[0]), regime(n[2]), Collection::dagger, Schedule::sequential};
  throw std::invalid_argument("unknown strategy '" + label + "'");
}

std::string StrategyConfig::label() const {
  auto letter = [](const std::string& r) -> std::string {
    if (r == "weak") return "W";
    if (r == "strong") return "S";
    if (r == "none") return "N";
    return r;
  };
  if (single_stage()) {
    if (expert_augmentation == "none") return "no-aug";
    return letter(expert_augmentation) + "-only";
  }
  std::string base = letter(expert_augmentation) + "->" + letter(student_augmentation);
  if (schedule == Schedule::parallel) base += " (parallel)";
  if (collection != Collection::dagger) base += " [" + collection_name(collection) + "]";
  return base;
}

void DistillConfig::validate() const {
  if (capacity == 0 || batch_size == 0) throw std::invalid_argument("capacity/batch_size: must be positive");
  if (!(lr > 0)) throw std::invalid_argument("lr: must be positive");
  if (seed_episodes < 0) throw std::invalid_argument("seed_episodes: must be >= 0");
  if (!(exploration_noise >= 0)) throw std::invalid_argument("exploration_noise: must be >= 0");
  augment_params.validate();
  augment::recipe_from_name(strong_recipe);
}

augment::ComboRecipe regime_recipe(const std::string& regime, const std::string& strong_recipe) {
  if (regime == "strong") return augment::recipe_from_name(strong_recipe);
  return augment::recipe_from_name(regime);
}

template <typename T>
Tensor<T> action_regression_loss(const Tensor<T>& student_actions, const Tensor<T>& expert_actions) {
  if (student_actions.shape() != expert_actions.shape()) {
    throw ShapeError("student actions " + shape_str(student_actions.shape()) + " vs expert actions " +
                     shape_str(expert_actions.shape()));
  }
  if (student_actions.rank() != 2 || student_actions.dim(0) == 0) {
    throw ShapeError("action batches must be [N,d] with N > 0");
  }
  auto diff = sub(student_actions, expert_actions);
  return scale(sum(mul(diff, diff)), T(1) / static_cast<T>(student_actions.dim(0)));
}

template <typename T>
Tensor<T> expert_targets(const Policy<T>& expert, std::span<const Observation> raw, Rng* sample_rng) {
  NoGradGuard no_grad;
  auto obs = to_tensor<T>(raw);
  if (sample_rng) return nets::sample_action(expert.head(obs), *sample_rng).action.detach();
  return expert.act(obs).detach();
}

template <typename T>
Tensor<T> distill_loss(const Policy<T>& student, const Tensor<T>& targets, std::span<const Observation> raw,
                       const augment::ComboRecipe& recipe, const augment::AugmentParams& params,
                       const augment::DistractorPool* pool, Rng& rng) {
  if (raw.empty()) throw std::invalid_argument("distill loss on an empty batch");
  std::vector<Observation> augmented;
  augmented.reserve(raw.size());
  for (const auto& o : raw) {
    augmented.push_back(augment::apply(augment::sample_from_recipe(recipe, params, o.height, o.width, pool, rng), o, pool));
  }
  auto predicted = student.act(to_tensor<T>(std::span<const Observation>(augmented)));
  return action_regression_loss(predicted, targets);
}

template <typename T>
Tensor<T> distill_loss(const Policy<T>& student, const Policy<T>& expert, std::span<const Observation> raw,
                       const augment::ComboRecipe& recipe, const augment::AugmentParams& params,
                       const augment::DistractorPool* pool, Rng& rng, bool sampled_targets) {
  if (raw.empty()) throw std::invalid_argument("distill loss on an empty batch");
  if (student.arch().action_dim != expert.arch().action_dim) {
    throw std::invalid_argument("student and expert action dims differ");
  }
  auto target = expert_targets(expert, raw, sampled_targets ? &rng : nullptr);
  return distill_loss(student, target, raw, recipe, params, pool, rng);
}

namespace {

double descend(Tensor<float> loss, grad::Adam<float>& optimizer) {
  const double value = loss.item();
  if (!std::isfinite(value)) throw std::runtime_error("non-finite distillation loss");
  backward(loss);
  optimizer.step();
  return value;
}

}  // namespace

double distill_step(Policy<float>& student, grad::Adam<float>& optimizer, const Policy<float>& expert,
                    std::span<const Observation> raw, const augment::ComboRecipe& recipe,
                    const augment::AugmentParams& params, const augment::DistractorPool* pool, Rng& rng,
                    bool sampled_targets) {
  return descend(distill_loss(student, expert, raw, recipe, params, pool, rng, sampled_targets), optimizer);
}

double distill_step(Policy<float>& student, grad::Adam<float>& optimizer, const Tensor<float>& targets,
                    std::span<const Observation> raw, const augment::ComboRecipe& recipe,
                    const augment::AugmentParams& params, const augment::DistractorPool* pool, Rng& rng) {
  return descend(distill_loss(student, targets, raw, recipe, params, pool, rng), optimizer);
}

void collect_episodes(const Policy<float>& policy, env::PixelEnv& environment, int episodes, DistillDataset& dataset) {
  for (int e = 0; e < episodes; ++e) {
    Observation obs = environment.reset();
    while (true) {
      dataset.add(obs);
      auto result = environment.step(policy.act(obs));
      if (result.done) break;
      obs = std::move(result.observation);
    }
  }
}

DistillDataset seed_dataset(const Policy<float>& expert, env::PixelEnv& environment, int episodes,
                            std::size_t capacity) {
  if (expert.arch().action_dim != environment.action_dim()) {
    throw std::invalid_argument("expert action dim " + std::to_string(expert.arch().action_dim) +
                                " does not match the environment's " + std::to_string(environment.action_dim()));
  }
  const auto& cfg = environment.config();
  DistillDataset dataset(capacity, 3 * cfg.frame_stack, cfg.height, cfg.width);
  collect_episodes(expert, environment, episodes, dataset);
  return dataset;
}

namespace {

void check_geometry(const Architecture& arch, const env::EnvConfig& cfg, int action_dim, const char* who) {
  if (arch.in_channels != 3 * cfg.frame_stack || arch.height != cfg.height || arch.width != cfg.width ||
      arch.action_dim != action_dim) {
    throw std::invalid_argument(std::string(who) + " architecture does not match the environment");
  }
}

// Stage-2 interaction loop state: one environment handle stepped by the
// data-collection policy, appending each new raw observation.
struct Collector {
  env::PixelEnv environment;
  Observation obs;
  Rng noise;

  std::vector<float> noisy(std::vector<float> a, double sigma) {
    if (sigma > 0) {
      for (auto& v : a) v = std::clamp(static_cast<float>(v + noise.normal(0.0, sigma)), -1.0f, 1.0f);
    }
    return a;
  }

  std::uint64_t appended_hash = 0xcbf29ce484222325ULL;

  void step(const std::vector<float>& action, DistillDataset& dataset) {
    auto result = environment.step(action);
    obs = result.done ? environment.reset() : std::move(result.observation);
    dataset.add(obs);
    const auto* bytes = reinterpret_cast<const unsigned char*>(obs.data.data());
    for (std::size_t i = 0; i < obs.data.size() * sizeof(float); ++i) {
      appended_hash ^= bytes[i];
      appended_hash *= 0x100000001b3ULL;
    }
  }
};

void label_range(DistillDataset& dataset, const Policy<float>& expert, std::size_t begin, std::size_t end) {
  constexpr std::size_t kChunk = 256;
  for (std::size_t lo = begin; lo < end; lo += kChunk) {
    const std::size_t hi = std::min(end, lo + kChunk);
    std::vector<Observation> obs;
    for (std::size_t i = lo; i < hi; ++i) obs.push_back(dataset.get(i));
    const auto targets = expert_targets(expert, std::span<const Observation>(obs));
    const auto d = static_cast<std::size_t>(targets.dim(1));
    for (std::size_t i = lo; i < hi; ++i) {
      dataset.set_label(i, std::span<const float>(targets.data().data() + (i - lo) * d, d));
    }
  }
}

}  // namespace

DistillRun run_distillation(const Policy<float>& expert, env::TaskKind task, const env::EnvConfig& env_config,
                            const StrategyConfig& strategy, const DistillConfig& config, std::uint64_t seed,
                            const augment::DistractorPool* pool, const std::optional<Architecture>& student_arch,
                            const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (strategy.single_stage()) throw std::invalid_argument("strategy '" + strategy.label() + "' has no stage 2");
  const auto recipe = regime_recipe(strategy.student_augmentation, config.strong_recipe);
  if (recipe.needs_pool() && (pool == nullptr || pool->empty())) {
    throw std::invalid_argument("student augmentation '" + recipe.name + "' needs a distractor pool");
  }
  Collector collector{env::PixelEnv(task, env::VariantSpec::train(), env_config, mix_seed(seed, 11)), {},
                      Rng(mix_seed(seed, 12))};
  const int action_dim = collector.environment.action_dim();
  check_geometry(expert.arch(), env_config, action_dim, "expert");
  const Architecture sarch = student_arch.value_or(expert.arch());
  check_geometry(sarch, env_config, action_dim, "student");

  Rng init(mix_seed(seed, 13));
  DistillRun run;
  run.student = Policy<float>::initialize(sarch, init);
  grad::Adam<float> optimizer(run.student.params(), AdamConfig{config.lr});
  Rng rng(mix_seed(seed, 14));
  run.expert_checksum_before = expert.params().checksum();

  DistillDataset dataset(config.capacity, 3 * env_config.frame_stack, env_config.height, env_config.width);
  const Policy<float>& seeder = strategy.collection == Collection::student_only ? run.student : expert;
  collect_episodes(seeder, collector.environment, config.seed_episodes, dataset);
  run.seed_size = dataset.size();
  collector.obs = collector.environment.reset();
  // Deterministic expert actions are labelled once per stored entry.
  const bool cache_targets = !config.sampled_targets;
  if (cache_targets) label_range(dataset, expert, 0, dataset.size());

  double loss_acc = 0.0;
  std::size_t loss_n = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    double loss;
    if (cache_targets) {
      const auto indices = dataset.sample_indices(config.batch_size, rng);
      std::vector<Observation> batch;
      batch.reserve(indices.size());
      grad::Buffer<float> targets;
      targets.reserve(indices.size() * static_cast<std::size_t>(action_dim));
      for (auto i : indices) {
        batch.push_back(dataset.get(i));
        const auto l = dataset.label(i);
        targets.insert(targets.end(), l.begin(), l.end());
      }
      const Tensor<float> target_tensor(grad::Shape{indices.size(), static_cast<std::size_t>(action_dim)}, std::move(targets));
      loss = distill_step(run.student, optimizer, target_tensor, batch, recipe, config.augment_params, pool, rng);
    } else {
      const auto batch = dataset.sample(config.batch_size, rng);
      loss = distill_step(run.student, optimizer, expert, batch, recipe, config.augment_params, pool, rng, true);
    }
    loss_acc += loss;
    ++loss_n;
    if (config.log_every > 0 && ((it + 1) % config.log_every == 0 || it + 1 == config.iterations)) {
      run.losses.emplace_back(it + 1, loss_acc / static_cast<double>(loss_n));
      loss_acc = 0.0;
      loss_n = 0;
    }
    if (strategy.collection == Collection::expert_only) {
      collector.step(expert.act(collector.obs), dataset);
      ++run.expert_env_steps;
    } else {
      collector.step(collector.noisy(run.student.act(collector.obs), config.exploration_noise), dataset);
      ++run.student_env_steps;
    }
    if (cache_targets) label_range(dataset, expert, dataset.size() - 1, dataset.size());
  }
  run.dataset_size = dataset.size();
  run.appended_checksum = collector.appended_hash;
  run.expert_checksum_after = expert.params().checksum();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_checkpoint(*out_dir / "student.ckpt", run.student.arch(), run.student.params());
    write_loss_csv(*out_dir / "distill_curve.csv", run.losses);
  }
  return run;
}

ParallelRun run_parallel_variant(env::TaskKind task, const env::EnvConfig& env_config, const Architecture& arch,
                                 const sac::SacConfig& sac_config, const DistillConfig& config,
                                 const StrategyConfig& strategy, std::uint64_t seed,
                                 const augment::DistractorPool* pool,
                                 const std::optional<std::filesystem::path>& out_dir) {
  sac_config.validate();
  config.validate();
  if (strategy.single_stage()) throw std::invalid_argument("parallel variant needs a student regime");
  sac::SacConfig expert_cfg = sac_config;
  expert_cfg.augmentation = strategy.expert_augmentation == "strong" ? config.strong_recipe
                                                                     : strategy.expert_augmentation;
  const auto recipe = regime_recipe(strategy.student_augmentation, config.strong_recipe);

  env::PixelEnv expert_env(task, env::VariantSpec::train(), env_config, mix_seed(seed, 1));
  check_geometry(arch, env_config, expert_env.action_dim(), "expert");
  sac::SacAgent agent(arch, expert_cfg, mix_seed(seed, 2), pool);
  sac::ReplayBuffer buffer(expert_cfg.buffer_capacity, arch.in_channels, arch.height, arch.width,
                           expert_env.action_dim());
  Rng explore(mix_seed(seed, 3));

  Collector collector{env::PixelEnv(task, env::VariantSpec::train(), env_config, mix_seed(seed, 11)), {},
                      Rng(mix_seed(seed, 12))};
  Rng init(mix_seed(seed, 13));
  ParallelRun run;
  run.student = Policy<float>::initialize(arch, init);
  grad::Adam<float> optimizer(run.student.params(), AdamConfig{config.lr});
  Rng rng(mix_seed(seed, 14));
  DistillDataset dataset(config.capacity, arch.in_channels, arch.height, arch.width);
  bool distilling = false;

  Observation obs = expert_env.reset();
  double loss_acc = 0.0;
  std::size_t loss_n = 0;
  for (std::size_t step = 0; step < expert_cfg.total_steps; ++step) {
    std::vector<float> action;
    if (step < expert_cfg.warmup_steps) {
      action.resize(static_cast<std::size_t>(expert_env.action_dim()));
      for (auto& a : action) a = static_cast<float>(explore.uniform(-1.0, 1.0));
    } else {
      action = agent.act(obs, false);
    }
    auto result = expert_env.step(action);
    buffer.add(obs, action, result.reward(), result.observation, result.terminal);
    obs = result.done ? expert_env.reset() : std::move(result.observation);
    if (step + 1 < expert_cfg.warmup_steps) continue;
    for (int u = 0; u < expert_cfg.updates_per_step; ++u) agent.update(buffer);

    const auto expert = agent.policy();
    if (!distilling) {
      const Policy<float>& seeder = strategy.collection == Collection::student_only ? run.student : expert;
      collect_episodes(seeder, collector.environment, config.seed_episodes, dataset);
      collector.obs = collector.environment.reset();
      distilling = true;
    }
    const auto batch = dataset.sample(config.batch_size, rng);
    loss_acc += distill_step(run.student, optimizer, expert, batch, recipe, config.augment_params, pool, rng,
                             config.sampled_targets);
    ++loss_n;
    ++run.distill_steps;
    if (strategy.collection == Collection::expert_only) {
      collector.step(expert.act(collector.obs), dataset);
    } else {
      collector.step(collector.noisy(run.student.act(collector.obs), config.exploration_noise), dataset);
    }
    if (config.log_every > 0 && run.distill_steps % config.log_every == 0) {
      run.losses.emplace_back(step + 1, loss_acc / static_cast<double>(loss_n));
      run.expert_checksums.push_back(expert.params().checksum());
      loss_acc = 0.0;
      loss_n = 0;
    }
  }
  if (loss_n > 0) {
    run.losses.emplace_back(expert_cfg.total_steps, loss_acc / static_cast<double>(loss_n));
    run.expert_checksums.push_back(agent.policy().params().checksum());
  }
  run.expert_state = agent.export_state();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_checkpoint(*out_dir / "expert.ckpt", arch, run.expert_state);
    save_checkpoint(*out_dir / "student.ckpt", arch, run.student.params());
    write_loss_csv(*out_dir / "distill_curve.csv", run.losses);
  }
  return run;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<std::pair<std::uint64_t, double>>& losses) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "iteration,loss\n" << std::setprecision(10);
  for (const auto& [it, loss] : losses) f << it << ',' << loss << '\n';
}

#define SECANT_INSTANTIATE_DISTILL(T)                                                                      \
  template Tensor<T> action_regression_loss(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> expert_targets(const Policy<T>&, std::span<const Observation>, Rng*);                \
  template Tensor<T> distill_loss(const Policy<T>&, const Policy<T>&, std::span<const Observation>,        \
                                  const augment::ComboRecipe&, const augment::AugmentParams&,              \
                                  const augment::DistractorPool*, Rng&, bool);                             \
  template Tensor<T> distill_loss(const Policy<T>&, const Tensor<T>&, std::span<const Observation>,        \
                                  const augment::ComboRecipe&, const augment::AugmentParams&,              \
                                  const augment::DistractorPool*, Rng&);

SECANT_INSTANTIATE_DISTILL(float)
SECANT_INSTANTIATE_DISTILL(double)

}  // namespace secant::distill
