#include "secant/sac/sac.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "secant/eval/rollout.hpp"
#include "secant/grad/checkpoint.hpp"
#include "secant/grad/ops.hpp"

namespace secant::sac {

using namespace secant::grad;

void SacConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma: must lie in [0,1]");
  if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity: must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size: must be positive");
  if (!(actor_lr > 0 && critic_lr > 0 && alpha_lr > 0)) throw std::invalid_argument("actor_lr/critic_lr/alpha_lr: must be positive");
  if (!(init_temperature > 0)) throw std::invalid_argument("init_temperature: must be positive");
  if (!(ema_rate >= 0.0 && ema_rate <= 1.0)) throw std::invalid_argument("ema_rate: must lie in [0,1]");
  if (target_update_every < 1 || actor_update_every < 1) {
    throw std::invalid_argument("target_update_every/actor_update_every: must be >= 1");
  }
  if (updates_per_step < 0) throw std::invalid_argument("updates_per_step: must be >= 0");
  if (eval_episodes < 0) throw std::invalid_argument("eval_episodes: must be >= 0");
  augment_params.validate();
  augment::recipe_from_name(augmentation);
}

template <typename T>
BatchTensors<T> to_tensors(const TransitionBatch& batch, int action_dim) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  const std::size_t n = batch.size();
  const auto d = static_cast<std::size_t>(action_dim);
  if (batch.actions.size() != n * d) throw std::invalid_argument("batch action size mismatch");
  BatchTensors<T> out;
  out.obs = to_tensor<T>(std::span<const Observation>(batch.obs));
  out.next_obs = to_tensor<T>(std::span<const Observation>(batch.next_obs));
  out.action = Tensor<T>(Shape{n, d}, std::vector<T>(batch.actions.begin(), batch.actions.end()));
  out.reward = Tensor<T>(Shape{n, 1}, std::vector<T>(batch.rewards.begin(), batch.rewards.end()));
  std::vector<T> nd(n);
  for (std::size_t i = 0; i < n; ++i) nd[i] = T(1) - static_cast<T>(batch.dones[i]);
  out.not_done = Tensor<T>(Shape{n, 1}, std::move(nd));
  return out;
}

template <typename T>
SacNetworks<T> SacNetworks<T>::initialize(const Architecture& arch, double init_temperature, Rng& rng) {
  arch.validate();
  SacNetworks n;
  n.arch = arch;
  for (const char* part : {"encoder", "actor", "critic1", "critic2"}) init_parameters(n.online, arch, part, rng);
  for (const auto& [name, t] : n.online) {
    if (name.rfind("actor.", 0) != 0) {
      auto copy = t.clone();
      copy.set_requires_grad(false);
      n.target.add(name, copy);
    }
  }
  n.log_alpha = Tensor<T>::scalar(static_cast<T>(std::log(init_temperature)), true);
  n.target_entropy = -static_cast<double>(arch.action_dim);
  return n;
}

template <typename T>
T SacNetworks<T>::alpha() const {
  return std::exp(log_alpha.item());
}

template <typename T>
ParameterSet<T> SacNetworks<T>::critic_side() const {
  ParameterSet<T> out;
  for (const auto& [name, t] : online) {
    if (name.rfind("actor.", 0) != 0) out.add(name, t);
  }
  return out;
}

template <typename T>
ParameterSet<T> SacNetworks<T>::actor_side() const {
  return online.subset("actor.");
}

template <typename T>
CriticLoss<T> critic_loss(const SacNetworks<T>& nets, const BatchTensors<T>& batch, double gamma, Rng& rng) {
  if (batch.size() == 0) throw std::invalid_argument("critic loss on an empty batch");
  Tensor<T> y;
  {
    NoGradGuard no_grad;
    auto next_head = nets::actor_head(nets.online, nets.arch, nets::encode(nets.online, nets.arch, batch.next_obs));
    auto next = nets::sample_action(next_head, rng);
    auto target_feat = nets::encode(nets.target, nets.arch, batch.next_obs);
    auto tq = minimum(nets::critic_head(nets.target, nets.arch, "critic1", target_feat, next.action),
                      nets::critic_head(nets.target, nets.arch, "critic2", target_feat, next.action));
    auto soft_value = sub(tq, scale(next.log_prob, nets.alpha()));
    y = add(batch.reward, mul(batch.not_done, scale(soft_value, static_cast<T>(gamma)))).detach();
  }
  auto feat = nets::encode(nets.online, nets.arch, batch.obs);
  auto q1 = nets::critic_head(nets.online, nets.arch, "critic1", feat, batch.action);
  auto q2 = nets::critic_head(nets.online, nets.arch, "critic2", feat, batch.action);
  auto d1 = sub(q1, y);
  auto d2 = sub(q2, y);
  auto loss = add(mean(mul(d1, d1)), mean(mul(d2, d2)));
  return {loss, q1, q2, y, feat};
}

template <typename T>
ActorLoss<T> actor_loss(SacNetworks<T>& nets, const Tensor<T>& obs, Rng& rng,
                        const std::optional<Tensor<T>>& features) {
  Tensor<T> feat;
  if (features) {
    feat = features->detach();
  } else {
    NoGradGuard no_grad;
    feat = nets::encode(nets.online, nets.arch, obs).detach();
  }
  if (feat.dim(0) == 0) throw std::invalid_argument("actor loss on an empty batch");
  const auto critics = nets.online.subset("critic").detached();
  auto head = nets::actor_head(nets.online, nets.arch, feat);
  auto sample = nets::sample_action(head, rng);
  auto q = minimum(nets::critic_head(critics, nets.arch, "critic1", feat, sample.action),
                   nets::critic_head(critics, nets.arch, "critic2", feat, sample.action));
  auto loss = mean(sub(scale(sample.log_prob, nets.alpha()), q));
  return {loss, sample.log_prob.detach()};
}

template <typename T>
Tensor<T> temperature_loss(const Tensor<T>& log_alpha, const Tensor<T>& log_prob, double target_entropy) {
  auto shifted = add_scalar(log_prob.detach(), static_cast<T>(target_entropy));
  return scale(mean(mul(shifted, log_alpha)), T(-1));
}

template <typename T>
void ema_update(ParameterSet<T>& target, const ParameterSet<T>& online, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("ema rate must lie in [0,1]");
  const T r = static_cast<T>(rate);
  for (auto& [name, t] : target) {
    const auto& src = online.at(name);
    if (src.shape() != t.shape()) throw ShapeError("ema shape mismatch for '" + name + "'");
    auto dst = t.data();
    auto s = src.data();
    if (rate == 1.0) {
      std::copy(s.begin(), s.end(), dst.begin());
    } else {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (T(1) - r) * dst[i] + r * s[i];
    }
  }
  ++tape_counters().parameter_writes;
}

namespace {

ParameterSet<float> single(const std::string& name, const Tensor<float>& t) {
  ParameterSet<float> p;
  p.add(name, t);
  return p;
}

void export_adam(ParameterSet<float>& out, const std::string& tag, const Adam<float>& opt) {
  out.add("optim." + tag + ".step", Tensor<float>::scalar(static_cast<float>(opt.step_count())));
  std::size_t i = 0;
  for (const auto& [name, t] : opt.params()) {
    out.add("optim." + tag + ".m." + name, Tensor<float>(t.shape(), opt.first_moments()[i]));
    out.add("optim." + tag + ".v." + name, Tensor<float>(t.shape(), opt.second_moments()[i]));
    ++i;
  }
}

void import_adam(const ParameterSet<float>& in, const std::string& tag, Adam<float>& opt) {
  const std::string step_key = "optim." + tag + ".step";
  if (!in.contains(step_key)) return;
  std::vector<std::vector<float>> m, v;
  for (const auto& [name, _] : opt.params()) {
    const auto& mt = in.at("optim." + tag + ".m." + name);
    const auto& vt = in.at("optim." + tag + ".v." + name);
    m.emplace_back(mt.data().begin(), mt.data().end());
    v.emplace_back(vt.data().begin(), vt.data().end());
  }
  opt.load_state(static_cast<std::uint64_t>(std::llround(in.at(step_key).item())), std::move(m), std::move(v));
}

void check_finite(double value, const char* what, std::uint64_t update) {
  if (!std::isfinite(value)) {
    throw NonFiniteLoss(std::string("non-finite ") + what + " loss at update " + std::to_string(update), update);
  }
}

}  // namespace

SacAgent::SacAgent(const Architecture& arch, const SacConfig& config, std::uint64_t seed,
                   const augment::DistractorPool* pool)
    : arch_(arch),
      config_(config),
      rng_(seed),
      nets_([&] {
        config.validate();
        Rng init(mix_seed(seed, 0x1417ULL));
        auto n = SacNetworks<float>::initialize(arch, config.init_temperature, init);
        if (config.target_entropy) n.target_entropy = *config.target_entropy;
        return n;
      }()),
      critic_opt_(nets_.critic_side(), AdamConfig{config.critic_lr}),
      actor_opt_(nets_.actor_side(), AdamConfig{config.actor_lr}),
      alpha_opt_(single("state.log_alpha", nets_.log_alpha), AdamConfig{config.alpha_lr}),
      recipe_(augment::recipe_from_name(config.augmentation)),
      pool_(pool) {
  if (recipe_.needs_pool() && (pool_ == nullptr || pool_->empty())) {
    throw std::invalid_argument("augmentation '" + config.augmentation + "' needs a distractor pool");
  }
}

std::vector<float> SacAgent::act(const Observation& obs, bool deterministic) {
  NoGradGuard no_grad;
  auto head = nets::actor_head(nets_.online, arch_, nets::encode(nets_.online, arch_, to_tensor<float>(obs)));
  Tensor<float> a = deterministic ? grad::tanh(head.mean) : nets::sample_action(head, rng_).action;
  return {a.data().begin(), a.data().end()};
}

std::vector<augment::AugmentationOp> augment_pairs(TransitionBatch& batch, const augment::ComboRecipe& recipe,
                                                   const augment::AugmentParams& params,
                                                   const augment::DistractorPool* pool, Rng& rng) {
  std::vector<augment::AugmentationOp> ops;
  ops.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& o = batch.obs[i];
    ops.push_back(augment::sample_from_recipe(recipe, params, o.height, o.width, pool, rng));
    batch.obs[i] = augment::apply(ops.back(), batch.obs[i], pool);
    batch.next_obs[i] = augment::apply(ops.back(), batch.next_obs[i], pool);
  }
  return ops;
}

UpdateStats SacAgent::update(const ReplayBuffer& buffer) {
  auto batch = buffer.sample(config_.batch_size, rng_);
  augment_pairs(batch, recipe_, config_.augment_params, pool_, rng_);
  const auto bt = to_tensors<float>(batch, arch_.action_dim);

  UpdateStats stats;
  auto cl = critic_loss(nets_, bt, config_.gamma, rng_);
  stats.critic_loss = cl.loss.item();
  check_finite(stats.critic_loss, "critic", updates_);
  backward(cl.loss);
  critic_opt_.step();

  if (updates_ % static_cast<std::uint64_t>(config_.actor_update_every) == 0) {
    auto al = actor_loss(nets_, bt.obs, rng_, std::optional<Tensor<float>>(cl.features));
    stats.actor_loss = al.loss.item();
    check_finite(stats.actor_loss, "actor", updates_);
    backward(al.loss);
    actor_opt_.step();
    auto tl = temperature_loss(nets_.log_alpha, al.log_prob, nets_.target_entropy);
    stats.alpha_loss = tl.item();
    check_finite(stats.alpha_loss, "temperature", updates_);
    backward(tl);
    alpha_opt_.step();
    stats.actor_updated = true;
  }
  if (updates_ % static_cast<std::uint64_t>(config_.target_update_every) == 0) {
    ema_update(nets_.target, nets_.online, config_.ema_rate);
  }
  ++updates_;
  stats.alpha = nets_.alpha();
  return stats;
}

nets::Policy<float> SacAgent::policy() const { return nets::Policy<float>::extract(arch_, nets_.online); }

ParameterSet<float> SacAgent::export_state() const {
  ParameterSet<float> out;
  for (const auto& [name, t] : nets_.online) out.add(name, t.clone());
  for (const auto& [name, t] : nets_.target) out.add("target." + name, t.clone());
  out.add("state.log_alpha", nets_.log_alpha.clone());
  out.add("state.updates", Tensor<float>::scalar(static_cast<float>(updates_)));
  export_adam(out, "critic", critic_opt_);
  export_adam(out, "actor", actor_opt_);
  export_adam(out, "alpha", alpha_opt_);
  return out;
}

void SacAgent::import_state(const ParameterSet<float>& state) {
  for (auto& [name, t] : nets_.online) {
    const auto& src = state.at(name);
    if (src.shape() != t.shape()) throw ShapeError("state shape mismatch for '" + name + "'");
    std::copy(src.data().begin(), src.data().end(), t.data().begin());
  }
  for (auto& [name, t] : nets_.target) {
    const std::string key = "target." + name;
    const auto& src = state.contains(key) ? state.at(key) : state.at(name);
    std::copy(src.data().begin(), src.data().end(), t.data().begin());
  }
  if (state.contains("state.log_alpha")) nets_.log_alpha[0] = state.at("state.log_alpha").item();
  if (state.contains("state.updates")) {
    updates_ = static_cast<std::uint64_t>(std::llround(state.at("state.updates").item()));
  }
  import_adam(state, "critic", critic_opt_);
  import_adam(state, "actor", actor_opt_);
  import_adam(state, "alpha", alpha_opt_);
  ++tape_counters().parameter_writes;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "step,episode_reward,critic_loss,actor_loss,alpha\n" << std::setprecision(10);
  for (const auto& r : curve) {
    f << r.step << ',' << r.episode_reward << ',' << r.critic_loss << ',' << r.actor_loss << ',' << r.alpha << '\n';
  }
}

ExpertRun train_expert(env::TaskKind task, const env::EnvConfig& env_config, const Architecture& arch,
                       const SacConfig& config, std::uint64_t seed,
                       const std::optional<std::filesystem::path>& out_dir,
                       const augment::DistractorPool* pool, const ProgressFn& progress) {
  config.validate();
  env::PixelEnv environment(task, env::VariantSpec::train(), env_config, mix_seed(seed, 1));
  const int channels = 3 * env_config.frame_stack;
  if (arch.in_channels != channels || arch.height != env_config.height || arch.width != env_config.width ||
      arch.action_dim != environment.action_dim()) {
    throw std::invalid_argument("architecture input/action geometry does not match the environment");
  }
  SacAgent agent(arch, config, mix_seed(seed, 2), pool);
  ReplayBuffer buffer(config.buffer_capacity, channels, env_config.height, env_config.width,
                      environment.action_dim());
  Rng explore(mix_seed(seed, 3));

  ExpertRun run;
  run.arch = arch;
  UpdateStats last;
  auto evaluate = [&](std::uint64_t step) {
    CurveRow row;
    row.step = step;
    if (config.eval_episodes > 0) {
      const auto returns = eval::episode_returns(
          task, env::VariantSpec::train(), env_config,
          [&](const Observation& o) { return agent.act(o, true); }, config.eval_episodes,
          mix_seed(seed, 1000 + step));
      double s = 0.0;
      for (double r : returns) s += r;
      row.episode_reward = s / static_cast<double>(returns.size());
    }
    row.critic_loss = last.critic_loss;
    row.actor_loss = last.actor_loss;
    row.alpha = agent.networks().alpha();
    run.curve.push_back(row);
    if (progress) progress(row);
  };

  Observation obs = environment.reset();
  double episode_reward = 0.0;
  bool stopped = false;
  for (std::size_t step = 0; step < config.total_steps && !stopped; ++step) {
    std::vector<float> action;
    if (step < config.warmup_steps) {
      action.resize(static_cast<std::size_t>(environment.action_dim()));
      for (auto& a : action) a = static_cast<float>(explore.uniform(-1.0, 1.0));
    } else {
      action = agent.act(obs, false);
    }
    auto result = environment.step(action);
    const double reward = result.reward();
    buffer.add(obs, action, reward, result.observation, result.terminal);
    episode_reward += reward;
    if (result.done) {
      run.training_episode_rewards.push_back(episode_reward);
      episode_reward = 0.0;
      obs = environment.reset();
    } else {
      obs = std::move(result.observation);
    }
    if (step + 1 >= config.warmup_steps) {
      for (int u = 0; u < config.updates_per_step; ++u) {
        try {
          last = agent.update(buffer);
        } catch (const NonFiniteLoss& e) {
          throw NonFiniteLoss(std::string(e.what()) + " (environment step " + std::to_string(step + 1) + ")",
                              step + 1);
        }
      }
    }
    if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
      evaluate(step + 1);
      stopped = config.stop_reward > 0.0 && step + 1 >= config.stop_min_steps &&
                run.curve.back().episode_reward >= config.stop_reward;
    }
  }
  if (!stopped && (run.curve.empty() || run.curve.back().step != config.total_steps)) evaluate(config.total_steps);

  run.state = agent.export_state();
  run.buffer_size = buffer.size();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_checkpoint(*out_dir / "expert.ckpt", arch, run.state);
    write_curve_csv(*out_dir / "curve.csv", run.curve);
  }
  return run;
}

#define SECANT_INSTANTIATE_SAC(T)                                                                       \
  template BatchTensors<T> to_tensors<T>(const TransitionBatch&, int);                                 \
  template struct SacNetworks<T>;                                                                      \
  template CriticLoss<T> critic_loss(const SacNetworks<T>&, const BatchTensors<T>&, double, Rng&);    \
  template ActorLoss<T> actor_loss(SacNetworks<T>&, const Tensor<T>&, Rng&,                           \
                                   const std::optional<Tensor<T>>&);                                  \
  template Tensor<T> temperature_loss(const Tensor<T>&, const Tensor<T>&, double);                    \
  template void ema_update(ParameterSet<T>&, const ParameterSet<T>&, double);

SECANT_INSTANTIATE_SAC(float)
SECANT_INSTANTIATE_SAC(double)

}  // namespace secant::sac
