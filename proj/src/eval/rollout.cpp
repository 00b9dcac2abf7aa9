#include "secant/eval/rollout.hpp"

namespace secant::eval {

double run_episode(env::PixelEnv& environment, const ActionFn& act) {
  Observation obs = environment.reset();
  double total = 0.0;
  while (true) {
    auto result = environment.step(act(obs));
    total += result.reward();
    if (result.done) break;
    obs = std::move(result.observation);
  }
  return total;
}

std::vector<double> episode_returns(env::TaskKind task, const env::VariantSpec& variant,
                                    const env::EnvConfig& config, const ActionFn& act, int episodes,
                                    std::uint64_t seed) {
  env::PixelEnv environment(task, variant, config, seed);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) out.push_back(run_episode(environment, act));
  return out;
}

std::vector<double> scripted_returns(env::TaskKind task, const env::VariantSpec& variant,
                                     const env::EnvConfig& config, int episodes, std::uint64_t seed) {
  env::PixelEnv environment(task, variant, config, seed);
  std::vector<double> out;
  for (int e = 0; e < episodes; ++e) {
    out.push_back(run_episode(environment, [&](const Observation&) {
      return env::scripted_action(task, environment.state());
    }));
  }
  return out;
}

}  // namespace secant::eval
