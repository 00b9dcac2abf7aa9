#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "secant/core/observation.hpp"
#include "secant/env/pixel_env.hpp"

namespace secant::eval {

using ActionFn = std::function<std::vector<float>(const Observation&)>;

/// Runs one episode from reset() and returns the summed reward.
double run_episode(env::PixelEnv& env, const ActionFn& act);

/// Per-episode returns on a fresh env handle seeded with `seed`.
std::vector<double> episode_returns(env::TaskKind task, const env::VariantSpec& variant,
                                    const env::EnvConfig& config, const ActionFn& act, int episodes,
                                    std::uint64_t seed);

/// Returns of the privileged scripted controller.
std::vector<double> scripted_returns(env::TaskKind task, const env::VariantSpec& variant,
                                     const env::EnvConfig& config, int episodes, std::uint64_t seed);

}  // namespace secant::eval
