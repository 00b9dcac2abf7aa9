#include "secant/env/pixel_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace secant::env {

namespace {

thread_local std::uint64_t g_reward_reads = 0;

// point-reach constants (arena units, per physics step)
constexpr double kDamping = 0.6;
constexpr double kAccel = 0.012;
constexpr double kAgentRadius = 0.07;
constexpr double kTargetArm = 0.08;
constexpr double kTargetHalfWidth = 0.03;
constexpr double kSpawnLo = 0.1;
constexpr double kSpawnHi = 0.9;
constexpr double kMinSpawnSeparation = 0.5;

// cart-balance constants (classic cart-pole)
constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kPoleHalfLength = 0.5;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;
constexpr double kTrackLimit = 2.4;
constexpr double kAngleThreshold = 0.2;

// cart-balance drawing (normalized frame coordinates)
constexpr double kCartRow = 0.7;
constexpr double kCartHalfW = 0.09;
constexpr double kCartHalfH = 0.045;
constexpr double kPoleDrawLength = 0.38;
constexpr double kPoleHalfWidth = 0.025;
constexpr double kTrackHalfH = 0.012;

double color_distance(const Rgb& a, const Rgb& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

Rgb random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
          static_cast<float>(rng.uniform())};
}

// Rejection-samples a color at least `min_dist` from every color in `avoid`.
Rgb distinct_color(Rng& rng, std::initializer_list<Rgb> avoid, double min_dist) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Rgb c = random_color(rng);
    bool ok = true;
    for (const auto& a : avoid) ok = ok && color_distance(c, a) >= min_dist;
    if (ok) return c;
  }
  throw std::runtime_error("palette sampling failed");
}

double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  const std::uint64_t h = mix_seed(seed, mix_seed(static_cast<std::uint64_t>(ix) * 0x9E3779B1ULL,
                                                  static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  const double a = lattice_value(ix, iy, seed), b = lattice_value(ix + 1, iy, seed);
  const double c = lattice_value(ix, iy + 1, seed), d = lattice_value(ix + 1, iy + 1, seed);
  return (a + (b - a) * tx) * (1 - ty) + (c + (d - c) * tx) * ty;
}

struct DynamicTexture {
  Rgb low, high;
  std::uint64_t seed;
  double vx, vy;
};

DynamicTexture dynamic_texture(const VariantSpec& v, std::uint64_t episode) {
  Rng rng(mix_seed(v.noise_seed ^ 0xD1A3ULL, episode));
  DynamicTexture t;
  t.low = random_color(rng);
  t.high = distinct_color(rng, {t.low}, 0.5);
  t.seed = rng.next_seed();
  const double angle = rng.uniform(0.0, 6.283185307179586);
  t.vx = 0.05 * std::cos(angle);
  t.vy = 0.05 * std::sin(angle);
  return t;
}

bool in_point_agent(double u, double v, const EnvState& s) {
  const double dx = u - s.physical[0], dy = v - s.physical[1];
  return dx * dx + dy * dy <= kAgentRadius * kAgentRadius;
}

bool in_point_target(double u, double v, const EnvState& s) {
  const double dx = std::abs(u - s.physical[4]), dy = std::abs(v - s.physical[5]);
  return (dx <= kTargetArm && dy <= kTargetHalfWidth) || (dx <= kTargetHalfWidth && dy <= kTargetArm);
}

double cart_column(const EnvState& s) { return 0.5 + 0.4 * s.physical[0] / kTrackLimit; }

bool in_cart_body(double u, double v, const EnvState& s) {
  return std::abs(u - cart_column(s)) <= kCartHalfW && std::abs(v - kCartRow) <= kCartHalfH;
}

bool in_pole(double u, double v, const EnvState& s) {
  const double ax = cart_column(s), ay = kCartRow - kCartHalfH;
  const double bx = ax + kPoleDrawLength * std::sin(s.physical[2]);
  const double by = ay - kPoleDrawLength * std::cos(s.physical[2]);
  const double px = u - ax, py = v - ay, dx = bx - ax, dy = by - ay;
  const double t = std::clamp((px * dx + py * dy) / (dx * dx + dy * dy), 0.0, 1.0);
  const double ex = px - t * dx, ey = py - t * dy;
  return ex * ex + ey * ey <= kPoleHalfWidth * kPoleHalfWidth;
}

bool in_track(double v) { return std::abs(v - (kCartRow + kCartHalfH + kTrackHalfH)) <= kTrackHalfH; }

}  // namespace

TaskKind parse_task(const std::string& name) {
  if (name == "point-reach") return TaskKind::point_reach;
  if (name == "cart-balance") return TaskKind::cart_balance;
  throw std::invalid_argument("unknown task '" + name + "' (expected point-reach or cart-balance)");
}

std::string task_name(TaskKind task) {
  return task == TaskKind::point_reach ? "point-reach" : "cart-balance";
}

VariantSpec VariantSpec::train() { return {}; }

VariantSpec VariantSpec::test_color(std::uint64_t seed) {
  return {BackgroundMode::random_color, PaletteMode::randomized, seed, Difficulty::test_color};
}

VariantSpec VariantSpec::test_dynamic(std::uint64_t seed) {
  return {BackgroundMode::dynamic_texture, PaletteMode::fixed, seed, Difficulty::test_dynamic};
}

VariantSpec VariantSpec::from_name(const std::string& name, std::uint64_t seed) {
  if (name == "train") return train();
  if (name == "test-color") return test_color(seed);
  if (name == "test-dynamic") return test_dynamic(seed);
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected train, test-color or test-dynamic)");
}

std::string VariantSpec::name() const {
  switch (tag) {
    case Difficulty::train: return "train";
    case Difficulty::test_color: return "test-color";
    case Difficulty::test_dynamic: return "test-dynamic";
  }
  return "unknown";
}

double StepResult::reward() const {
  ++g_reward_reads;
  return reward_;
}

std::uint64_t& reward_reads() { return g_reward_reads; }

Palette train_palette() {
  return {{0.12f, 0.14f, 0.22f}, {0.95f, 0.55f, 0.15f}, {0.25f, 0.85f, 0.35f}, {0.6f, 0.6f, 0.6f}};
}

Palette variant_palette(const VariantSpec& variant, std::uint64_t episode) {
  Palette p = train_palette();
  if (variant.background == BackgroundMode::fixed_color && variant.palette == PaletteMode::fixed) {
    return p;
  }
  Rng rng(mix_seed(variant.noise_seed, episode));
  if (variant.background == BackgroundMode::random_color) {
    p.background = distinct_color(rng, {p.background}, 0.35);
  }
  if (variant.palette == PaletteMode::randomized) {
    p.agent = distinct_color(rng, {p.background}, 0.45);
    p.target = distinct_color(rng, {p.background, p.agent}, 0.45);
    p.track = distinct_color(rng, {p.background}, 0.3);
  }
  return p;
}

Observation render_frame(TaskKind task, const EnvState& state, const VariantSpec& variant,
                         const EnvConfig& config) {
  const int H = config.height, W = config.width;
  Observation frame(3, H, W);
  const Palette pal = variant_palette(variant, state.episode);
  const bool dynamic = variant.background == BackgroundMode::dynamic_texture;
  DynamicTexture tex{};
  if (dynamic) tex = dynamic_texture(variant, state.episode);
  const double t = static_cast<double>(state.step);

  for (int y = 0; y < H; ++y) {
    const double v = (y + 0.5) / H;
    for (int x = 0; x < W; ++x) {
      const double u = (x + 0.5) / W;
      Rgb c = pal.background;
      if (dynamic) {
        const double n = 0.65 * value_noise(4.0 * u + t * tex.vx, 4.0 * v + t * tex.vy, tex.seed) +
                         0.35 * value_noise(11.0 * u - t * tex.vy, 11.0 * v + t * tex.vx, tex.seed + 1);
        for (int k = 0; k < 3; ++k) c[k] = static_cast<float>(tex.low[k] + (tex.high[k] - tex.low[k]) * n);
      }
      if (task == TaskKind::point_reach) {
        if (in_point_target(u, v, state)) c = pal.target;
        if (in_point_agent(u, v, state)) c = pal.agent;
      } else {
        if (in_track(v)) c = pal.track;
        if (in_cart_body(u, v, state)) c = pal.agent;
        if (in_pole(u, v, state)) c = pal.target;
      }
      for (int k = 0; k < 3; ++k) frame.at(k, y, x) = quantize_255(c[k]);
    }
  }
  return frame;
}

std::vector<bool> foreground_mask(TaskKind task, const EnvState& state, const EnvConfig& config) {
  const int H = config.height, W = config.width;
  std::vector<bool> mask(static_cast<std::size_t>(H) * W, false);
  for (int y = 0; y < H; ++y) {
    const double v = (y + 0.5) / H;
    for (int x = 0; x < W; ++x) {
      const double u = (x + 0.5) / W;
      bool fg;
      if (task == TaskKind::point_reach) {
        fg = in_point_target(u, v, state) || in_point_agent(u, v, state);
      } else {
        fg = in_track(v) || in_cart_body(u, v, state) || in_pole(u, v, state);
      }
      mask[static_cast<std::size_t>(y) * W + x] = fg;
    }
  }
  return mask;
}

PixelEnv::PixelEnv(TaskKind task, VariantSpec variant, EnvConfig config, std::uint64_t seed)
    : task_(task), variant_(variant), config_(config), rng_(seed) {
  if (config_.height < 8 || config_.width < 8) throw std::invalid_argument("env: frame too small");
  if (config_.frame_stack < 1) throw std::invalid_argument("env: frame_stack must be >= 1");
  if (config_.action_repeat < 1) throw std::invalid_argument("env: action_repeat must be >= 1");
  if (config_.episode_length < 1) throw std::invalid_argument("env: episode_length must be >= 1");
  state_.episode_length = config_.episode_length;
  state_.physical = task_ == TaskKind::point_reach ? std::vector<double>(6, 0.5)
                                                   : std::vector<double>(4, 0.0);
}

int PixelEnv::action_dim() const { return task_ == TaskKind::point_reach ? 2 : 1; }

Observation PixelEnv::reset() {
  EnvState s;
  s.episode_length = config_.episode_length;
  s.episode = episodes_started_++;
  if (task_ == TaskKind::point_reach) {
    const double ax = rng_.uniform(kSpawnLo, kSpawnHi), ay = rng_.uniform(kSpawnLo, kSpawnHi);
    double tx, ty;
    do {
      tx = rng_.uniform(kSpawnLo, kSpawnHi);
      ty = rng_.uniform(kSpawnLo, kSpawnHi);
    } while (std::hypot(tx - ax, ty - ay) < kMinSpawnSeparation);
    s.physical = {ax, ay, 0.0, 0.0, tx, ty};
  } else {
    s.physical = {rng_.uniform(-0.3, 0.3), rng_.uniform(-0.1, 0.1), rng_.uniform(-0.1, 0.1),
                  rng_.uniform(-0.1, 0.1)};
  }
  return set_state(std::move(s));
}

Observation PixelEnv::set_state(EnvState state) {
  const std::size_t want = task_ == TaskKind::point_reach ? 6 : 4;
  if (state.physical.size() != want) throw std::invalid_argument("env: wrong physical state size");
  state_ = std::move(state);
  done_ = state_.terminal || state_.step >= state_.episode_length;
  frames_.assign(static_cast<std::size_t>(config_.frame_stack), render());
  return stacked();
}

Observation PixelEnv::observation() const { return stacked(); }

Observation PixelEnv::stacked() const {
  Observation obs(3 * config_.frame_stack, config_.height, config_.width);
  const std::size_t frame_size = frames_.front().size();
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    std::copy(frames_[i].data.begin(), frames_[i].data.end(), obs.data.begin() + i * frame_size);
  }
  return obs;
}

double PixelEnv::physics_reward() const {
  const auto& p = state_.physical;
  if (task_ == TaskKind::point_reach) {
    const double d = std::hypot(p[0] - p[4], p[1] - p[5]);
    return 1.0 - std::clamp(d / kPointArenaDiagonal, 0.0, 1.0);
  }
  return std::abs(p[2]) < kAngleThreshold ? 1.0 : 0.0;
}

void PixelEnv::physics_step(std::span<const double> a) {
  auto& p = state_.physical;
  if (task_ == TaskKind::point_reach) {
    for (int k = 0; k < 2; ++k) {
      p[2 + k] = kDamping * p[2 + k] + kAccel * a[k];
      p[k] += p[2 + k];
      const double lo = kAgentRadius, hi = 1.0 - kAgentRadius;
      if (p[k] < lo || p[k] > hi) {
        p[k] = std::clamp(p[k], lo, hi);
        p[2 + k] = 0.0;
      }
    }
  } else {
    const double force = kForceMag * a[0];
    const double total = kCartMass + kPoleMass, pml = kPoleMass * kPoleHalfLength;
    const double st = std::sin(p[2]), ct = std::cos(p[2]);
    const double temp = (force + pml * p[3] * p[3] * st) / total;
    const double theta_acc =
        (kGravity * st - ct * temp) / (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * ct * ct / total));
    const double x_acc = temp - pml * theta_acc * ct / total;
    p[0] += kTau * p[1];
    p[1] += kTau * x_acc;
    p[2] += kTau * p[3];
    p[3] += kTau * theta_acc;
    if (std::abs(p[0]) > kTrackLimit) state_.terminal = true;
  }
  ++state_.step;
}

StepResult PixelEnv::step(std::span<const float> action) {
  if (done_) throw std::logic_error("env: step() on a finished episode; call reset()");
  if (static_cast<int>(action.size()) != action_dim()) {
    throw std::invalid_argument("env: action has " + std::to_string(action.size()) +
                                " entries, expected " + std::to_string(action_dim()));
  }
  std::vector<double> a(action.begin(), action.end());
  for (auto& v : a) v = std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0;
  double reward = 0.0;
  for (int r = 0; r < config_.action_repeat; ++r) {
    if (state_.terminal || state_.step >= state_.episode_length) break;
    physics_step(a);
    reward += physics_reward();
  }
  done_ = state_.terminal || state_.step >= state_.episode_length;
  frames_.pop_front();
  frames_.push_back(render());
  return StepResult(stacked(), reward, done_, state_.terminal);
}

std::vector<float> scripted_action(TaskKind task, const EnvState& state) {
  const auto& p = state.physical;
  if (task == TaskKind::point_reach) {
    std::vector<float> a(2);
    for (int k = 0; k < 2; ++k) {
      const double cmd = 40.0 * (p[4 + k] - p[k]) - 60.0 * p[2 + k];
      a[k] = static_cast<float>(std::clamp(cmd, -1.0, 1.0));
    }
    return a;
  }
  const double force = 1.0 * p[0] + 1.5 * p[1] + 20.0 * p[2] + 3.0 * p[3];
  return {static_cast<float>(std::clamp(force / kForceMag, -1.0, 1.0))};
}

}  // namespace secant::env
