#include "secant/cli/config.hpp"

#include <unistd.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace secant::cli {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

[[noreturn]] void bad(const std::string& what, const std::string& value) {
  throw ConfigError("expected " + what + ", got '" + value + "'");
}

long long parse_int(const std::string& text) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad("an integer", text);
  return v;
}

std::uint64_t parse_uint(const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad("a non-negative integer", text);
  return v;
}

double parse_double(const std::string& text) {
  const std::string s = trim(text);
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad("a number", text);
  return v;
}

bool parse_bool(const std::string& text) {
  std::string s = trim(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad("a boolean", text);
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::vector<std::string> s;
  for (const auto& x : v) s.push_back(std::to_string(x));
  return join(s);
}

template <typename Int>
Field int_field(std::string section, std::string key, std::function<Int&(ExperimentConfig&)> ref) {
  return {section, key,
          [ref](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_unsigned_v<Int>) {
              ref(c) = static_cast<Int>(parse_uint(v));
            } else {
              ref(c) = static_cast<Int>(parse_int(v));
            }
          },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field double_field(std::string section, std::string key, std::function<double&(ExperimentConfig&)> ref) {
  return {section, key, [ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_double(v); },
          [ref](const ExperimentConfig& c) { return fmt(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field bool_field(std::string section, std::string key, std::function<bool&(ExperimentConfig&)> ref) {
  return {section, key, [ref](ExperimentConfig& c, const std::string& v) { ref(c) = parse_bool(v); },
          [ref](const ExperimentConfig& c) { return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
}

Field string_field(std::string section, std::string key, std::function<std::string&(ExperimentConfig&)> ref) {
  return {section, key, [ref](ExperimentConfig& c, const std::string& v) { ref(c) = trim(v); },
          [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)); }};
}

Field strings_field(std::string section, std::string key,
                    std::function<std::vector<std::string>&(ExperimentConfig&)> ref) {
  return {section, key, [ref](ExperimentConfig& c, const std::string& v) { ref(c) = split_list(v); },
          [ref](const ExperimentConfig& c) { return join(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field seeds_field(std::string section, std::string key, std::function<std::vector<std::uint64_t>&(ExperimentConfig&)> ref) {
  return {section, key,
          [ref](ExperimentConfig& c, const std::string& v) {
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split_list(v)) seeds.push_back(parse_uint(s));
            ref(c) = std::move(seeds);
          },
          [ref](const ExperimentConfig& c) { return fmt_list(ref(const_cast<ExperimentConfig&>(c))); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // [experiment]
    f.push_back({"experiment", "task",
                 [](C& c, const std::string& v) {
                   try {
                     c.task = env::parse_task(trim(v));
                   } catch (const std::exception&) {
                     bad("point-reach or cart-balance", v);
                   }
                 },
                 [](const C& c) { return env::task_name(c.task); }});
    f.push_back(seeds_field("experiment", "seeds", [](C& c) -> auto& { return c.seeds; }));
    f.push_back(int_field<int>("experiment", "workers", [](C& c) -> int& { return c.workers; }));
    f.push_back(string_field("experiment", "distractor_dir", [](C& c) -> auto& { return c.distractor_dir; }));
    f.push_back(int_field<std::size_t>("experiment", "distractor_fallback", [](C& c) -> auto& { return c.distractor_fallback; }));
    f.push_back(bool_field("experiment", "allow_fallback", [](C& c) -> bool& { return c.allow_fallback; }));
    // [env]
    f.push_back(int_field<int>("env", "height", [](C& c) -> int& { return c.env.height; }));
    f.push_back(int_field<int>("env", "width", [](C& c) -> int& { return c.env.width; }));
    f.push_back(int_field<int>("env", "frame_stack", [](C& c) -> int& { return c.env.frame_stack; }));
    f.push_back(int_field<int>("env", "action_repeat", [](C& c) -> int& { return c.env.action_repeat; }));
    f.push_back(int_field<int>("env", "episode_length", [](C& c) -> int& { return c.env.episode_length; }));
    // [network]
    f.push_back(int_field<int>("network", "conv_channels", [](C& c) -> int& { return c.network.conv_channels; }));
    f.push_back({"network", "conv_strides",
                 [](C& c, const std::string& v) {
                   std::vector<int> s;
                   for (const auto& x : split_list(v)) s.push_back(static_cast<int>(parse_int(x)));
                   if (s.empty()) bad("a comma-separated stride list", v);
                   c.network.conv_strides = s;
                 },
                 [](const C& c) { return fmt_list(c.network.conv_strides); }});
    f.push_back(int_field<int>("network", "kernel_size", [](C& c) -> int& { return c.network.kernel_size; }));
    f.push_back(int_field<int>("network", "feature_dim", [](C& c) -> int& { return c.network.feature_dim; }));
    f.push_back(int_field<int>("network", "mlp_layers", [](C& c) -> int& { return c.network.mlp_layers; }));
    f.push_back(int_field<int>("network", "hidden_dim", [](C& c) -> int& { return c.network.hidden_dim; }));
    // [augment]
    f.push_back(int_field<int>("augment", "crop_pad", [](C& c) -> int& { return c.augment.crop_pad; }));
    f.push_back(double_field("augment", "patch_min_fraction", [](C& c) -> double& { return c.augment.patch_min_fraction; }));
    f.push_back(double_field("augment", "patch_max_fraction", [](C& c) -> double& { return c.augment.patch_max_fraction; }));
    f.push_back(double_field("augment", "gaussian_sigma", [](C& c) -> double& { return c.augment.gaussian_sigma; }));
    f.push_back(double_field("augment", "impulse_prob", [](C& c) -> double& { return c.augment.impulse_prob; }));
    f.push_back(double_field("augment", "mixup_alpha_min", [](C& c) -> double& { return c.augment.mixup_alpha_min; }));
    f.push_back(double_field("augment", "mixup_alpha_max", [](C& c) -> double& { return c.augment.mixup_alpha_max; }));
    // [sac]
    f.push_back(double_field("sac", "gamma", [](C& c) -> double& { return c.sac.gamma; }));
    f.push_back(int_field<std::size_t>("sac", "buffer_capacity", [](C& c) -> auto& { return c.sac.buffer_capacity; }));
    f.push_back(int_field<std::size_t>("sac", "batch_size", [](C& c) -> auto& { return c.sac.batch_size; }));
    f.push_back(double_field("sac", "actor_lr", [](C& c) -> double& { return c.sac.actor_lr; }));
    f.push_back(double_field("sac", "critic_lr", [](C& c) -> double& { return c.sac.critic_lr; }));
    f.push_back(double_field("sac", "alpha_lr", [](C& c) -> double& { return c.sac.alpha_lr; }));
    f.push_back(double_field("sac", "init_temperature", [](C& c) -> double& { return c.sac.init_temperature; }));
    f.push_back(double_field("sac", "ema_rate", [](C& c) -> double& { return c.sac.ema_rate; }));
    f.push_back(int_field<int>("sac", "target_update_every", [](C& c) -> int& { return c.sac.target_update_every; }));
    f.push_back(int_field<int>("sac", "actor_update_every", [](C& c) -> int& { return c.sac.actor_update_every; }));
    f.push_back(string_field("sac", "augmentation", [](C& c) -> auto& { return c.sac.augmentation; }));
    f.push_back(int_field<std::size_t>("sac", "warmup_steps", [](C& c) -> auto& { return c.sac.warmup_steps; }));
    f.push_back(int_field<std::size_t>("sac", "total_steps", [](C& c) -> auto& { return c.sac.total_steps; }));
    f.push_back(int_field<int>("sac", "updates_per_step", [](C& c) -> int& { return c.sac.updates_per_step; }));
    f.push_back(int_field<std::size_t>("sac", "eval_every", [](C& c) -> auto& { return c.sac.eval_every; }));
    f.push_back(int_field<int>("sac", "eval_episodes", [](C& c) -> int& { return c.sac.eval_episodes; }));
    f.push_back(double_field("sac", "stop_reward", [](C& c) -> double& { return c.sac.stop_reward; }));
    f.push_back(int_field<std::size_t>("sac", "stop_min_steps", [](C& c) -> auto& { return c.sac.stop_min_steps; }));
    // [distill]
    f.push_back({"distill", "strategy",
                 [](C& c, const std::string& v) {
                   const auto collection = c.strategy.collection;
                   try {
                     c.strategy = distill::StrategyConfig::from_label(trim(v));
                   } catch (const std::exception&) {
                     bad("a strategy label such as SECANT, W->S or SECANT-Parallel", v);
                   }
                   c.strategy.collection = collection;
                 },
                 [](const C& c) {
                   if (c.strategy.schedule == distill::Schedule::parallel) return std::string("SECANT-Parallel");
                   distill::StrategyConfig plain = c.strategy;
                   plain.collection = distill::Collection::dagger;
                   return plain.label();
                 }});
    f.push_back({"distill", "collection",
                 [](C& c, const std::string& v) {
                   try {
                     c.strategy.collection = distill::parse_collection(trim(v));
                   } catch (const std::exception&) {
                     bad("dagger, expert-only or student-only", v);
                   }
                 },
                 [](const C& c) { return distill::collection_name(c.strategy.collection); }});
    f.push_back(string_field("distill", "recipe", [](C& c) -> auto& { return c.distill.strong_recipe; }));
    f.push_back(int_field<std::size_t>("distill", "capacity", [](C& c) -> auto& { return c.distill.capacity; }));
    f.push_back(int_field<std::size_t>("distill", "batch_size", [](C& c) -> auto& { return c.distill.batch_size; }));
    f.push_back(double_field("distill", "lr", [](C& c) -> double& { return c.distill.lr; }));
    f.push_back(int_field<std::size_t>("distill", "iterations", [](C& c) -> auto& { return c.distill.iterations; }));
    f.push_back(int_field<int>("distill", "seed_episodes", [](C& c) -> int& { return c.distill.seed_episodes; }));
    f.push_back(double_field("distill", "exploration_noise", [](C& c) -> double& { return c.distill.exploration_noise; }));
    f.push_back(bool_field("distill", "sampled_targets", [](C& c) -> bool& { return c.distill.sampled_targets; }));
    f.push_back(int_field<std::size_t>("distill", "log_every", [](C& c) -> auto& { return c.distill.log_every; }));
    // [eval]
    f.push_back(strings_field("eval", "variants", [](C& c) -> auto& { return c.eval.variants; }));
    f.push_back(int_field<int>("eval", "episodes", [](C& c) -> int& { return c.eval.episodes; }));
    f.push_back(seeds_field("eval", "seeds", [](C& c) -> auto& { return c.eval.seeds; }));
    f.push_back(strings_field("eval", "cycle_variants", [](C& c) -> auto& { return c.eval.cycle_variants; }));
    f.push_back(int_field<int>("eval", "cycle_trials", [](C& c) -> int& { return c.eval.cycle_trials; }));
    f.push_back(int_field<int>("eval", "cycle_samples", [](C& c) -> int& { return c.eval.cycle_samples; }));
    f.push_back(int_field<int>("eval", "saliency_patch", [](C& c) -> int& { return c.eval.saliency_patch; }));
    f.push_back(double_field("eval", "saliency_sigma", [](C& c) -> double& { return c.eval.saliency_sigma; }));
    f.push_back(int_field<std::size_t>("eval", "latency_steps", [](C& c) -> auto& { return c.eval.latency_steps; }));
    f.push_back(int_field<std::size_t>("eval", "latency_warmup", [](C& c) -> auto& { return c.eval.latency_warmup; }));
    // [ablate]
    f.push_back(string_field("ablate", "axis", [](C& c) -> auto& { return c.ablate.axis; }));
    f.push_back(strings_field("ablate", "cells", [](C& c) -> auto& { return c.ablate.cells; }));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

void set_field(ExperimentConfig& c, const Field& f, const std::string& value, const std::string& origin) {
  try {
    f.set(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": [" + f.section + "] " + f.key + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // Desk geometry: 32x32 frames, two 16-channel convs, 256-wide heads.
  env.height = 32;
  env.width = 32;
  network.conv_channels = 16;
  network.conv_strides = {2, 1};
  network.hidden_dim = 256;
  augment.crop_pad = 2;
  sac.batch_size = 64;
  sac.total_steps = 100000;
  sac.eval_every = 5000;
  distill.batch_size = 64;
  distill.iterations = 30000;
}

grad::Architecture ExperimentConfig::architecture() const {
  grad::Architecture a = network;
  a.in_channels = 3 * env.frame_stack;
  a.height = env.height;
  a.width = env.width;
  a.action_dim = task == env::TaskKind::point_reach ? 2 : 1;
  return a;
}

sac::SacConfig ExperimentConfig::sac_config() const {
  sac::SacConfig s = sac;
  s.augment_params = augment;
  return s;
}

distill::DistillConfig ExperimentConfig::distill_config() const {
  distill::DistillConfig d = distill;
  d.augment_params = augment;
  return d;
}

void ExperimentConfig::validate() const {
  auto guard = [](const std::string& section, const std::function<void()>& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("[" + section + "] " + e.what());
    }
  };
  guard("experiment", [&] {
    if (seeds.empty()) throw std::invalid_argument("seeds: at least one seed is required");
    if (workers < 1) throw std::invalid_argument("workers: must be >= 1");
  });
  guard("env", [&] {
    if (env.height < 8 || env.width < 8) throw std::invalid_argument("height/width: must be >= 8");
    if (env.frame_stack < 1) throw std::invalid_argument("frame_stack: must be >= 1");
    if (env.action_repeat < 1) throw std::invalid_argument("action_repeat: must be >= 1");
    if (env.episode_length < 1) throw std::invalid_argument("episode_length: must be >= 1");
  });
  guard("network", [&] { architecture().validate(); });
  guard("augment", [&] {
    augment.validate();
    if (augment.crop_pad > 0 && augment.crop_pad >= std::min(env.height, env.width)) {
      throw std::invalid_argument("crop_pad: must be smaller than the frame");
    }
  });
  guard("sac", [&] { sac_config().validate(); });
  guard("distill", [&] {
    distill_config().validate();
    if (!strategy.single_stage()) distill::regime_recipe(strategy.student_augmentation, distill.strong_recipe);
  });
  guard("eval", [&] {
    for (const auto& v : eval.variants) env::VariantSpec::from_name(v, 0);
    for (const auto& v : eval.cycle_variants) env::VariantSpec::from_name(v, 0);
    if (eval.episodes < 1) throw std::invalid_argument("episodes: must be >= 1");
    if (eval.seeds.empty()) throw std::invalid_argument("seeds: at least one seed is required");
    if (eval.cycle_trials < 1) throw std::invalid_argument("cycle_trials: must be >= 1");
    if (eval.cycle_samples < 2) throw std::invalid_argument("cycle_samples: must be >= 2");
    if (eval.saliency_patch < 1) throw std::invalid_argument("saliency_patch: must be >= 1");
    if (!(eval.saliency_sigma >= 0)) throw std::invalid_argument("saliency_sigma: must be >= 0");
    if (eval.latency_steps < 1) throw std::invalid_argument("latency_steps: must be >= 1");
  });
  guard("ablate", [&] {
    static const std::vector<std::string> axes{"augmentation", "strategy", "imitation", "parallel"};
    if (std::find(axes.begin(), axes.end(), ablate.axis) == axes.end()) {
      throw std::invalid_argument("axis: unknown axis '" + ablate.axis +
                                  "' (expected augmentation, strategy, imitation or parallel)");
    }
  });
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(origin + ": key '" + section + "' must be inside a [section]");
    }
    for (const auto& [key, value] : body) {
      const Field* f = find_field(section, key);
      if (!f) throw ConfigError(origin + ": unknown key [" + section + "] " + key);
      set_field(c, *f, value.data(), origin);
    }
  }
  return c;
}

namespace {

std::string env_name(const std::string& section, const std::string& key) {
  std::string name = "SECANT_" + section + "_" + key;
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
  return name;
}

/// Variables that claim a config section but match none of its keys.
void reject_unknown_overrides(const std::vector<std::string>& names) {
  for (const auto& name : names) {
    bool claims_section = false;
    bool known = false;
    for (const auto& f : fields()) {
      if (name.rfind(env_name(f.section, ""), 0) == 0) claims_section = true;
      if (name == env_name(f.section, f.key)) known = true;
    }
    if (claims_section && !known) throw ConfigError("unknown override variable " + name);
  }
}

}  // namespace

void apply_env_overrides(ExperimentConfig& config, const std::map<std::string, std::string>& vars) {
  std::vector<std::string> names;
  for (const auto& [name, value] : vars) names.push_back(name);
  reject_unknown_overrides(names);
  for (const auto& f : fields()) {
    const std::string name = env_name(f.section, f.key);
    if (auto it = vars.find(name); it != vars.end()) set_field(config, f, it->second, name);
  }
}

void apply_env_overrides(ExperimentConfig& config) {
  std::map<std::string, std::string> vars;
  for (char** e = environ; *e != nullptr; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos || entry.rfind("SECANT_", 0) != 0) continue;
    vars[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  apply_env_overrides(config, vars);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  ExperimentConfig c = parse_config(buf.str(), path.string());
  apply_env_overrides(c);
  c.validate();
  return c;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  apply_env_overrides(c);
  c.validate();
  return c;
}

std::string to_ini(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << '\n';
  }
  return out.str();
}

void echo_config(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream f(out_dir / "config.ini");
  if (!f) throw std::runtime_error("cannot write " + (out_dir / "config.ini").string());
  f << to_ini(config);
}

std::vector<std::pair<std::string, std::string>> known_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.section, f.key);
  return out;
}

}  // namespace secant::cli
