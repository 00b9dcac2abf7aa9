#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "secant/cli/app.hpp"
#include "secant/cli/config.hpp"
#include "secant/grad/checkpoint.hpp"

using namespace secant;
using namespace secant::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kSmoke = fs::path(SECANT_SOURCE_DIR) / "configs" / "smoke.ini";

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) ++n;
  return n;
}

std::string header(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

/// Sets process environment variables for the lifetime of the guard.
class EnvVars {
 public:
  explicit EnvVars(std::initializer_list<std::pair<const std::string, std::string>> vars) : vars_(vars) {
    for (const auto& [k, v] : vars_) setenv(k.c_str(), v.c_str(), 1);
  }
  ~EnvVars() {
    for (const auto& [k, v] : vars_) unsetenv(k.c_str());
  }

 private:
  std::map<std::string, std::string> vars_;
};

struct Captured {
  int code;
  std::string out;
  std::string err;
};

Captured run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = run_cli(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("secant_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults, parsing and validation") {
  const ExperimentConfig d;
  CHECK(d.env.episode_length == 250);
  CHECK(d.sac.total_steps == 100000);
  CHECK(d.distill.iterations == 30000);
  CHECK(d.strategy.label() == "W->S");

  auto c = parse_config("[sac]\nbatch_size = 32\n[env]\nheight = 24\nwidth = 24\n");
  CHECK(c.sac.batch_size == 32);
  CHECK(c.architecture().height == 24);
  CHECK(c.architecture().in_channels == 9);

  try {
    parse_config("[sac]\nbatch_sise = 32\n");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("[sac] batch_sise") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("[sack]\nbatch_size = 32\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[sac]\nbatch_size = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[distill]\nrecipe = Combo9\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config("[experiment]\ntask = juggling\n"), ConfigError);

  for (const auto& [section, key] : known_keys()) {
    INFO(section << "." << key);
    CHECK(to_ini(d).find(key + " = ") != std::string::npos);
  }
}

TEST_CASE("combo1 recipe resolves to Cc, Cv, M and Crop") {
  auto c = parse_config("[distill]\nrecipe = combo1\n");
  const auto recipe = augment::recipe_from_name(c.distill_config().strong_recipe);
  std::vector<augment::OpKind> want{augment::OpKind::cutout_color, augment::OpKind::random_conv,
                                    augment::OpKind::mixup, augment::OpKind::crop};
  auto got = recipe.kinds;
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  CHECK(got == want);
}

TEST_CASE("environment overrides") {
  ExperimentConfig c;
  apply_env_overrides(c, {{"SECANT_SAC_BATCH_SIZE", "48"}, {"SECANT_EVAL_SEEDS", "7, 8"}, {"HOME", "/x"}});
  CHECK(c.sac.batch_size == 48);
  CHECK(c.eval.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK_THROWS_AS(apply_env_overrides(c, {{"SECANT_SAC_NOPE", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_env_overrides(c, {{"SECANT_SAC_BATCH_SIZE", "x"}}), ConfigError);
}

TEST_CASE("echoed config round trips") {
  auto c = load_config(kSmoke);
  c.sac.gamma = 0.95;
  c.strategy = distill::StrategyConfig::from_label("N->S");
  c.eval.variants = {"train", "test-dynamic"};
  const auto text = to_ini(c);
  CHECK(to_ini(parse_config(text)) == text);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"fly"}).code == kExitUsage);
  CHECK(run({"evaluate", "--bogus"}).code == kExitUsage);

  const auto missing = run({"train-expert", "--config", "/nonexistent/exp.ini", "--out", scratch("missing").string()});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("/nonexistent/exp.ini") != std::string::npos);

  const auto dir = scratch("codes");
  CHECK(run({"evaluate", "--config", kSmoke.string(), "--out", (dir / "e").string()}).code == kExitUsage);
  CHECK(run({"evaluate", "--config", kSmoke.string(), "--expert", (dir / "none.ckpt").string(), "--out",
             (dir / "e").string()})
            .code == kExitFailure);
  CHECK(run({"ablate", "--config", kSmoke.string(), "--out", (dir / "a").string(), "--axis", "colour"}).code ==
        kExitUsage);
  CHECK(run({"distill", "--config", kSmoke.string(), "--out", (dir / "d").string()}).code == kExitUsage);
  {
    EnvVars bad({{"SECANT_DISTILL_RECIPE", "Combo7"}});
    CHECK(run({"distill", "--config", kSmoke.string(), "--expert", "x.ckpt", "--out", (dir / "d").string()}).code ==
          kExitUsage);
  }
  {
    EnvVars bad({{"SECANT_SAC_BATCH_SIZE", "0"}});
    const auto r = run({"train-expert", "--config", kSmoke.string(), "--out", (dir / "t").string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("batch_size") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("commands end to end on the smoke config") {
  const auto dir = scratch("e2e");
  const auto expert_dir = dir / "expert";
  EnvVars steps({{"SECANT_SAC_TOTAL_STEPS", "2000"}, {"SECANT_SAC_EVAL_EVERY", "500"}});

  REQUIRE(run({"train-expert", "--config", kSmoke.string(), "--seed", "3", "--out", expert_dir.string()}).code ==
          kExitOk);
  const auto ckpt = expert_dir / "seed3" / "expert.ckpt";
  REQUIRE(fs::exists(ckpt));
  const auto loaded = grad::load_checkpoint<float>(ckpt);
  const auto tmp = dir / "resaved.ckpt";
  grad::save_checkpoint(tmp, loaded.arch, loaded.params);
  CHECK(slurp(tmp) == slurp(ckpt));
  CHECK(line_count(expert_dir / "seed3" / "curve.csv") == 1 + 4);

  SUBCASE("re-running from the echoed config is bit-identical") {
    const auto again = dir / "again";
    REQUIRE(run({"train-expert", "--config", (expert_dir / "config.ini").string(), "--out", again.string()}).code ==
            kExitOk);
    CHECK(slurp(again / "seed3" / "expert.ckpt") == slurp(ckpt));
    CHECK(slurp(again / "config.ini") == slurp(expert_dir / "config.ini"));
  }
  SUBCASE("distill with zero iterations returns the initialization") {
    const auto before = slurp(ckpt);
    EnvVars zero({{"SECANT_DISTILL_ITERATIONS", "0"}});
    const auto out = dir / "student0";
    REQUIRE(run({"distill", "--config", kSmoke.string(), "--seed", "3", "--expert", ckpt.string(), "--out",
                 out.string()})
                .code == kExitOk);
    const auto student = grad::load_checkpoint<float>(out / "seed3" / "student.ckpt");
    Rng init(mix_seed(3, 13));
    CHECK(student.params.checksum() == nets::Policy<float>::initialize(loaded.arch, init).params().checksum());
    CHECK(slurp(ckpt) == before);
    CHECK(slurp(out / "config.ini").find("strategy = W->S") != std::string::npos);
  }
  SUBCASE("analysis commands") {
    const auto out = dir / "student";
    REQUIRE(run({"distill", "--config", kSmoke.string(), "--seed", "3", "--expert", ckpt.string(), "--out",
                 out.string()})
                .code == kExitOk);
    const auto student = (out / "seed3" / "student.ckpt").string();
    CHECK(line_count(out / "seed3" / "distill_curve.csv") == 1 + 5);

    const auto e1 = dir / "eval1", e2 = dir / "eval2";
    REQUIRE(run({"evaluate", "--config", kSmoke.string(), "--student", student, "--out", e1.string()}).code == kExitOk);
    REQUIRE(run({"evaluate", "--config", kSmoke.string(), "--student", student, "--out", e2.string()}).code == kExitOk);
    CHECK(line_count(e1 / "eval.csv") == 1 + 3 * 2);
    CHECK(slurp(e1 / "eval.csv") == slurp(e2 / "eval.csv"));
    std::ifstream js(e1 / "eval.json");
    CHECK(nlohmann::json::parse(js).at("rows").size() == 3);

    const auto both = dir / "eval_both";
    REQUIRE(run({"evaluate", "--config", kSmoke.string(), "--expert", ckpt.string(), "--student", student,
                 "--baselines", "--out", both.string()})
                .code == kExitOk);
    CHECK(line_count(both / "eval.csv") == 1 + 3 * 3 * 2);

    const auto cyc = dir / "cycle";
    REQUIRE(run({"cycle", "--config", kSmoke.string(), "--student", student, "--out", cyc.string()}).code == kExitOk);
    std::ifstream cj(cyc / "cycle.json");
    CHECK(nlohmann::json::parse(cj).at("student").at("trials").size() == 2);
    CHECK(fs::exists(cyc / "student_embeddings.csv"));
    {
      EnvVars one({{"SECANT_EVAL_CYCLE_VARIANTS", "train"}});
      CHECK(run({"cycle", "--config", kSmoke.string(), "--student", student, "--out", cyc.string()}).code ==
            kExitUsage);
    }

    const auto sal = dir / "saliency";
    REQUIRE(run({"saliency", "--config", kSmoke.string(), "--student", student, "--out", sal.string()}).code ==
            kExitOk);
    CHECK(line_count(sal / "student_train.csv") == 4);  // ceil(16 / 5)
    CHECK(fs::exists(sal / "student_test-dynamic.png"));

    const auto lat = dir / "latency";
    REQUIRE(run({"latency", "--config", kSmoke.string(), "--student", student, "--out", lat.string()}).code ==
            kExitOk);
    std::ifstream lj(lat / "student_latency.json");
    const auto latency = nlohmann::json::parse(lj);
    CHECK(latency.at("steps") == 100);
    CHECK(latency.at("backward_calls") == 0);

    EnvVars other_geometry({{"SECANT_ENV_HEIGHT", "20"}, {"SECANT_ENV_WIDTH", "20"}});
    CHECK(run({"evaluate", "--config", kSmoke.string(), "--student", student, "--out", (dir / "bad").string()}).code ==
          kExitFailure);
  }
  fs::remove_all(dir);
}

TEST_CASE("ablation axes") {
  const auto c = load_config(kSmoke);
  auto labels = [&](const std::string& axis) {
    std::vector<std::string> out;
    for (const auto& cell : axis_cells(axis, c)) out.push_back(cell.label);
    return out;
  };
  CHECK(labels("imitation") == std::vector<std::string>{"DAgger", "Expert", "Student"});
  CHECK(labels("augmentation") ==
        std::vector<std::string>{"Cc", "Cv", "G", "I", "M", "Cm", "Combo1", "Combo2", "Combo3"});
  CHECK(labels("strategy") ==
        std::vector<std::string>{"W-only", "S-only", "no-aug", "W->W", "W->S", "S->W", "S->S", "N->W", "N->S"});
  CHECK(labels("parallel") == std::vector<std::string>{"SECANT", "SECANT-Parallel"});
  CHECK_THROWS_AS(axis_cells("colour", c), UsageError);
  auto filtered = c;
  filtered.ablate.cells = {"Expert"};
  CHECK(axis_cells("imitation", filtered).size() == 1);
  filtered.ablate.cells = {"Teacher"};
  CHECK_THROWS_AS(axis_cells("imitation", filtered), ConfigError);
}

TEST_CASE("ablate command") {
  const auto dir = scratch("ablate");
  SUBCASE("imitation sweep writes the three-column table") {
    REQUIRE(run({"ablate", "--config", kSmoke.string(), "--out", dir.string()}).code == kExitOk);
    CHECK(header(dir / "imitation_table.csv") == "task,variant,DAgger,Expert,Student");
    CHECK(line_count(dir / "imitation_table.csv") == 1 + 3);
    CHECK(line_count(dir / "imitation_long.csv") == 1 + 3 * 3);
    const auto first = slurp(dir / "imitation_long.csv");
    const auto again = scratch("ablate_again");
    REQUIRE(run({"ablate", "--config", kSmoke.string(), "--out", again.string()}).code == kExitOk);
    CHECK(slurp(again / "imitation_long.csv") == first);
    fs::remove_all(again);
  }
  SUBCASE("single-seed single-cell sweep gives one data row") {
    EnvVars one({{"SECANT_ABLATE_CELLS", "W-only"}, {"SECANT_EVAL_VARIANTS", "train"}});
    REQUIRE(run({"ablate", "--config", kSmoke.string(), "--axis", "strategy", "--out", dir.string()}).code == kExitOk);
    CHECK(header(dir / "strategy_table.csv") == "task,variant,W-only");
    CHECK(line_count(dir / "strategy_table.csv") == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("render-dump") {
  const auto dir = scratch("render");
  REQUIRE(run({"render-dump", "--config", kSmoke.string(), "--out", dir.string()}).code == kExitOk);
  CHECK(fs::exists(dir / "train" / "frame_0.png"));
  CHECK(fs::exists(dir / "test-dynamic" / "frame_0.png"));
  CHECK(fs::exists(dir / "augment"));
  CHECK(fs::exists(dir / "config.ini"));
  fs::remove_all(dir);
}
