#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "secant/eval/eval.hpp"
#include "secant/grad/tensor.hpp"

using namespace secant;
using namespace secant::eval;

namespace {

env::EnvConfig small_env() {
  env::EnvConfig e;
  e.height = e.width = 16;
  e.episode_length = 60;
  return e;
}

grad::Architecture small_arch(int channels = 4, int hidden = 16) {
  grad::Architecture a;
  a.in_channels = 9;
  a.height = a.width = 16;
  a.conv_channels = channels;
  a.conv_strides = {2};
  a.feature_dim = 8;
  a.mlp_layers = 2;
  a.hidden_dim = hidden;
  a.action_dim = 2;
  return a;
}

nets::Policy<float> random_policy(std::uint64_t seed, const grad::Architecture& arch = small_arch()) {
  Rng rng(seed);
  return nets::Policy<float>::initialize(arch, rng);
}

double oracle_mean(env::TaskKind task, const std::string& variant, const env::EnvConfig& cfg, int episodes,
                   std::uint64_t seed) {
  auto e = make_eval_env(task, variant, cfg, seed);
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    e.reset();
    while (!e.done()) total += e.step(env::scripted_action(task, e.state())).reward();
  }
  return total / episodes;
}

FeatureSequence random_sequence(std::size_t n, std::size_t dim, Rng& rng) {
  FeatureSequence s(n, Feature(dim));
  for (auto& f : s)
    for (auto& v : f) v = static_cast<float>(rng.uniform(0, 1));
  return s;
}

/// Brute-force nearest neighbour without tie handling (inputs are tie-free).
std::size_t argmin_sq(const Feature& q, const FeatureSequence& c) {
  std::size_t best = 0;
  double bd = 1e300;
  for (std::size_t j = 0; j < c.size(); ++j) {
    double d = 0;
    for (std::size_t k = 0; k < q.size(); ++k) d += (q[k] - c[j][k]) * (q[k] - c[j][k]);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  return best;
}

std::size_t mutual_pairs(const FeatureSequence& u, const FeatureSequence& v) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < u.size(); ++i) n += argmin_sq(v[argmin_sq(u[i], v)], u) == i;
  return n;
}

}  // namespace

TEST_CASE("evaluation with the scripted oracle reproduces the ceiling") {
  const auto cfg = small_env();
  const std::uint64_t seed = 4;
  auto shadow = make_eval_env(env::TaskKind::point_reach, "train", cfg, seed);
  ActionFn oracle = [&](const Observation&) {
    if (shadow.done()) shadow.reset();
    auto a = env::scripted_action(env::TaskKind::point_reach, shadow.state());
    shadow.step(a);
    return a;
  };
  auto report = evaluate_policy("oracle", oracle, env::TaskKind::point_reach, {"train"}, cfg, 3, {seed});
  const double ceiling = oracle_mean(env::TaskKind::point_reach, "train", cfg, 3, seed);
  CHECK(report.row("oracle", "train").mean == doctest::Approx(ceiling).epsilon(1e-12));

  auto random = evaluate_policy("random", random_actor(2, 1), env::TaskKind::point_reach, {"train"}, cfg, 3, {seed});
  CHECK(random.row("random", "train").mean < ceiling);
}

TEST_CASE("evaluation reports") {
  const auto cfg = small_env();
  const auto policy = random_policy(5);
  const std::vector<std::string> variants{"train", "test-color", "test-dynamic"};
  auto a = evaluate_policy("p", policy, env::TaskKind::point_reach, variants, cfg, 2, {1, 2, 3});
  auto b = evaluate_policy("p", policy, env::TaskKind::point_reach, variants, cfg, 2, {1, 2, 3});
  REQUIRE(a.rows.size() == 3);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].seed_means == b.rows[i].seed_means);
    CHECK(a.rows[i].mean == b.rows[i].mean);
    CHECK(a.rows[i].episodes_per_seed == 2);
    const auto& m = a.rows[i].seed_means;
    REQUIRE(m.size() == 3);
    const double mu = (m[0] + m[1] + m[2]) / 3;
    const double var = ((m[0] - mu) * (m[0] - mu) + (m[1] - mu) * (m[1] - mu) + (m[2] - mu) * (m[2] - mu)) / 3;
    CHECK(a.rows[i].mean == doctest::Approx(mu));
    CHECK(a.rows[i].std == doctest::Approx(std::sqrt(var)));
  }
  CHECK(a.backward_calls == 0);
  CHECK(a.parameter_writes == 0);
  CHECK_THROWS_AS(a.row("p", "nope"), std::out_of_range);

  SUBCASE("mismatched geometry is rejected") {
    auto other = cfg;
    other.height = other.width = 20;
    CHECK_THROWS_AS(evaluate_policy("p", policy, env::TaskKind::point_reach, {"train"}, other, 1, {1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate_policy("p", policy, env::TaskKind::cart_balance, {"train"}, cfg, 1, {1}),
                    std::invalid_argument);
  }
  SUBCASE("csv and json outputs") {
    const auto dir = std::filesystem::temp_directory_path() / "secant_eval_out";
    std::filesystem::create_directories(dir);
    a.write_csv(dir / "eval.csv");
    a.write_json(dir / "eval.json");
    std::ifstream csv(dir / "eval.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 1 + 3);
    std::ifstream js(dir / "eval.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j.dump().find("test-dynamic") != std::string::npos);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("mean and population std") {
  auto [m, s] = mean_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  CHECK(m == 5.0);
  CHECK(s == 2.0);
  CHECK(mean_std({}) == std::pair<double, double>{0.0, 0.0});
}

TEST_CASE("cycle consistency examples") {
  Rng rng(1);
  SUBCASE("identical embeddings are fully consistent") {
    auto u = random_sequence(15, 50, rng);
    CHECK(cycle_consistency(u, u) == 1.0);
    CHECK(cycle_consistency(u, u, u) == 1.0);
  }
  SUBCASE("three points with one crossed pair") {
    // u0 maps to v0, whose nearest u is u2: index distance 2.
    FeatureSequence u{{0.0f}, {100.0f}, {4.0f}};
    FeatureSequence v{{2.5f}, {100.0f}, {101.0f}};
    std::size_t ok = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t k = argmin_sq(v[argmin_sq(u[i], v)], u);
      ok += (k > i ? k - i : i - k) <= 1;
    }
    CHECK(ok == 2);
    CHECK(cycle_consistency(u, v) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("swapping arguments can change the tolerance-1 score") {
    FeatureSequence u{{0.0f}, {1.0f}, {2.0f}};
    FeatureSequence v{{0.1f}, {0.2f}, {5.0f}};
    CHECK(cycle_consistency(u, v) == doctest::Approx(2.0 / 3.0));
    CHECK(cycle_consistency(v, u) == 1.0);
  }
  SUBCASE("short trajectories are rejected") {
    FeatureSequence one{{0.0f}};
    CHECK_THROWS(cycle_consistency(one, one));
    CHECK_THROWS(subsample(random_sequence(10, 3, rng), 15));
  }
}

TEST_CASE("cycle consistency symmetries") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto u = random_sequence(15, 8, rng), v = random_sequence(15, 8, rng), w = random_sequence(15, 8, rng);
    CHECK(mutual_pairs(u, v) == mutual_pairs(v, u));
    FeatureSequence ur(u.rbegin(), u.rend()), vr(v.rbegin(), v.rend()), wr(w.rbegin(), w.rend());
    CHECK(cycle_consistency(u, v) == cycle_consistency(ur, vr));
    CHECK(cycle_consistency(u, v, w) == cycle_consistency(ur, vr, wr));
    CHECK(cycle_consistency(u, v, w) == cycle_consistency(u, w, v));
    CHECK(cycle_consistency(u, v, w) <= cycle_consistency(u, v) + 1e-12);
  }
}

TEST_CASE("random embeddings match the exchangeability baseline") {
  // With i.i.d. embeddings a round trip that does not return to i lands on each
  // other index with equal probability, so E[acc] = E[p + (1-p) * 2/n].
  Rng rng(3);
  const std::size_t n = 15;
  const int draws = 3000;
  double acc_sum = 0.0, base_sum = 0.0, diff_sq = 0.0;
  for (int t = 0; t < draws; ++t) {
    auto u = random_sequence(n, 64, rng), v = random_sequence(n, 64, rng);
    const double p = static_cast<double>(mutual_pairs(u, v)) / n;
    const double base = p + (1 - p) * 2.0 / n;
    const double acc = cycle_consistency(u, v);
    acc_sum += acc;
    base_sum += base;
    diff_sq += (acc - base) * (acc - base);
  }
  const double mean_diff = (acc_sum - base_sum) / draws;
  const double se = std::sqrt(diff_sq / draws - mean_diff * mean_diff) / std::sqrt(draws);
  INFO("accuracy " << acc_sum / draws << " baseline " << base_sum / draws << " se " << se);
  CHECK(std::abs(mean_diff) < 4 * se + 1e-12);
}

TEST_CASE("stride sampling") {
  CHECK(stride_indices(29, 15) == std::vector<std::size_t>{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28});
  const auto idx = stride_indices(100, 15);
  CHECK(idx.front() == 0);
  CHECK(idx.back() == 99);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK_THROWS(stride_indices(5, 6));
}

TEST_CASE("cycle trials on re-collected trajectories") {
  const auto policy = random_policy(6);
  auto r = cycle_trials(policy, env::TaskKind::point_reach, {"train", "train"}, small_env(), 2, 9, 10);
  CHECK(r.trial_scores == std::vector<double>{1.0, 1.0});
  auto c = cycle_trials(policy, env::TaskKind::point_reach, {"train", "test-color", "test-dynamic"}, small_env(), 2,
                        9, 10);
  CHECK(c.trial_scores.size() == 2);
  for (double s : c.trial_scores) CHECK((s >= 0.0 && s <= 1.0));
  CHECK_THROWS(cycle_trials(policy, env::TaskKind::point_reach, {"train"}, small_env(), 1, 1));
}

TEST_CASE("saliency") {
  Rng rng(7);
  Observation obs(9, 16, 16);
  for (auto& v : obs.data) v = static_cast<float>(rng.uniform(0.3, 0.7));

  SUBCASE("constant policy gives an all-zero map") {
    auto policy = random_policy(8);
    for (auto& [name, t] : policy.params())
      for (auto& v : t.data()) v = 0.0f;
    auto map = saliency_map(policy, obs);
    for (double s : map.values) CHECK(s == 0.0);
  }
  SUBCASE("a network that reads only pixel (0,0)") {
    auto policy = random_policy(9);
    auto& conv = policy.params().at("encoder.conv0.weight");
    for (auto& v : conv.data()) v = 0.0f;
    conv.data()[0] = 1.0f;  // output channel 0, input channel 0, tap (0,0)
    for (auto& v : policy.params().at("encoder.conv0.bias").data()) v = 0.0f;
    auto& fc = policy.params().at("encoder.fc.weight");
    const std::size_t feat = fc.dim(1);
    for (std::size_t i = feat; i < fc.numel(); ++i) fc.data()[i] = 0.0f;  // keep row 0 only
    for (std::size_t k = 0; k < feat; ++k) fc.data()[k] = static_cast<float>(rng.uniform(0.5, 2.0));
    for (auto& v : policy.params().at("encoder.fc.bias").data()) v = static_cast<float>(rng.uniform(-1, 1));

    auto map = saliency_map(policy, obs, 5, 0.2, 3);
    CHECK(map.at(0, 0) > 0.0);
    for (int r = 0; r < map.rows; ++r)
      for (int c = 0; c < map.cols; ++c)
        if (r || c) CHECK(map.at(r, c) == 0.0);
  }
  SUBCASE("map shape tiles with ceil") {
    Observation odd(9, 12, 13, 0.5f);
    ActionFn probe = [](const Observation& o) { return std::vector<float>{o.at(0, 11, 12)}; };
    auto map = saliency_map(probe, odd, 5, 0.2, 1);
    CHECK(map.rows == 3);
    CHECK(map.cols == 3);
    CHECK(map.at(2, 2) > 0.0);
    for (double s : map.values) CHECK(s >= 0.0);
    const auto overlay = saliency_overlay(map, odd);
    CHECK(overlay.channels == 3);
    CHECK(overlay.height == 12);
  }
  SUBCASE("maps are deterministic under a fixed seed") {
    auto policy = random_policy(10);
    CHECK(saliency_map(policy, obs, 5, 0.2, 4).values == saliency_map(policy, obs, 5, 0.2, 4).values);
  }
}

TEST_CASE("embedding export") {
  const auto policy = random_policy(11);
  auto cfg = small_env();
  cfg.episode_length = 40;  // 10 agent steps with action repeat 4
  std::vector<Trajectory> trajs{collect_trajectory(policy, env::TaskKind::point_reach, "train", cfg, 1, "a"),
                                collect_trajectory(policy, env::TaskKind::point_reach, "test-color", cfg, 1, "b")};
  REQUIRE(trajs[0].observations.size() == 10);
  const auto dir = std::filesystem::temp_directory_path() / "secant_embed";
  std::filesystem::create_directories(dir);
  export_embeddings(dir / "e1.csv", policy, trajs);
  export_embeddings(dir / "e2.csv", policy, trajs);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const auto text = slurp(dir / "e1.csv");
  CHECK(text == slurp(dir / "e2.csv"));
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 3 + policy.arch().feature_dim - 1);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 3 + policy.arch().feature_dim - 1);
  }
  CHECK(rows == 20);
  std::filesystem::remove_all(dir);
}

TEST_CASE("latency") {
  auto cfg = small_env();
  cfg.height = cfg.width = 32;
  auto arch = small_arch(16, 256);
  arch.height = arch.width = 32;
  const auto narrow = random_policy(12, arch);
  auto r = measure_latency(narrow, env::TaskKind::point_reach, cfg, 300, 20);
  REQUIRE(r.step_seconds.size() == 300);
  double sum = 0.0;
  for (double s : r.step_seconds) sum += s;
  CHECK(r.mean_seconds == doctest::Approx(sum / 300));
  CHECK(r.backward_calls == 0);
  CHECK(r.parameter_writes == 0);

  auto wide_arch = arch;
  wide_arch.conv_channels *= 2;
  wide_arch.hidden_dim *= 2;
  const auto wide = random_policy(12, wide_arch);
  auto w = measure_latency(wide, env::TaskKind::point_reach, cfg, 300, 20);
  INFO("narrow " << r.mean_seconds << " wide " << w.mean_seconds);
  CHECK(w.mean_seconds >= r.mean_seconds);

  const auto path = std::filesystem::temp_directory_path() / "secant_latency.json";
  write_latency_json(path, r);
  std::ifstream f(path);
  const auto j = nlohmann::json::parse(f);
  CHECK(j.at("steps") == 300);
  std::filesystem::remove(path);
}
