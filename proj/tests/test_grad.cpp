#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "secant/grad/adam.hpp"
#include "secant/grad/checkpoint.hpp"
#include "secant/grad/ops.hpp"
#include "secant/grad/parameters.hpp"
#include "secant/nets/networks.hpp"
#include "suites.hpp"

using namespace secant;
using namespace secant::grad;
using secant::testing::gradcheck;
using secant::testing::random_tensor;
using TensorD = Tensor<double>;

namespace {

std::vector<double> values(const TensorD& t) { return {t.data().begin(), t.data().end()}; }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("conv2d of ones sums the window") {
  TensorD x({1, 1, 3, 3}, 1.0), k({1, 1, 2, 2}, 1.0), b({1}, 0.0);
  auto y = conv2d(x, k, b, 1);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (double v : y.data()) CHECK(v == 4.0);
}

TEST_CASE("conv2d with an identity 1x1 kernel is the identity") {
  Rng rng(1);
  auto x = random_tensor({2, 3, 5, 4}, rng, -1, 1, false);
  TensorD k({3, 3, 1, 1}, 0.0), b({3}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  CHECK(values(conv2d(x, k, b, 1)) == values(x));
}

TEST_CASE("conv2d matches the naive loop reference") {
  Rng rng(2);
  auto x = random_tensor({2, 3, 8, 8}, rng, -1, 1, false);
  auto k = random_tensor({4, 3, 3, 3}, rng, -1, 1, false);
  auto b = random_tensor({4}, rng, -1, 1, false);
  auto y = conv2d(x, k, b, 2);
  CHECK(y.shape() == Shape{2, 4, 3, 3});
  const auto ref = testing::naive_conv2d(values(x), 2, 3, 8, 8, values(k), 4, 3, values(b), 2);
  CHECK(max_abs_diff(values(y), ref) < 1e-12);
}

TEST_CASE("conv2d rejects mismatched channels and names both shapes") {
  TensorD x({1, 2, 5, 5}), k({1, 3, 3, 3}), b({1});
  try {
    conv2d(x, k, b, 1);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(shape_str(x.shape())) != std::string::npos);
    CHECK(msg.find(shape_str(k.shape())) != std::string::npos);
  }
  CHECK_THROWS(conv2d(TensorD({1, 3, 5, 5}), k, b, 0));
}

TEST_CASE("linear examples and naive oracle") {
  Rng rng(3);
  auto x = random_tensor({5, 7}, rng, -1, 1, false);
  TensorD eye({7, 7}, 0.0), zero_b({7}, 0.0);
  for (std::size_t i = 0; i < 7; ++i) eye[i * 7 + i] = 1.0;
  CHECK(values(linear(x, eye, zero_b)) == values(x));

  auto b = random_tensor({4}, rng, -1, 1, false);
  auto y0 = linear(x, TensorD({7, 4}, 0.0), b);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t j = 0; j < 4; ++j) CHECK(y0[r * 4 + j] == b[j]);

  auto w = random_tensor({7, 4}, rng, -1, 1, false);
  CHECK(max_abs_diff(values(linear(x, w, b)), testing::naive_linear(values(x), 5, 7, values(w), 4, values(b))) <
        1e-12);
  CHECK_THROWS_AS(linear(x, TensorD({6, 4}), b), ShapeError);
}

TEST_CASE("activation values") {
  TensorD x({2}, std::vector<double>{-1.0, 2.0});
  CHECK(values(relu(x)) == std::vector<double>{0.0, 2.0});
  CHECK(grad::tanh(TensorD({1}, 0.0)).item() == 0.0);
}

TEST_CASE("softplus gradient equals the sigmoid within 1e-6 of central differences") {
  for (double x0 : {-4.0, -1.3, 0.0, 0.7, 3.5}) {
    TensorD x({1}, x0, true);
    backward(sum(softplus(x)));
    const double sigmoid = 1.0 / (1.0 + std::exp(-x0));
    const double h = 1e-5;
    const double fd = (std::log1p(std::exp(x0 + h)) - std::log1p(std::exp(x0 - h))) / (2 * h);
    CHECK(std::abs(x.grad()[0] - sigmoid) < 1e-12);
    CHECK(std::abs(x.grad()[0] - fd) < 1e-6);
  }
}

TEST_CASE("squashed gaussian log-density") {
  SUBCASE("standard normal at zero") {
    auto lp = squashed_gaussian_logprob(TensorD({1, 1}, 0.0), TensorD({1, 1}, 0.0), TensorD({1, 1}, 0.0));
    CHECK(lp.item() == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-14));
  }
  SUBCASE("independent dimensions add") {
    TensorD m({1, 2}, std::vector<double>{0.3, -0.4}), s({1, 2}, std::vector<double>{-0.2, 0.5}),
        z({1, 2}, std::vector<double>{1.1, -0.6});
    double separate = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      separate += squashed_gaussian_logprob(TensorD({1, 1}, m[i]), TensorD({1, 1}, s[i]), TensorD({1, 1}, z[i]))
                      .item();
    }
    CHECK(squashed_gaussian_logprob(m, s, z).item() == doctest::Approx(separate).epsilon(1e-13));
  }
  SUBCASE("matches the quadrature density of the squashed variable") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const double mu = rng.uniform(-1, 1), log_std = rng.uniform(-1.5, 0.5), z0 = rng.uniform(-1.5, 1.5);
      const double sd = std::exp(log_std);
      const double a0 = std::tanh(z0), delta = 1e-3;
      const double lo = std::atanh(a0 - delta), hi = std::atanh(a0 + delta);
      const int n = 2000;
      const double step = (hi - lo) / n;
      auto pdf = [&](double z) {
        return std::exp(-0.5 * (z - mu) * (z - mu) / (sd * sd)) / (sd * std::sqrt(2 * std::numbers::pi));
      };
      double integral = pdf(lo) + pdf(hi);
      for (int i = 1; i < n; ++i) integral += (i % 2 ? 4.0 : 2.0) * pdf(lo + i * step);
      integral *= step / 3.0;
      const double density = integral / (2 * delta);
      const double lp =
          squashed_gaussian_logprob(TensorD({1, 1}, mu), TensorD({1, 1}, log_std), TensorD({1, 1}, z0)).item();
      CHECK(std::abs(std::exp(lp) - density) / density < 1e-3);
    }
  }
}

TEST_CASE("backward basics") {
  Rng rng(5);
  auto x = random_tensor({3, 4}, rng);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);
  x.zero_grad();
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x[i]).epsilon(1e-15));
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(4 * x[i]).epsilon(1e-15));
  CHECK_THROWS(backward(mul(x, x)));
  x.zero_grad();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("full actor-loss graph on a mini network matches finite differences") {
  Architecture arch;
  arch.in_channels = 3;
  arch.height = arch.width = 7;
  arch.conv_channels = 2;
  arch.conv_strides = {2};
  arch.feature_dim = 4;
  arch.mlp_layers = 2;
  arch.hidden_dim = 5;
  arch.action_dim = 2;
  Rng rng(6);
  ParameterSet<double> params;
  for (const char* part : {"encoder", "actor", "critic1", "critic2"}) init_parameters(params, arch, part, rng);
  // Perturb biases and gains away from their structured initial values.
  for (auto& [name, t] : params) {
    for (auto& v : t.data()) v += rng.uniform(-0.1, 0.1);
  }
  auto obs = random_tensor({2, 3, 7, 7}, rng, 0, 1, false);
  const double alpha = 0.2;
  std::vector<TensorD> leaves = params.tensors();
  testing::LossFn loss = [&](const std::vector<TensorD>&) {
    Rng noise(99);
    auto feat = nets::encode(params, arch, obs);
    auto head = nets::actor_head(params, arch, feat);
    auto sample = nets::sample_action(head, noise);
    auto q = minimum(nets::critic_head(params, arch, "critic1", feat, sample.action),
                     nets::critic_head(params, arch, "critic2", feat, sample.action));
    return mean(sub(scale(sample.log_prob, alpha), q));
  };
  CHECK(gradcheck(loss, leaves) < 1e-4);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged and advances the step") {
    ParameterSet<double> p;
    p.add("w", TensorD({3}, std::vector<double>{1, 2, 3}, true));
    Adam<double> opt(p, {0.1});
    backward(scale(sum(p.at("w")), 0.0));
    opt.step();
    CHECK(values(p.at("w")) == std::vector<double>{1, 2, 3});
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("first step with constant gradient moves by lr") {
    ParameterSet<double> p;
    p.add("w", TensorD({4}, std::vector<double>{0.5, -1, 2, 0}, true));
    Adam<double> opt(p, {0.01});
    backward(scale(sum(p.at("w")), 3.0));
    opt.step();
    const std::vector<double> expect{0.49, -1.01, 1.99, -0.01};
    CHECK(max_abs_diff(values(p.at("w")), expect) < 1e-6);
    for (double g : p.at("w").grad()) CHECK(g == 0.0);
  }
  SUBCASE("two steps reproduce a scalar reference trace") {
    ParameterSet<double> p;
    p.add("w", TensorD({2}, std::vector<double>{0.3, -0.7}, true));
    const AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
    Adam<double> opt(p, cfg);
    std::vector<double> w{0.3, -0.7}, m(2, 0.0), v(2, 0.0);
    for (int t = 1; t <= 2; ++t) {
      backward(sum(mul(p.at("w"), p.at("w"))));
      opt.step();
      for (int i = 0; i < 2; ++i) {
        const double g = 2 * w[i];
        m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
        const double mh = m[i] / (1 - std::pow(cfg.beta1, t)), vh = v[i] / (1 - std::pow(cfg.beta2, t));
        w[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      }
    }
    CHECK(max_abs_diff(values(p.at("w")), w) < 1e-14);
    CHECK(opt.first_moments()[0].size() == 2);
  }
  SUBCASE("missing gradient is rejected") {
    ParameterSet<double> p;
    p.add("w", TensorD({2}, 1.0, true));
    Adam<double> opt(p);
    CHECK_THROWS_AS(opt.step(), std::logic_error);
  }
}

TEST_CASE("identical seeds give bit-identical forward values and gradients") {
  auto run = [] {
    Architecture arch;
    arch.height = arch.width = 20;
    arch.conv_strides = {2, 1};
    arch.conv_channels = 4;
    arch.hidden_dim = 16;
    Rng rng(7);
    auto policy = nets::Policy<double>::initialize(arch, rng);
    auto obs = random_tensor({2, 9, 20, 20}, rng, 0, 1, false);
    auto out = sum(policy.act(obs));
    backward(out);
    std::vector<double> grads;
    for (auto& [n, t] : policy.params()) grads.insert(grads.end(), t.grad().begin(), t.grad().end());
    return std::make_pair(out.item(), grads);
  };
  CHECK(run() == run());
}

TEST_CASE("encoder geometry over an 84x84 stacked input yields a 50-d feature") {
  Architecture arch;
  // 84 -> 41 -> 39 -> 37 -> 18 with unpadded 3x3 kernels and strides 2,1,1,2.
  CHECK(arch.conv_output_hw() == std::pair{18, 18});
  CHECK(arch.flatten_dim() == 32u * 18 * 18);
  Rng rng(8);
  ParameterSet<float> params;
  init_parameters(params, arch, "encoder", rng);
  Tensor<float> obs({1, 9, 84, 84}, 0.5f);
  CHECK(nets::encode(params, arch, obs).shape() == Shape{1, 50});
}

TEST_CASE("checkpoint round trip and validation") {
  Architecture arch;
  arch.height = arch.width = 16;
  arch.conv_strides = {2};
  arch.conv_channels = 3;
  arch.hidden_dim = 8;
  arch.action_dim = 2;
  Rng rng(9);
  ParameterSet<float> params;
  for (const char* part : {"encoder", "actor"}) init_parameters(params, arch, part, rng);
  params.add("state.extra", Tensor<float>({3}, 1.5f));
  const auto path = std::filesystem::temp_directory_path() / "secant_grad_ckpt.bin";
  save_checkpoint(path, arch, params);
  auto loaded = load_checkpoint<float>(path);
  CHECK(loaded.arch == arch);
  CHECK(loaded.params.checksum() == params.checksum());

  auto as_double = load_checkpoint<double>(path);
  CHECK(as_double.params.at("encoder.fc.weight")[0] == static_cast<double>(params.at("encoder.fc.weight")[0]));

  ParameterSet<float> wrong;
  wrong.add("actor.l0.weight", Tensor<float>({3, 3}));
  CHECK_THROWS(save_checkpoint(path, arch, wrong));

  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("gradient suite: every op passes finite differences over 100 instances") {
  for (const auto& r : testing::run_gradient_suite(100)) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}
