#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "secant/cli/app.hpp"
#include "secant/env/pixel_env.hpp"
#include "secant/eval/eval.hpp"
#include "secant/eval/rollout.hpp"
#include "secant/grad/checkpoint.hpp"
#include "secant/nets/networks.hpp"

namespace py = pybind11;
using namespace secant;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray to_numpy(const Observation& obs) {
  FloatArray out({obs.channels, obs.height, obs.width});
  std::copy(obs.data.begin(), obs.data.end(), out.mutable_data());
  return out;
}

Observation from_numpy(const FloatArray& array) {
  if (array.ndim() != 3) throw std::invalid_argument("observation must have shape (channels, height, width)");
  Observation obs(static_cast<int>(array.shape(0)), static_cast<int>(array.shape(1)),
                  static_cast<int>(array.shape(2)));
  std::copy(array.data(), array.data() + array.size(), obs.data.begin());
  return obs;
}

FloatArray to_numpy(const std::vector<float>& v) {
  FloatArray out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

eval::FeatureSequence rows(const FloatArray& array) {
  if (array.ndim() != 2) throw std::invalid_argument("feature sequence must be a 2-D array");
  eval::FeatureSequence out(static_cast<std::size_t>(array.shape(0)));
  const auto cols = static_cast<std::size_t>(array.shape(1));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].assign(array.data() + i * cols, array.data() + (i + 1) * cols);
  return out;
}

}  // namespace

PYBIND11_MODULE(_secant, m) {
  m.doc() = "Native core of the secant package";

  py::class_<env::EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("height", &env::EnvConfig::height)
      .def_readwrite("width", &env::EnvConfig::width)
      .def_readwrite("frame_stack", &env::EnvConfig::frame_stack)
      .def_readwrite("action_repeat", &env::EnvConfig::action_repeat)
      .def_readwrite("episode_length", &env::EnvConfig::episode_length)
      .def("agent_steps", &env::EnvConfig::agent_steps);

  py::class_<env::PixelEnv>(m, "PixelEnv")
      .def(py::init([](const std::string& task, const std::string& variant, const env::EnvConfig& config,
                       std::uint64_t seed, std::uint64_t variant_seed) {
             return env::PixelEnv(env::parse_task(task), env::VariantSpec::from_name(variant, variant_seed), config,
                                  seed);
           }),
           py::arg("task") = "point-reach", py::arg("variant") = "train", py::arg("config") = env::EnvConfig{},
           py::arg("seed") = 0, py::arg("variant_seed") = 0)
      .def("reset", [](env::PixelEnv& e) { return to_numpy(e.reset()); })
      .def("step",
           [](env::PixelEnv& e, const FloatArray& action) {
             auto r = e.step(std::span<const float>(action.data(), static_cast<std::size_t>(action.size())));
             return py::make_tuple(to_numpy(r.observation), r.reward(), r.done);
           })
      .def_property_readonly("action_dim", &env::PixelEnv::action_dim)
      .def_property_readonly("done", &env::PixelEnv::done);

  py::class_<nets::Policy<float>>(m, "Policy")
      .def_static(
          "load",
          [](const std::string& path) {
            auto ck = grad::load_checkpoint<float>(path);
            return nets::Policy<float>::extract(ck.arch, ck.params);
          },
          py::arg("path"))
      .def("act", [](const nets::Policy<float>& p, const FloatArray& obs) { return to_numpy(p.act(from_numpy(obs))); })
      .def("features",
           [](const nets::Policy<float>& p, const FloatArray& obs) {
             const auto f = eval::embed(p, {from_numpy(obs)});
             return to_numpy(f.front());
           })
      .def_property_readonly("action_dim", [](const nets::Policy<float>& p) { return p.arch().action_dim; })
      .def_property_readonly("checksum", [](const nets::Policy<float>& p) { return p.params().checksum(); });

  m.def(
      "scripted_returns",
      [](const std::string& task, const std::string& variant, const env::EnvConfig& config, int episodes,
         std::uint64_t seed) {
        return eval::scripted_returns(env::parse_task(task), env::VariantSpec::from_name(variant, seed), config,
                                      episodes, seed);
      },
      py::arg("task"), py::arg("variant"), py::arg("config"), py::arg("episodes"), py::arg("seed") = 0);

  m.def(
      "cycle_consistency",
      [](const FloatArray& u, const FloatArray& v) { return eval::cycle_consistency(rows(u), rows(v)); },
      py::arg("u"), py::arg("v"), "Fraction of rows of u whose round trip through v returns within one index.");

  m.def(
      "run_cli", [](const std::vector<std::string>& args) { return cli::run_cli(args); }, py::arg("args"),
      "Runs the command-line tool in-process and returns its exit code.");

  py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);
}
