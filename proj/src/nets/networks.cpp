#include "secant/nets/networks.hpp"

#include <stdexcept>

namespace secant::nets {

using namespace secant::grad;

template <typename T>
Tensor<T> encode_conv(const ParameterSet<T>& params, const Architecture& arch, const Tensor<T>& obs) {
  Tensor<T> h = obs;
  for (int i = 0; i < arch.conv_layers(); ++i) {
    const std::string name = "encoder.conv" + std::to_string(i);
    h = relu(conv2d(h, params.at(name + ".weight"), params.at(name + ".bias"),
                    static_cast<std::size_t>(arch.conv_strides[i])));
  }
  return flatten(h);
}

template <typename T>
Tensor<T> encode_head(const ParameterSet<T>& params, const Tensor<T>& conv_flat) {
  auto h = linear(conv_flat, params.at("encoder.fc.weight"), params.at("encoder.fc.bias"));
  h = layer_norm(h, params.at("encoder.ln.gain"), params.at("encoder.ln.bias"));
  return grad::tanh(h);
}

template <typename T>
Tensor<T> encode(const ParameterSet<T>& params, const Architecture& arch, const Tensor<T>& obs) {
  return encode_head(params, encode_conv(params, arch, obs));
}

namespace {

template <typename T>
Tensor<T> mlp(const ParameterSet<T>& params, const Architecture& arch, const std::string& prefix,
              Tensor<T> h) {
  for (int l = 0; l < arch.mlp_layers; ++l) {
    const std::string name = prefix + ".l" + std::to_string(l);
    h = linear(h, params.at(name + ".weight"), params.at(name + ".bias"));
    if (l + 1 < arch.mlp_layers) h = relu(h);
  }
  return h;
}

}  // namespace

template <typename T>
GaussianHead<T> actor_head(const ParameterSet<T>& params, const Architecture& arch, const Tensor<T>& features) {
  auto out = mlp(params, arch, "actor", features);
  const auto d = static_cast<std::size_t>(arch.action_dim);
  return {slice_cols(out, 0, d),
          clamp(slice_cols(out, d, d), static_cast<T>(kLogStdMin), static_cast<T>(kLogStdMax))};
}

template <typename T>
Tensor<T> critic_head(const ParameterSet<T>& params, const Architecture& arch, const std::string& which,
                      const Tensor<T>& features, const Tensor<T>& action) {
  return mlp(params, arch, which, concat_cols(features, action));
}

template <typename T>
PolicySample<T> sample_action(const GaussianHead<T>& head, Rng& rng) {
  Tensor<T> noise(head.mean.shape());
  for (auto& v : noise.data()) v = static_cast<T>(rng.normal());
  auto z = add(head.mean, mul(grad::exp(head.log_std), noise));
  return {grad::tanh(z), squashed_gaussian_logprob(head.mean, head.log_std, z)};
}

template <typename T>
Policy<T>::Policy(Architecture arch, ParameterSet<T> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  for (const char* part : {"encoder", "actor"}) {
    for (auto& [name, shape] : parameter_shapes(arch_, part)) {
      if (!params_.contains(name)) throw std::invalid_argument("policy is missing '" + name + "'");
      if (params_.at(name).shape() != shape) {
        throw ShapeError("policy parameter '" + name + "' has shape " +
                         shape_str(params_.at(name).shape()) + ", expected " + shape_str(shape));
      }
    }
  }
}

template <typename T>
Policy<T> Policy<T>::initialize(const Architecture& arch, Rng& rng) {
  arch.validate();
  ParameterSet<T> p;
  init_parameters(p, arch, "encoder", rng);
  init_parameters(p, arch, "actor", rng);
  return Policy(arch, std::move(p));
}

template <typename T>
Policy<T> Policy<T>::extract(const Architecture& arch, const ParameterSet<T>& source) {
  ParameterSet<T> p;
  for (const char* part : {"encoder", "actor"}) {
    for (auto& [name, _] : parameter_shapes(arch, part)) {
      if (!source.contains(name)) throw std::invalid_argument("source set is missing '" + name + "'");
      p.add(name, source.at(name).clone());
    }
  }
  return Policy(arch, std::move(p));
}

template <typename T>
Tensor<T> Policy<T>::act(const Tensor<T>& obs) const {
  return grad::tanh(head(obs).mean);
}

template <typename T>
std::vector<float> Policy<T>::act(const Observation& obs) const {
  NoGradGuard guard;
  auto a = act(to_tensor<T>(obs));
  return {a.data().begin(), a.data().end()};
}

#define SECANT_INSTANTIATE_NETS(T)                                                                  \
  template Tensor<T> encode(const ParameterSet<T>&, const Architecture&, const Tensor<T>&);         \
  template Tensor<T> encode_conv(const ParameterSet<T>&, const Architecture&, const Tensor<T>&);    \
  template Tensor<T> encode_head(const ParameterSet<T>&, const Tensor<T>&);                         \
  template GaussianHead<T> actor_head(const ParameterSet<T>&, const Architecture&, const Tensor<T>&); \
  template Tensor<T> critic_head(const ParameterSet<T>&, const Architecture&, const std::string&,   \
                                 const Tensor<T>&, const Tensor<T>&);                               \
  template PolicySample<T> sample_action(const GaussianHead<T>&, Rng&);                            \
  template class Policy<T>;

SECANT_INSTANTIATE_NETS(float)
SECANT_INSTANTIATE_NETS(double)

}  // namespace secant::nets
