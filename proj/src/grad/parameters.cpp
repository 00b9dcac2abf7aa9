#include "secant/grad/parameters.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace secant::grad {

std::pair<int, int> Architecture::conv_output_hw() const {
  int h = height, w = width;
  for (int s : conv_strides) {
    h = (h - kernel_size) / s + 1;
    w = (w - kernel_size) / s + 1;
  }
  return {h, w};
}

std::size_t Architecture::flatten_dim() const {
  auto [h, w] = conv_output_hw();
  return static_cast<std::size_t>(conv_channels) * h * w;
}

void Architecture::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("architecture: " + m); };
  if (in_channels < 1 || height < 1 || width < 1) fail("input extents must be positive");
  if (conv_channels < 1) fail("conv_channels must be positive");
  if (kernel_size < 1) fail("kernel_size must be positive");
  if (feature_dim < 1 || hidden_dim < 1 || action_dim < 1) fail("dims must be positive");
  if (mlp_layers < 1) fail("mlp_layers must be >= 1");
  int h = height, w = width;
  for (int s : conv_strides) {
    if (s < 1) fail("conv stride must be >= 1");
    if (h < kernel_size || w < kernel_size) {
      fail("input " + std::to_string(height) + "x" + std::to_string(width) +
           " too small for the conv stack");
    }
    h = (h - kernel_size) / s + 1;
    w = (w - kernel_size) / s + 1;
  }
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const Architecture& arch,
                                                            const std::string& part) {
  using std::size_t;
  std::vector<std::pair<std::string, Shape>> out;
  const auto k = static_cast<size_t>(arch.kernel_size);
  const auto feat = static_cast<size_t>(arch.feature_dim);
  const auto hid = static_cast<size_t>(arch.hidden_dim);
  const auto act = static_cast<size_t>(arch.action_dim);
  auto mlp = [&](const std::string& prefix, size_t in, size_t final_out) {
    for (int l = 0; l < arch.mlp_layers; ++l) {
      const size_t fan_in = l == 0 ? in : hid;
      const size_t fan_out = l == arch.mlp_layers - 1 ? final_out : hid;
      const std::string name = prefix + ".l" + std::to_string(l);
      out.emplace_back(name + ".weight", Shape{fan_in, fan_out});
      out.emplace_back(name + ".bias", Shape{fan_out});
    }
  };
  if (part == "encoder") {
    size_t in = static_cast<size_t>(arch.in_channels);
    for (int i = 0; i < arch.conv_layers(); ++i) {
      const std::string name = "encoder.conv" + std::to_string(i);
      const auto oc = static_cast<size_t>(arch.conv_channels);
      out.emplace_back(name + ".weight", Shape{oc, in, k, k});
      out.emplace_back(name + ".bias", Shape{oc});
      in = oc;
    }
    out.emplace_back("encoder.fc.weight", Shape{arch.flatten_dim(), feat});
    out.emplace_back("encoder.fc.bias", Shape{feat});
    out.emplace_back("encoder.ln.gain", Shape{feat});
    out.emplace_back("encoder.ln.bias", Shape{feat});
  } else if (part == "actor") {
    mlp("actor", feat, 2 * act);
  } else if (part == "critic1" || part == "critic2") {
    mlp(part, feat + act, 1);
  } else {
    throw std::invalid_argument("unknown parameter part '" + part + "'");
  }
  return out;
}

template <typename T>
void ParameterSet<T>::add(std::string name, Tensor<T> tensor) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  for (const auto& [n, _] : entries_) {
    if (n == name) return true;
  }
  return false;
}

template <typename T>
Tensor<T>& ParameterSet<T>::at(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

template <typename T>
std::vector<Tensor<T>> ParameterSet<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& [_, t] : entries_) out.push_back(t);
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::subset(const std::string& prefix) const {
  ParameterSet out;
  for (const auto& [n, t] : entries_) {
    if (n.rfind(prefix, 0) == 0) out.entries_.emplace_back(n, t);
  }
  return out;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::clone() const {
  ParameterSet out;
  for (const auto& [n, t] : entries_) out.entries_.emplace_back(n, t.clone());
  return out;
}

template <typename T>
void ParameterSet<T>::copy_values_from(const ParameterSet& other) {
  for (const auto& [n, src] : other.entries_) {
    auto& dst = at(n);
    if (dst.shape() != src.shape()) {
      throw ShapeError("parameter '" + n + "' shape " + shape_str(dst.shape()) + " vs " +
                       shape_str(src.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
  ++tape_counters().parameter_writes;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::detached() const {
  ParameterSet out;
  for (const auto& [name, t] : entries_) out.entries_.emplace_back(name, t.detach());
  return out;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

template <typename T>
void ParameterSet<T>::set_requires_grad(bool value) {
  for (auto& [_, t] : entries_) t.set_requires_grad(value);
}

template <typename T>
std::uint64_t ParameterSet<T>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [n, t] : entries_) {
    feed(n.data(), n.size());
    feed(t.raw(), t.numel() * sizeof(T));
  }
  return h;
}

template <typename T>
void init_parameters(ParameterSet<T>& set, const Architecture& arch, const std::string& part, Rng& rng) {
  for (auto& [name, shape] : parameter_shapes(arch, part)) {
    Tensor<T> t(shape, T(0), true);
    const bool is_weight = name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
    if (name.find(".ln.gain") != std::string::npos) {
      for (auto& v : t.data()) v = T(1);
    } else if (is_weight) {
      std::size_t fan_in, fan_out;
      if (shape.size() == 4) {
        const std::size_t rf = shape[2] * shape[3];
        fan_in = shape[1] * rf;
        fan_out = shape[0] * rf;
      } else {
        fan_in = shape[0];
        fan_out = shape[1];
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    set.add(name, std::move(t));
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template void init_parameters<float>(ParameterSet<float>&, const Architecture&, const std::string&, Rng&);
template void init_parameters<double>(ParameterSet<double>&, const Architecture&, const std::string&, Rng&);

}  // namespace secant::grad
