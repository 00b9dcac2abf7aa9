#include "secant/grad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace secant::grad {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& os) : os_(os) {}
  template <typename U>
  void put(U v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(U));
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

 private:
  std::ofstream& os_;
};

class Reader {
 public:
  Reader(std::ifstream& is, std::string path) : is_(is), path_(std::move(path)) {}
  template <typename U>
  U get() {
    U v{};
    bytes(&v, sizeof(U));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw CheckpointError("checkpoint " + path_ + ": truncated file");
  }

 private:
  std::ifstream& is_;
  std::string path_;
};

std::map<std::string, Shape> expected_shapes(const Architecture& arch) {
  std::map<std::string, Shape> out;
  for (const char* part : {"encoder", "actor", "critic1", "critic2"}) {
    for (auto& [n, s] : parameter_shapes(arch, part)) out.emplace(n, s);
  }
  return out;
}

void check_entry(const std::map<std::string, Shape>& expected, const std::string& raw_name,
                 const Shape& shape) {
  if (raw_name.rfind("optim.", 0) == 0 || raw_name.rfind("state.", 0) == 0) return;
  std::string name = raw_name;
  if (name.rfind("target.", 0) == 0) name = name.substr(7);
  auto it = expected.find(name);
  if (it == expected.end()) throw CheckpointError("unexpected tensor '" + raw_name + "'");
  if (it->second != shape) {
    throw CheckpointError("tensor '" + raw_name + "' has shape " + shape_str(shape) +
                          " but the architecture implies " + shape_str(it->second));
  }
}

}  // namespace

template <typename T>
void validate_parameters(const Architecture& arch, const ParameterSet<T>& params) {
  const auto expected = expected_shapes(arch);
  for (const auto& [name, t] : params) check_entry(expected, name, t.shape());
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     const ParameterSet<T>& params) {
  arch.validate();
  validate_parameters(arch, params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  Writer w(os);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  for (int v : {arch.in_channels, arch.height, arch.width, arch.conv_channels, arch.kernel_size,
                arch.feature_dim, arch.mlp_layers, arch.hidden_dim, arch.action_dim}) {
    w.put<std::int32_t>(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.conv_strides.size()));
  for (int s : arch.conv_strides) w.put<std::int32_t>(s);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  const DType tag = std::is_same_v<T, float> ? DType::f32 : DType::f64;
  for (const auto& [name, t] : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(tag));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) w.put<std::uint64_t>(e);
    w.bytes(t.raw(), t.numel() * sizeof(T));
  }
  if (!os) throw CheckpointError("write to " + path.string() + " failed");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(is, path.string());
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint<T> ck;
  auto& a = ck.arch;
  for (int* f : {&a.in_channels, &a.height, &a.width, &a.conv_channels, &a.kernel_size,
                 &a.feature_dim, &a.mlp_layers, &a.hidden_dim, &a.action_dim}) {
    *f = r.get<std::int32_t>();
  }
  const auto n_strides = r.get<std::uint32_t>();
  if (n_strides > 64) throw CheckpointError("implausible stride count");
  a.conv_strides.resize(n_strides);
  for (auto& s : a.conv_strides) s = r.get<std::int32_t>();
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  const auto expected = expected_shapes(a);
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    if (len > 4096) throw CheckpointError("implausible tensor name length");
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    const auto tag = static_cast<DType>(r.get<std::uint8_t>());
    if (tag != DType::f32 && tag != DType::f64) {
      throw CheckpointError("tensor '" + name + "' has unknown dtype tag");
    }
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError("implausible rank for '" + name + "'");
    Shape shape(rank);
    for (auto& e : shape) e = r.get<std::uint64_t>();
    check_entry(expected, name, shape);
    const std::size_t n = shape_numel(shape);
    std::vector<T> values(n);
    if (tag == DType::f32) {
      std::vector<float> buf(n);
      r.bytes(buf.data(), n * sizeof(float));
      std::copy(buf.begin(), buf.end(), values.begin());
    } else {
      std::vector<double> buf(n);
      r.bytes(buf.data(), n * sizeof(double));
      for (std::size_t j = 0; j < n; ++j) values[j] = static_cast<T>(buf[j]);
    }
    ck.params.add(name, Tensor<T>(shape, std::move(values), true));
  }
  return ck;
}

template void save_checkpoint<float>(const std::filesystem::path&, const Architecture&, const ParameterSet<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const Architecture&, const ParameterSet<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);
template void validate_parameters<float>(const Architecture&, const ParameterSet<float>&);
template void validate_parameters<double>(const Architecture&, const ParameterSet<double>&);

}  // namespace secant::grad
