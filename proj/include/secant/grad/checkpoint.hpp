#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "secant/grad/parameters.hpp"

namespace secant::grad {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'C', 'A', 'N', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T>
struct Checkpoint {
  Architecture arch;
  ParameterSet<T> params;
};

/// Binary layout (all integers little-endian):
///   magic[8] "SECANTCK", u32 version,
///   architecture: i32 in_channels, height, width, conv_channels, kernel_size,
///                 feature_dim, mlp_layers, hidden_dim, action_dim,
///                 u32 stride count, i32 strides[...],
///   u32 tensor count, then per tensor:
///     u32 name length, name bytes, u8 dtype tag, u32 rank, u64 extents[rank],
///     little-endian payload.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     const ParameterSet<T>& params);

/// Loads and converts to T. Tensors named encoder.*, actor.*, critic1.*, critic2.*
/// (optionally behind a "target." prefix) must match the shapes implied by the
/// stored architecture; "optim." and "state." entries are free-form.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

/// Shape check of a parameter set against an architecture (same rules as loading).
template <typename T>
void validate_parameters(const Architecture& arch, const ParameterSet<T>& params);

}  // namespace secant::grad
