#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "secant/core/observation.hpp"
#include "secant/core/rng.hpp"

namespace secant::augment {

enum class OpKind { identity, crop, cutout_color, random_conv, gaussian, impulse, mixup, cutmix };

/// Canonical names: identity, crop, cutout-color, random-conv, gaussian,
/// impulse, mixup, cutmix. parse_op also accepts the short tags
/// Crop, Cc, Cv, G, I, M, Cm (case-insensitive).
std::string op_name(OpKind kind);
std::string op_tag(OpKind kind);
OpKind parse_op(const std::string& name);

struct AugmentParams {
  int crop_pad = 4;
  double patch_min_fraction = 0.1;
  double patch_max_fraction = 0.4;
  double gaussian_sigma = 0.1;
  double impulse_prob = 0.07;
  double mixup_alpha_min = 0.2;
  double mixup_alpha_max = 0.6;

  void validate() const;
};

struct Rect {
  int y = 0;
  int x = 0;
  int h = 0;
  int w = 0;
};

using Rgb = std::array<float, 3>;
/// [out][in][ky][kx] for a 3-to-3 channel 3x3 kernel.
using ConvKernel = std::array<float, 81>;

ConvKernel identity_kernel();

struct DistractorPool {
  std::vector<Observation> images;  // each 3xHxW in [0,1]
  std::string source;               // directory path or "procedural"
  std::size_t count() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

/// A fully parameterized transform. Applying it is a pure function of the op
/// and the input, so one op can be reused across paired observations.
struct AugmentationOp {
  OpKind kind = OpKind::identity;
  int pad = 0;
  std::pair<int, int> offset{0, 0};  // crop (y, x) in padded coordinates
  Rect patch{};                      // cutout-color / cutmix
  Rgb color{};                       // cutout-color
  ConvKernel kernel{};               // random-conv
  double sigma = 0.0;                // gaussian
  double prob = 0.0;                 // impulse
  double alpha = 1.0;                // mixup weight on the observation
  std::size_t image = 0;             // mixup / cutmix pool index
  std::pair<int, int> source{0, 0};  // cutmix region origin in the pool image
  std::uint64_t stream = 0;          // per-pixel noise stream

  std::string name() const { return op_name(kind); }
};

/// Draws fresh parameters for one op kind on an observation of extent h x w.
/// mixup/cutmix require a nonempty pool.
AugmentationOp sample_op(OpKind kind, const AugmentParams& params, int height, int width,
                         const DistractorPool* pool, Rng& rng);

/// Applies an op. Output has the input's shape and lies in [0,1]. Channel
/// count must be a multiple of 3 (stacked RGB frames).
Observation apply(const AugmentationOp& op, const Observation& obs,
                  const DistractorPool* pool = nullptr);

// Direct forms of each operator.

Observation random_crop(const Observation& obs, int pad,
                        std::optional<std::pair<int, int>> offset = std::nullopt,
                        Rng* rng = nullptr);
/// Reflection padding on both spatial sides, as used by random_crop.
Observation reflect_pad(const Observation& obs, int pad);

Observation cutout_color(const Observation& obs, Rng& rng, const AugmentParams& params = {});
Observation cutout_color(const Observation& obs, const Rect& patch, const Rgb& color);

Observation random_conv(const Observation& obs, Rng& rng);
Observation random_conv(const Observation& obs, const ConvKernel& kernel);
ConvKernel sample_conv_kernel(Rng& rng);

Observation gaussian_noise(const Observation& obs, double sigma, Rng& rng);
Observation impulse_noise(const Observation& obs, double prob, Rng& rng);

Observation mixup(const Observation& obs, const DistractorPool& pool, Rng& rng,
                  const AugmentParams& params = {});
Observation mixup(const Observation& obs, const Observation& image, double alpha);

Observation cutmix(const Observation& obs, const DistractorPool& pool, Rng& rng,
                   const AugmentParams& params = {});
Observation cutmix(const Observation& obs, const Observation& image, const Rect& patch,
                   std::pair<int, int> source);

struct ComboRecipe {
  std::string name;
  std::vector<OpKind> kinds;

  bool needs_pool() const;
  bool operator==(const ComboRecipe&) const = default;
};

/// Combo1, Combo2, Combo3, "none", "weak", any single op name or tag, or a
/// custom "+"-joined list such as "Cc+G+Crop".
ComboRecipe recipe_from_name(const std::string& name);
ComboRecipe combo1();
ComboRecipe combo2();
ComboRecipe combo3();

/// Uniform choice over member kinds with fresh parameters.
AugmentationOp sample_from_recipe(const ComboRecipe& recipe, const AugmentParams& params, int height,
                                  int width, const DistractorPool* pool, Rng& rng);

/// One independently sampled op per observation.
std::vector<Observation> augment_batch(std::span<const Observation> batch, const ComboRecipe& recipe,
                                       const AugmentParams& params, const DistractorPool* pool,
                                       Rng& rng);

/// Procedural distractors: mixtures of colored oriented gratings and blobs.
DistractorPool procedural_pool(std::size_t count, int height, int width, std::uint64_t seed);

/// Loads every *.png in `directory` (sorted by name), resized to height x width.
/// Unreadable files are skipped with a warning on stderr. With no usable image,
/// falls back to `fallback_size` procedural images, or throws when
/// `allow_fallback` is false.
DistractorPool load_distractor_pool(const std::filesystem::path& directory, int height, int width,
                                    std::size_t fallback_size = 64, bool allow_fallback = true,
                                    std::uint64_t seed = 0);

}  // namespace secant::augment
