#pragma once

#include <filesystem>
#include <stdexcept>

#include "secant/core/observation.hpp"

namespace secant::io {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes any PNG (gray, gray+alpha, RGB, RGBA, palette, 16-bit) to a
/// 3xHxW image in [0,1]. Alpha is dropped.
Observation read_png(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image (values clamped to [0,1]) as 8-bit PNG.
void write_png(const std::filesystem::path& path, const Observation& image);

/// Bilinear resize of every channel.
Observation resize_bilinear(const Observation& image, int height, int width);

}  // namespace secant::io
