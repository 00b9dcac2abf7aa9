#include "secant/augment/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "secant/io/png.hpp"

namespace secant::augment {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void require_rgb_stack(const Observation& obs) {
  if (obs.channels <= 0 || obs.channels % 3 != 0) {
    throw std::invalid_argument("augmentation expects stacked RGB frames, got " +
                                std::to_string(obs.channels) + " channels");
  }
}

void require_pool(const DistractorPool* pool, OpKind kind) {
  if (pool == nullptr || pool->empty()) {
    throw std::invalid_argument(op_name(kind) + " needs a nonempty distractor pool");
  }
}

// Mirror index without repeating the edge sample.
inline int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

Rect sample_patch(const AugmentParams& p, int height, int width, Rng& rng) {
  auto side = [&](int extent) {
    const double frac = rng.uniform(p.patch_min_fraction, p.patch_max_fraction);
    return std::clamp(static_cast<int>(std::lround(frac * extent)), 1, extent);
  };
  Rect r;
  r.h = side(height);
  r.w = side(width);
  r.y = rng.uniform_int(0, height - r.h);
  r.x = rng.uniform_int(0, width - r.w);
  return r;
}

void check_patch(const Rect& r, int height, int width) {
  if (r.h < 0 || r.w < 0 || r.y < 0 || r.x < 0 || r.y + r.h > height || r.x + r.w > width) {
    throw std::invalid_argument("patch outside the observation");
  }
}

const Observation& matching_image(const Observation& image, const Observation& obs) {
  if (image.channels != 3 || image.height != obs.height || image.width != obs.width) {
    throw std::invalid_argument("distractor image must be 3x" + std::to_string(obs.height) + "x" +
                                std::to_string(obs.width));
  }
  return image;
}

}  // namespace

std::string op_name(OpKind kind) {
  switch (kind) {
    case OpKind::identity: return "identity";
    case OpKind::crop: return "crop";
    case OpKind::cutout_color: return "cutout-color";
    case OpKind::random_conv: return "random-conv";
    case OpKind::gaussian: return "gaussian";
    case OpKind::impulse: return "impulse";
    case OpKind::mixup: return "mixup";
    case OpKind::cutmix: return "cutmix";
  }
  return "?";
}

std::string op_tag(OpKind kind) {
  switch (kind) {
    case OpKind::identity: return "Id";
    case OpKind::crop: return "Crop";
    case OpKind::cutout_color: return "Cc";
    case OpKind::random_conv: return "Cv";
    case OpKind::gaussian: return "G";
    case OpKind::impulse: return "I";
    case OpKind::mixup: return "M";
    case OpKind::cutmix: return "Cm";
  }
  return "?";
}

OpKind parse_op(const std::string& name) {
  const std::string n = lower(name);
  for (OpKind k : {OpKind::identity, OpKind::crop, OpKind::cutout_color, OpKind::random_conv,
                   OpKind::gaussian, OpKind::impulse, OpKind::mixup, OpKind::cutmix}) {
    if (n == op_name(k) || n == lower(op_tag(k))) return k;
  }
  if (n == "none") return OpKind::identity;
  throw std::invalid_argument("unknown augmentation '" + name + "'");
}

void AugmentParams::validate() const {
  if (crop_pad < 0) throw std::invalid_argument("crop_pad: must be >= 0");
  if (!(patch_min_fraction >= 0.0 && patch_min_fraction <= patch_max_fraction && patch_max_fraction <= 1.0)) {
    throw std::invalid_argument("patch_min_fraction/patch_max_fraction: must satisfy 0 <= min <= max <= 1");
  }
  if (!(gaussian_sigma >= 0.0)) throw std::invalid_argument("gaussian_sigma: must be >= 0");
  if (!(impulse_prob >= 0.0 && impulse_prob <= 1.0)) {
    throw std::invalid_argument("impulse_prob: must lie in [0,1]");
  }
  if (!(mixup_alpha_min >= 0.0 && mixup_alpha_min <= mixup_alpha_max && mixup_alpha_max <= 1.0)) {
    throw std::invalid_argument("mixup_alpha_min/mixup_alpha_max: must satisfy 0 <= min <= max <= 1");
  }
}

ConvKernel identity_kernel() {
  ConvKernel k{};
  for (int c = 0; c < 3; ++c) k[(c * 3 + c) * 9 + 4] = 1.0f;
  return k;
}

Observation reflect_pad(const Observation& obs, int pad) {
  if (pad < 0) throw std::invalid_argument("pad must be >= 0");
  if (pad > 0 && pad >= std::min(obs.height, obs.width)) {
    throw std::invalid_argument("reflection pad " + std::to_string(pad) + " too large for " +
                                std::to_string(obs.height) + "x" + std::to_string(obs.width));
  }
  Observation out(obs.channels, obs.height + 2 * pad, obs.width + 2 * pad);
  for (int c = 0; c < obs.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      const int sy = reflect(y - pad, obs.height);
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = obs.at(c, sy, reflect(x - pad, obs.width));
    }
  }
  return out;
}

Observation random_crop(const Observation& obs, int pad, std::optional<std::pair<int, int>> offset, Rng* rng) {
  if (pad < 0) throw std::invalid_argument("pad must be >= 0");
  if (pad > 0 && pad >= std::min(obs.height, obs.width)) {
    throw std::invalid_argument("reflection pad " + std::to_string(pad) + " too large for " +
                                std::to_string(obs.height) + "x" + std::to_string(obs.width));
  }
  std::pair<int, int> off;
  if (offset) {
    off = *offset;
    if (off.first < 0 || off.first > 2 * pad || off.second < 0 || off.second > 2 * pad) {
      throw std::invalid_argument("crop offset outside [0, 2*pad]");
    }
  } else {
    if (rng == nullptr) throw std::invalid_argument("random_crop needs an offset or an rng");
    off = {rng->uniform_int(0, 2 * pad), rng->uniform_int(0, 2 * pad)};
  }
  Observation out(obs.channels, obs.height, obs.width);
  const int dy = off.first - pad, dx = off.second - pad;
  for (int c = 0; c < obs.channels; ++c) {
    for (int y = 0; y < obs.height; ++y) {
      const int sy = reflect(y + dy, obs.height);
      for (int x = 0; x < obs.width; ++x) out.at(c, y, x) = obs.at(c, sy, reflect(x + dx, obs.width));
    }
  }
  return out;
}

Observation cutout_color(const Observation& obs, const Rect& patch, const Rgb& color) {
  require_rgb_stack(obs);
  check_patch(patch, obs.height, obs.width);
  Observation out = obs;
  for (int c = 0; c < obs.channels; ++c) {
    const float v = std::clamp(color[c % 3], 0.0f, 1.0f);
    for (int y = patch.y; y < patch.y + patch.h; ++y) {
      for (int x = patch.x; x < patch.x + patch.w; ++x) out.at(c, y, x) = v;
    }
  }
  return out;
}

Observation cutout_color(const Observation& obs, Rng& rng, const AugmentParams& params) {
  return apply(sample_op(OpKind::cutout_color, params, obs.height, obs.width, nullptr, rng), obs);
}

ConvKernel sample_conv_kernel(Rng& rng) {
  // fan_in = fan_out = 3 * 3 * 3
  const double bound = std::sqrt(6.0 / 54.0);
  ConvKernel k{};
  for (auto& v : k) v = static_cast<float>(rng.uniform(-bound, bound));
  return k;
}

Observation random_conv(const Observation& obs, const ConvKernel& kernel) {
  require_rgb_stack(obs);
  const int H = obs.height, W = obs.width;
  Observation out(obs.channels, H, W);
  for (int f = 0; f < obs.channels / 3; ++f) {
    for (int o = 0; o < 3; ++o) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          float acc = 0.0f;
          for (int i = 0; i < 3; ++i) {
            const float* k = &kernel[(o * 3 + i) * 9];
            for (int ky = 0; ky < 3; ++ky) {
              const int sy = reflect(y + ky - 1, H);
              for (int kx = 0; kx < 3; ++kx) {
                acc += k[ky * 3 + kx] * obs.at(f * 3 + i, sy, reflect(x + kx - 1, W));
              }
            }
          }
          out.at(f * 3 + o, y, x) = acc;
        }
      }
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(out.data.begin(), out.data.end());
  const float lo = *lo_it, hi = *hi_it;
  if (hi - lo > 1e-12f) {
    const float inv = 1.0f / (hi - lo);
    for (auto& v : out.data) v = std::clamp((v - lo) * inv, 0.0f, 1.0f);
  } else {
    for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

Observation random_conv(const Observation& obs, Rng& rng) { return random_conv(obs, sample_conv_kernel(rng)); }

Observation gaussian_noise(const Observation& obs, double sigma, Rng& rng) {
  AugmentationOp op;
  op.kind = OpKind::gaussian;
  op.sigma = sigma;
  op.stream = rng.next_seed();
  return apply(op, obs);
}

Observation impulse_noise(const Observation& obs, double prob, Rng& rng) {
  AugmentationOp op;
  op.kind = OpKind::impulse;
  op.prob = prob;
  op.stream = rng.next_seed();
  return apply(op, obs);
}

Observation mixup(const Observation& obs, const Observation& image, double alpha) {
  require_rgb_stack(obs);
  matching_image(image, obs);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("mixup alpha must lie in [0,1]");
  if (alpha == 1.0) return obs;
  Observation out(obs.channels, obs.height, obs.width);
  const std::size_t plane = obs.plane();
  const float a = static_cast<float>(alpha), b = static_cast<float>(1.0 - alpha);
  for (int c = 0; c < obs.channels; ++c) {
    const float* src = obs.data.data() + c * plane;
    const float* img = image.data.data() + (c % 3) * plane;
    float* dst = out.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = std::clamp(a * src[i] + b * img[i], 0.0f, 1.0f);
  }
  return out;
}

Observation mixup(const Observation& obs, const DistractorPool& pool, Rng& rng, const AugmentParams& params) {
  return apply(sample_op(OpKind::mixup, params, obs.height, obs.width, &pool, rng), obs, &pool);
}

Observation cutmix(const Observation& obs, const Observation& image, const Rect& patch,
                   std::pair<int, int> source) {
  require_rgb_stack(obs);
  matching_image(image, obs);
  check_patch(patch, obs.height, obs.width);
  check_patch(Rect{source.first, source.second, patch.h, patch.w}, image.height, image.width);
  Observation out = obs;
  for (int c = 0; c < obs.channels; ++c) {
    for (int y = 0; y < patch.h; ++y) {
      for (int x = 0; x < patch.w; ++x) {
        out.at(c, patch.y + y, patch.x + x) =
            std::clamp(image.at(c % 3, source.first + y, source.second + x), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

Observation cutmix(const Observation& obs, const DistractorPool& pool, Rng& rng, const AugmentParams& params) {
  return apply(sample_op(OpKind::cutmix, params, obs.height, obs.width, &pool, rng), obs, &pool);
}

AugmentationOp sample_op(OpKind kind, const AugmentParams& params, int height, int width,
                         const DistractorPool* pool, Rng& rng) {
  AugmentationOp op;
  op.kind = kind;
  switch (kind) {
    case OpKind::identity:
      break;
    case OpKind::crop:
      op.pad = params.crop_pad;
      op.offset = {rng.uniform_int(0, 2 * op.pad), rng.uniform_int(0, 2 * op.pad)};
      break;
    case OpKind::cutout_color:
      op.patch = sample_patch(params, height, width, rng);
      for (auto& c : op.color) c = static_cast<float>(rng.uniform());
      break;
    case OpKind::random_conv:
      op.kernel = sample_conv_kernel(rng);
      break;
    case OpKind::gaussian:
      op.sigma = params.gaussian_sigma;
      op.stream = rng.next_seed();
      break;
    case OpKind::impulse:
      op.prob = params.impulse_prob;
      op.stream = rng.next_seed();
      break;
    case OpKind::mixup:
      require_pool(pool, kind);
      op.alpha = rng.uniform(params.mixup_alpha_min, params.mixup_alpha_max);
      op.image = rng.index(pool->count());
      break;
    case OpKind::cutmix:
      require_pool(pool, kind);
      op.patch = sample_patch(params, height, width, rng);
      op.image = rng.index(pool->count());
      op.source = {rng.uniform_int(0, height - op.patch.h), rng.uniform_int(0, width - op.patch.w)};
      break;
  }
  return op;
}

Observation apply(const AugmentationOp& op, const Observation& obs, const DistractorPool* pool) {
  switch (op.kind) {
    case OpKind::identity:
      return obs;
    case OpKind::crop:
      return random_crop(obs, op.pad, op.offset);
    case OpKind::cutout_color:
      return cutout_color(obs, op.patch, op.color);
    case OpKind::random_conv:
      return random_conv(obs, op.kernel);
    case OpKind::gaussian: {
      if (!(op.sigma >= 0.0)) throw std::invalid_argument("gaussian sigma must be >= 0");
      if (op.sigma == 0.0) return obs;
      Rng rng(op.stream);
      Observation out = obs;
      for (auto& v : out.data) v = std::clamp(static_cast<float>(v + rng.normal(0.0, op.sigma)), 0.0f, 1.0f);
      return out;
    }
    case OpKind::impulse: {
      if (!(op.prob >= 0.0 && op.prob <= 1.0)) throw std::invalid_argument("impulse probability must lie in [0,1]");
      require_rgb_stack(obs);
      if (op.prob == 0.0) return obs;
      Rng rng(op.stream);
      Observation out = obs;
      const std::size_t plane = obs.plane();
      for (int f = 0; f < obs.channels / 3; ++f) {
        for (std::size_t i = 0; i < plane; ++i) {
          if (!rng.bernoulli(op.prob)) continue;
          for (int c = 0; c < 3; ++c) out.data[(f * 3 + c) * plane + i] = static_cast<float>(rng.uniform());
        }
      }
      return out;
    }
    case OpKind::mixup:
      require_pool(pool, op.kind);
      return mixup(obs, pool->images.at(op.image), op.alpha);
    case OpKind::cutmix:
      require_pool(pool, op.kind);
      return cutmix(obs, pool->images.at(op.image), op.patch, op.source);
  }
  throw std::logic_error("unhandled augmentation kind");
}

bool ComboRecipe::needs_pool() const {
  return std::any_of(kinds.begin(), kinds.end(),
                     [](OpKind k) { return k == OpKind::mixup || k == OpKind::cutmix; });
}

ComboRecipe combo1() {
  return {"Combo1", {OpKind::cutout_color, OpKind::random_conv, OpKind::mixup, OpKind::crop}};
}
ComboRecipe combo2() {
  return {"Combo2", {OpKind::cutout_color, OpKind::random_conv, OpKind::mixup, OpKind::cutmix, OpKind::crop}};
}
ComboRecipe combo3() { return {"Combo3", {OpKind::cutout_color, OpKind::random_conv, OpKind::mixup}}; }

ComboRecipe recipe_from_name(const std::string& name) {
  const std::string n = lower(name);
  if (n == "combo1") return combo1();
  if (n == "combo2") return combo2();
  if (n == "combo3") return combo3();
  if (n == "none" || n == "identity") return {"none", {OpKind::identity}};
  if (n == "weak") return {"weak", {OpKind::crop}};
  if (n == "strong") return combo1();
  ComboRecipe r{name, {}};
  std::size_t start = 0;
  while (start <= name.size()) {
    const std::size_t end = name.find('+', start);
    const std::string part = name.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (part.empty()) throw std::invalid_argument("empty member in recipe '" + name + "'");
    r.kinds.push_back(parse_op(part));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (r.kinds.size() == 1) r.name = op_tag(r.kinds.front());
  return r;
}

AugmentationOp sample_from_recipe(const ComboRecipe& recipe, const AugmentParams& params, int height,
                                  int width, const DistractorPool* pool, Rng& rng) {
  if (recipe.kinds.empty()) throw std::invalid_argument("recipe '" + recipe.name + "' is empty");
  const OpKind kind = recipe.kinds[rng.index(recipe.kinds.size())];
  return sample_op(kind, params, height, width, pool, rng);
}

std::vector<Observation> augment_batch(std::span<const Observation> batch, const ComboRecipe& recipe,
                                       const AugmentParams& params, const DistractorPool* pool, Rng& rng) {
  std::vector<Observation> out;
  out.reserve(batch.size());
  for (const auto& obs : batch) {
    out.push_back(apply(sample_from_recipe(recipe, params, obs.height, obs.width, pool, rng), obs, pool));
  }
  return out;
}

DistractorPool procedural_pool(std::size_t count, int height, int width, std::uint64_t seed) {
  DistractorPool pool;
  pool.source = "procedural";
  Rng rng(mix_seed(seed, 0xd157ULL));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t n = 0; n < count; ++n) {
    Observation img(3, height, width);
    struct Grating {
      double fy, fx, phase;
      Rgb amp;
    };
    struct Blob {
      double cy, cx, r;
      Rgb color;
    };
    Rgb base;
    for (auto& c : base) c = static_cast<float>(rng.uniform(0.2, 0.8));
    std::vector<Grating> gratings(static_cast<std::size_t>(rng.uniform_int(2, 4)));
    for (auto& g : gratings) {
      const double freq = rng.uniform(3.0, 12.0);
      const double theta = rng.uniform(0.0, std::numbers::pi);
      g.fy = freq * std::sin(theta);
      g.fx = freq * std::cos(theta);
      g.phase = rng.uniform(0.0, two_pi);
      for (auto& a : g.amp) a = static_cast<float>(rng.uniform(-0.35, 0.35));
    }
    std::vector<Blob> blobs(static_cast<std::size_t>(rng.uniform_int(3, 7)));
    for (auto& b : blobs) {
      b.cy = rng.uniform();
      b.cx = rng.uniform();
      b.r = rng.uniform(0.05, 0.2);
      for (auto& c : b.color) c = static_cast<float>(rng.uniform());
    }
    for (int y = 0; y < height; ++y) {
      const double v = (y + 0.5) / height;
      for (int x = 0; x < width; ++x) {
        const double u = (x + 0.5) / width;
        std::array<double, 3> px{base[0], base[1], base[2]};
        for (const auto& g : gratings) {
          const double s = std::sin(two_pi * (g.fy * v + g.fx * u) + g.phase);
          for (int c = 0; c < 3; ++c) px[c] += g.amp[c] * s;
        }
        for (const auto& b : blobs) {
          const double d2 = ((v - b.cy) * (v - b.cy) + (u - b.cx) * (u - b.cx)) / (b.r * b.r);
          const double w = std::exp(-d2);
          for (int c = 0; c < 3; ++c) px[c] = (1 - w) * px[c] + w * b.color[c];
        }
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(std::clamp(px[c], 0.0, 1.0));
      }
    }
    pool.images.push_back(std::move(img));
  }
  return pool;
}

DistractorPool load_distractor_pool(const std::filesystem::path& directory, int height, int width,
                                    std::size_t fallback_size, bool allow_fallback, std::uint64_t seed) {
  namespace fs = std::filesystem;
  DistractorPool pool;
  pool.source = directory.string();
  std::vector<fs::path> files;
  std::error_code ec;
  if (!directory.empty() && fs::is_directory(directory, ec)) {
    for (const auto& entry : fs::directory_iterator(directory, ec)) {
      if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".png") {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      Observation img = io::resize_bilinear(io::read_png(f), height, width);
      for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
      pool.images.push_back(std::move(img));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping distractor " << f.string() << ": " << e.what() << "\n";
    }
  }
  if (pool.empty()) {
    if (!allow_fallback || fallback_size == 0) {
      throw std::runtime_error("no usable PNG images in '" + directory.string() +
                               "' and procedural fallback disabled");
    }
    pool = procedural_pool(fallback_size, height, width, seed);
  }
  return pool;
}

}  // namespace secant::augment
