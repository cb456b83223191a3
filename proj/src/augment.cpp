#include "gazemae/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "gazemae/errors.hpp"
#include "gazemae/rng.hpp"

namespace gazemae {

namespace {
constexpr double kGrayFill = 0.5;  // geometric fill, distinct from the black BLANK sentinel
constexpr double kEnhanceRange = 0.9;
constexpr double kMaxRotateDeg = 30.0;
constexpr double kMaxShear = 0.3;
constexpr double kMaxTranslateFrac = 0.45;
}  // namespace

RandAugmentSpec decode_randaugment_spec(std::string_view text) {
  const auto fail = [&](std::string_view token) -> void {
    std::ostringstream msg;
    msg << "invalid rand-augment spec '" << std::string(text) << "': bad token '"
        << std::string(token) << "'";
    throw ValidationError(msg.str());
  };

  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t dash = text.find('-', start);
    const std::size_t end = dash == std::string_view::npos ? text.size() : dash;
    tokens.emplace_back(text.substr(start, end - start));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
  }
  if (tokens.empty() || tokens[0] != "rand") fail(tokens.empty() ? text : tokens[0]);

  RandAugmentSpec spec;
  bool have_m = false;
  bool have_n = false;
  bool have_mstd = false;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    const auto parse_num = [&](std::size_t prefix_len) -> double {
      const std::string body = tok.substr(prefix_len);
      std::size_t used = 0;
      double value = 0;
      try {
        value = std::stod(body, &used);
      } catch (const std::exception&) {
        fail(tok);
      }
      if (used != body.size()) fail(tok);
      return value;
    };
    if (tok.rfind("mstd", 0) == 0) {
      spec.magnitude_std = parse_num(4);
      if (spec.magnitude_std < 0) fail(tok);
      have_mstd = true;
    } else if (tok.rfind("inc", 0) == 0) {
      const std::string body = tok.substr(3);
      if (body == "1") {
        spec.increasing = true;
      } else if (body == "0") {
        spec.increasing = false;
      } else {
        fail(tok);
      }
    } else if (tok.rfind("m", 0) == 0) {
      spec.magnitude = parse_num(1);
      if (spec.magnitude < 0 || spec.magnitude > 10 ||
          spec.magnitude != std::floor(spec.magnitude)) {
        fail(tok);
      }
      have_m = true;
    } else if (tok.rfind("n", 0) == 0) {
      const double n = parse_num(1);
      if (n < 0 || n != std::floor(n)) fail(tok);
      spec.num_ops = static_cast<int>(n);
      have_n = true;
    } else {
      fail(tok);
    }
  }
  if (!have_m || !have_n || !have_mstd) {
    throw ValidationError("invalid rand-augment spec '" + std::string(text) +
                          "': requires m, n and mstd tokens");
  }
  return spec;
}

void AugmentPolicy::validate() const {
  if (!(scale_min > 0) || scale_min > scale_max || scale_max > 1.0) {
    throw ValidationError("AugmentPolicy: scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(ratio_min > 0) || ratio_min > ratio_max) {
    throw ValidationError("AugmentPolicy: aspect ratio range must be positive and ordered");
  }
  if (color_jitter < 0 || color_jitter > 1) {
    throw ValidationError("AugmentPolicy: color jitter must be in [0,1]");
  }
  if (rand_augment.num_ops < 0) {
    throw ValidationError("AugmentPolicy: rand_augment.num_ops must be >= 0");
  }
  if (rand_augment.magnitude < 0 || rand_augment.magnitude > 10) {
    throw ValidationError("AugmentPolicy: rand_augment.magnitude must be in [0,10]");
  }
}

const char* augment_op_name(AugmentOpKind kind) {
  static constexpr std::array<const char*, kNumAugmentOps> kNames = {
      "identity",  "auto-contrast", "equalize", "rotate",      "solarize",
      "color",     "posterize",     "contrast", "brightness",  "sharpness",
      "shear-x",   "shear-y",       "translate-x", "translate-y"};
  return kNames[static_cast<int>(kind)];
}

namespace {

CropRect sample_resized_crop(Rng& rng, const AugmentPolicy& policy, int height, int width) {
  const double area = static_cast<double>(height) * width;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target_area = rng.uniform(policy.scale_min, policy.scale_max) * area;
    const double aspect =
        std::exp(rng.uniform(std::log(policy.ratio_min), std::log(policy.ratio_max)));
    const int w = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
    if (w > 0 && h > 0 && w <= width && h <= height) {
      const int x = static_cast<int>(rng.uniform_int(0, width - w));
      const int y = static_cast<int>(rng.uniform_int(0, height - h));
      return CropRect{x, y, w, h};
    }
  }
  // Center-crop fallback with the aspect clamped into range.
  const double in_ratio = static_cast<double>(width) / height;
  int w = width;
  int h = height;
  if (in_ratio < policy.ratio_min) {
    w = width;
    h = static_cast<int>(std::lround(w / policy.ratio_min));
  } else if (in_ratio > policy.ratio_max) {
    h = height;
    w = static_cast<int>(std::lround(h * policy.ratio_max));
  }
  return CropRect{(width - w) / 2, (height - h) / 2, w, h};
}

}  // namespace

AugmentState sample_window_augment(std::uint64_t seed, const AugmentPolicy& policy,
                                   int image_height, int image_width) {
  policy.validate();
  if (image_height <= 0 || image_width <= 0) {
    throw ValidationError("sample_window_augment: empty image geometry");
  }
  Rng rng(seed);
  AugmentState state;
  state.crop = sample_resized_crop(rng, policy, image_height, image_width);
  const double c = policy.color_jitter;
  state.brightness = rng.uniform(1.0 - c, 1.0 + c);
  state.contrast = rng.uniform(1.0 - c, 1.0 + c);
  state.saturation = rng.uniform(1.0 - c, 1.0 + c);
  state.increasing = policy.rand_augment.increasing;
  state.ops.reserve(policy.rand_augment.num_ops);
  for (int i = 0; i < policy.rand_augment.num_ops; ++i) {
    SampledOp op;
    op.kind = static_cast<AugmentOpKind>(rng.below(kNumAugmentOps));
    op.magnitude = std::clamp(
        rng.normal(policy.rand_augment.magnitude, policy.rand_augment.magnitude_std), 0.0, 10.0);
    op.sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    state.ops.push_back(op);
  }
  return state;
}

namespace {

inline float clamp01(double v) {
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

inline double gray_of(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

inline double sample_or_fill(const Image& img, int y, int x, int c) {
  if (y < 0 || y >= img.height || x < 0 || x >= img.width) return kGrayFill;
  return img.at(y, x, c);
}

// src = M * (dst - center) + center + t, bilinear with gray fill.
Image affine_warp(const Image& in, double m00, double m01, double m10, double m11, double tx,
                  double ty) {
  Image out = Image::zeros(in.height, in.width);
  const double cx = (in.width - 1) * 0.5;
  const double cy = (in.height - 1) * 0.5;
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = m00 * dx + m01 * dy + cx + tx;
      const double sy = m10 * dx + m11 * dy + cy + ty;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double wx = sx - x0;
      const double wy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * sample_or_fill(in, y0, x0, c) +
                           wx * sample_or_fill(in, y0, x0 + 1, c);
        const double bot = (1.0 - wx) * sample_or_fill(in, y0 + 1, x0, c) +
                           wx * sample_or_fill(in, y0 + 1, x0 + 1, c);
        out.at(y, x, c) = clamp01((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

void apply_brightness(Image& img, double factor) {
  for (auto& v : img.data) v = clamp01(v * factor);
}

void apply_contrast(Image& img, double factor) {
  double mean = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) mean += gray_of(img, y, x);
  }
  mean /= static_cast<double>(img.height) * img.width;
  for (auto& v : img.data) v = clamp01(mean + (v - mean) * factor);
}

void apply_saturation(Image& img, double factor) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double g = gray_of(img, y, x);
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = clamp01(g + (img.at(y, x, c) - g) * factor);
      }
    }
  }
}

void apply_sharpness(Image& img, double factor) {
  // 3x3 smoothing blend; border pixels keep their original value.
  static constexpr double kKernel[3][3] = {{1, 1, 1}, {1, 5, 1}, {1, 1, 1}};
  Image smooth = img;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            acc += kKernel[ky][kx] * img.at(y + ky - 1, x + kx - 1, c);
          }
        }
        smooth.at(y, x, c) = static_cast<float>(acc / 13.0);
      }
    }
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = clamp01(smooth.data[i] + (img.data[i] - smooth.data[i]) * factor);
  }
}

void apply_autocontrast(Image& img) {
  for (int c = 0; c < 3; ++c) {
    float lo = 1.0f;
    float hi = 0.0f;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        lo = std::min(lo, img.at(y, x, c));
        hi = std::max(hi, img.at(y, x, c));
      }
    }
    if (hi <= lo) continue;
    const double scale = 1.0 / (hi - lo);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        img.at(y, x, c) = clamp01((img.at(y, x, c) - lo) * scale);
      }
    }
  }
}

void apply_equalize(Image& img) {
  // PIL-style per-channel histogram equalization in the 8-bit domain.
  for (int c = 0; c < 3; ++c) {
    std::array<std::int64_t, 256> hist{};
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const int q = std::clamp(static_cast<int>(std::lround(img.at(y, x, c) * 255.0f)), 0, 255);
        ++hist[q];
      }
    }
    std::int64_t total = 0;
    for (auto h : hist) total += h;
    const std::int64_t step = (total - hist[255]) / 255;
    if (step == 0) continue;
    std::array<int, 256> lut{};
    std::int64_t n = step / 2;
    for (int i = 0; i < 256; ++i) {
      lut[i] = static_cast<int>(std::min<std::int64_t>(n / step, 255));
      n += hist[i];
    }
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const int q = std::clamp(static_cast<int>(std::lround(img.at(y, x, c) * 255.0f)), 0, 255);
        img.at(y, x, c) = static_cast<float>(lut[q] / 255.0);
      }
    }
  }
}

void apply_solarize(Image& img, double threshold) {
  for (auto& v : img.data) {
    if (v >= threshold) v = clamp01(1.0 - v);
  }
}

void apply_posterize(Image& img, int bits) {
  bits = std::clamp(bits, 1, 8);
  const int mask = ~((1 << (8 - bits)) - 1) & 0xff;
  for (auto& v : img.data) {
    const int q = std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255) & mask;
    v = static_cast<float>(q / 255.0);
  }
}

void apply_op(Image& img, const SampledOp& op, bool increasing) {
  const double level = op.magnitude / 10.0;
  switch (op.kind) {
    case AugmentOpKind::kIdentity:
      return;
    case AugmentOpKind::kAutoContrast:
      apply_autocontrast(img);
      return;
    case AugmentOpKind::kEqualize:
      apply_equalize(img);
      return;
    case AugmentOpKind::kRotate: {
      const double theta = op.sign * level * kMaxRotateDeg * M_PI / 180.0;
      // inverse rotation
      img = affine_warp(img, std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta),
                        0.0, 0.0);
      return;
    }
    case AugmentOpKind::kSolarize:
      apply_solarize(img, increasing ? 1.0 - level : level);
      return;
    case AugmentOpKind::kColor:
      apply_saturation(img, increasing ? 1.0 + op.sign * kEnhanceRange * level
                                       : 0.1 + 1.8 * level);
      return;
    case AugmentOpKind::kPosterize:
      apply_posterize(img, increasing ? 8 - static_cast<int>(std::lround(4 * level))
                                      : 4 + static_cast<int>(std::lround(4 * level)));
      return;
    case AugmentOpKind::kContrast:
      apply_contrast(img, increasing ? 1.0 + op.sign * kEnhanceRange * level
                                     : 0.1 + 1.8 * level);
      return;
    case AugmentOpKind::kBrightness:
      apply_brightness(img, increasing ? 1.0 + op.sign * kEnhanceRange * level
                                       : 0.1 + 1.8 * level);
      return;
    case AugmentOpKind::kSharpness:
      apply_sharpness(img, increasing ? 1.0 + op.sign * kEnhanceRange * level
                                      : 0.1 + 1.8 * level);
      return;
    case AugmentOpKind::kShearX: {
      const double s = op.sign * level * kMaxShear;
      img = affine_warp(img, 1.0, -s, 0.0, 1.0, 0.0, 0.0);
      return;
    }
    case AugmentOpKind::kShearY: {
      const double s = op.sign * level * kMaxShear;
      img = affine_warp(img, 1.0, 0.0, -s, 1.0, 0.0, 0.0);
      return;
    }
    case AugmentOpKind::kTranslateX: {
      const double t = op.sign * level * kMaxTranslateFrac * img.width;
      img = affine_warp(img, 1.0, 0.0, 0.0, 1.0, -t, 0.0);
      return;
    }
    case AugmentOpKind::kTranslateY: {
      const double t = op.sign * level * kMaxTranslateFrac * img.height;
      img = affine_warp(img, 1.0, 0.0, 0.0, 1.0, 0.0, -t);
      return;
    }
  }
}

}  // namespace

Image apply_augment_frame(const AugmentState& state, const Image& frame, int out_resolution) {
  if (frame.empty()) throw ValidationError("apply_augment_frame: empty frame");
  if (state.crop.w <= 0 || state.crop.h <= 0) {
    throw ValidationError("apply_augment_frame: degenerate crop rect");
  }
  BBox box{static_cast<double>(state.crop.x), static_cast<double>(state.crop.y),
           static_cast<double>(state.crop.w), static_cast<double>(state.crop.h)};
  Image out = crop_and_resize(frame, box, out_resolution);
  apply_brightness(out, state.brightness);
  apply_contrast(out, state.contrast);
  apply_saturation(out, state.saturation);
  for (const auto& op : state.ops) {
    apply_op(out, op, state.increasing);
  }
  for (auto& v : out.data) v = clamp01(v);
  return out;
}

VideoTensor apply_augment(const AugmentState& state, const VideoTensor& window,
                          int out_resolution) {
  if (window.frames == 0 || window.height == 0 || window.width == 0) {
    throw ValidationError("apply_augment: empty window tensor");
  }
  VideoTensor out = VideoTensor::zeros(window.frames, out_resolution, out_resolution);
  const std::size_t in_slice = static_cast<std::size_t>(window.height) * window.width * 3;
  const std::size_t out_slice = static_cast<std::size_t>(out_resolution) * out_resolution * 3;
  for (int t = 0; t < window.frames; ++t) {
    Image frame;
    frame.height = window.height;
    frame.width = window.width;
    frame.data.assign(window.data.begin() + t * in_slice,
                      window.data.begin() + (t + 1) * in_slice);
    const Image aug = apply_augment_frame(state, frame, out_resolution);
    std::copy(aug.data.begin(), aug.data.end(), out.data.begin() + t * out_slice);
  }
  return out;
}

}  // namespace gazemae
