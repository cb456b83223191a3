#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gazemae/image.hpp"

namespace gazemae {

// Parsed "rand-m<M>-n<N>-mstd<S>[-inc<0|1>]" policy string.
struct RandAugmentSpec {
  int num_ops = 0;
  double magnitude = 0;
  double magnitude_std = 0;
  bool increasing = false;

  bool operator==(const RandAugmentSpec&) const = default;
};

RandAugmentSpec decode_randaugment_spec(std::string_view text);

struct AugmentPolicy {
  double scale_min = 0.08;
  double scale_max = 1.00;
  double ratio_min = 0.75;
  double ratio_max = 4.0 / 3.0;
  double color_jitter = 0.4;
  RandAugmentSpec rand_augment{4, 7.0, 0.5, true};

  void validate() const;
};

enum class AugmentOpKind : int {
  kIdentity = 0,
  kAutoContrast,
  kEqualize,
  kRotate,
  kSolarize,
  kColor,
  kPosterize,
  kContrast,
  kBrightness,
  kSharpness,
  kShearX,
  kShearY,
  kTranslateX,
  kTranslateY,
};
inline constexpr int kNumAugmentOps = 14;

const char* augment_op_name(AugmentOpKind kind);

// One drawn op: raw magnitude in [0,10] plus a direction for signed ops.
struct SampledOp {
  AugmentOpKind kind = AugmentOpKind::kIdentity;
  double magnitude = 0;
  double sign = 1.0;

  bool operator==(const SampledOp&) const = default;
};

// Integer crop rectangle in source pixel coordinates.
struct CropRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const CropRect&) const = default;
};

// Everything random about one window's augmentation, drawn once and reused
// across all of its frames.
struct AugmentState {
  CropRect crop;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  bool increasing = true;
  std::vector<SampledOp> ops;

  bool operator==(const AugmentState&) const = default;
};

// Draw crop rectangle (torchvision random-resized-crop scheme: up to 10
// area/aspect proposals, then an aspect-clamped center crop), jitter factors
// uniform in [1-c, 1+c], and num_ops ops uniform with replacement, each with
// magnitude clip(N(m, mstd), 0, 10) and a random direction.
AugmentState sample_window_augment(std::uint64_t seed, const AugmentPolicy& policy,
                                   int image_height, int image_width);

Image apply_augment_frame(const AugmentState& state, const Image& frame, int out_resolution);

// Same state applied to every temporal slice; output (T, out, out, 3) in [0,1].
VideoTensor apply_augment(const AugmentState& state, const VideoTensor& window,
                          int out_resolution);

}  // namespace gazemae
