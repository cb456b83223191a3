#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gazemae/annotations.hpp"
#include "gazemae/image.hpp"
#include "gazemae/rng.hpp"

namespace gazemae {

struct SynthSpec {
  int n_clips = 1100;
  int frames_per_clip = 17;
  int image_size = 64;
  double imbalance_ratio = 10.0;
  double motion_jitter_px = 1.0;
  double frame_label_flip_prob = 0.0;
  std::uint64_t seed = 42;

  void validate() const;
};

// Per-clip face appearance, sampled once per clip. Label 0 offsets both
// pupils by offset_mag * eye_radius along (offset_dir_x, offset_dir_y).
struct ClipStyle {
  int image_size = 64;
  double cx = 0, cy = 0;
  double rx = 0, ry = 0;
  double eye_dx = 0, eye_dy = 0;
  double eye_radius = 0;
  double pupil_radius = 0;
  double offset_dir_x = 0, offset_dir_y = 0;
  double offset_mag = 0;
  std::array<double, 3> face_color{0.78, 0.62, 0.52};
  double bg_gray = 0.42;
};

struct FrameGeometry {
  double face_cx = 0, face_cy = 0;
  double eye_radius = 0;
  std::array<double, 2> eye_left{0, 0};
  std::array<double, 2> eye_right{0, 0};
  std::array<double, 2> pupil_offset{0, 0};  // pixels; zero for label 1
};

struct RenderedFrame {
  Image image;
  BBox bbox;
  FrameGeometry geometry;
};

ClipStyle sample_clip_style(Rng& rng, int image_size);

RenderedFrame render_face_frame(const ClipStyle& style, int label, double jitter_x,
                                double jitter_y);

// Spec-shaped convenience: draws style and jitter from `rng`. The draw
// sequence does not depend on the label, so identical generator states give
// images differing only inside the pupil disks.
RenderedFrame render_face_frame(Rng& rng, int label, double motion_jitter_px, int image_size);

struct SynthManifest {
  std::vector<std::string> train_clips;
  std::vector<std::string> val_clips;
  std::vector<std::string> test_clips;
  std::vector<AnnotationRecord> records;  // annotation-file order
  std::int64_t n_positive_clips = 0;
  std::int64_t n_negative_clips = 0;
};

// Writes frames/<clip_id>/<frame %06d>.png, annotations.jsonl and
// split_{train,val,test}.txt under output_root. Positive clips are assigned
// by exact quota round(n_clips / (1 + imbalance_ratio)) and splits are
// stratified by label, so the realized neg:pos ratio tracks the requested
// imbalance up to rounding. Fully reproducible from spec.seed.
SynthManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& output_root);

}  // namespace gazemae
