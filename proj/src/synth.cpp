#include "gazemae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gazemae/errors.hpp"

namespace gazemae {

void SynthSpec::validate() const {
  if (n_clips < 1) throw ValidationError("SynthSpec: n_clips must be >= 1");
  if (frames_per_clip < 1) throw ValidationError("SynthSpec: frames_per_clip must be >= 1");
  if (image_size < 32) throw ValidationError("SynthSpec: image_size must be >= 32");
  if (!(imbalance_ratio > 0)) throw ValidationError("SynthSpec: imbalance_ratio must be positive");
  if (motion_jitter_px < 0 || motion_jitter_px > image_size / 16.0) {
    throw ValidationError("SynthSpec: motion_jitter_px must lie in [0, image_size/16]");
  }
  if (frame_label_flip_prob < 0 || frame_label_flip_prob > 1) {
    throw ValidationError("SynthSpec: frame_label_flip_prob must lie in [0,1]");
  }
}

ClipStyle sample_clip_style(Rng& rng, int image_size) {
  const double u = image_size / 64.0;
  ClipStyle style;
  style.image_size = image_size;
  style.cx = 32.0 * u + rng.uniform(-4.0 * u, 4.0 * u);
  style.cy = 32.0 * u + rng.uniform(-4.0 * u, 4.0 * u);
  style.rx = rng.uniform(12.0 * u, 15.0 * u);
  style.ry = rng.uniform(15.0 * u, 19.0 * u);
  style.eye_dx = 0.44 * style.rx;
  style.eye_dy = -0.28 * style.ry;
  style.eye_radius = 0.32 * style.rx;
  style.pupil_radius = 0.46 * style.eye_radius;
  const double theta = rng.uniform(0.0, 2.0 * M_PI);
  style.offset_dir_x = std::cos(theta);
  style.offset_dir_y = std::sin(theta);
  style.offset_mag = rng.uniform(0.38, 0.52);
  for (auto& c : style.face_color) {
    c = std::clamp(c + rng.uniform(-0.04, 0.04), 0.0, 1.0);
  }
  style.bg_gray = std::clamp(0.42 + rng.uniform(-0.06, 0.06), 0.0, 1.0);
  return style;
}

namespace {

constexpr double kScleraGray = 0.95;
constexpr double kPupilGray = 0.06;
constexpr int kSubsamples = 4;  // 4x4 coverage sampling per pixel

inline bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

inline bool in_disk(double x, double y, double cx, double cy, double r) {
  const double dx = x - cx;
  const double dy = y - cy;
  return dx * dx + dy * dy <= r * r;
}

}  // namespace

RenderedFrame render_face_frame(const ClipStyle& style, int label, double jitter_x,
                                double jitter_y) {
  if (label != 0 && label != 1) throw ValidationError("render_face_frame: label must be 0 or 1");

  FrameGeometry geom;
  geom.face_cx = style.cx + jitter_x;
  geom.face_cy = style.cy + jitter_y;
  geom.eye_radius = style.eye_radius;
  geom.eye_left = {geom.face_cx - style.eye_dx, geom.face_cy + style.eye_dy};
  geom.eye_right = {geom.face_cx + style.eye_dx, geom.face_cy + style.eye_dy};
  if (label == 0) {
    geom.pupil_offset = {style.offset_mag * style.eye_radius * style.offset_dir_x,
                         style.offset_mag * style.eye_radius * style.offset_dir_y};
  } else {
    geom.pupil_offset = {0.0, 0.0};
  }

  const std::array<std::array<double, 2>, 2> pupils{
      std::array<double, 2>{geom.eye_left[0] + geom.pupil_offset[0],
                            geom.eye_left[1] + geom.pupil_offset[1]},
      std::array<double, 2>{geom.eye_right[0] + geom.pupil_offset[0],
                            geom.eye_right[1] + geom.pupil_offset[1]}};

  const int size = style.image_size;
  Image img = Image::zeros(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc[3] = {0, 0, 0};
      for (int sy = 0; sy < kSubsamples; ++sy) {
        for (int sx = 0; sx < kSubsamples; ++sx) {
          const double px = x + (sx + 0.5) / kSubsamples - 0.5;
          const double py = y + (sy + 0.5) / kSubsamples - 0.5;
          double color[3] = {style.bg_gray, style.bg_gray, style.bg_gray};
          if (in_ellipse(px, py, geom.face_cx, geom.face_cy, style.rx, style.ry)) {
            color[0] = style.face_color[0];
            color[1] = style.face_color[1];
            color[2] = style.face_color[2];
            const bool in_eye =
                in_disk(px, py, geom.eye_left[0], geom.eye_left[1], style.eye_radius) ||
                in_disk(px, py, geom.eye_right[0], geom.eye_right[1], style.eye_radius);
            if (in_eye) {
              color[0] = color[1] = color[2] = kScleraGray;
              const bool in_pupil =
                  in_disk(px, py, pupils[0][0], pupils[0][1], style.pupil_radius) ||
                  in_disk(px, py, pupils[1][0], pupils[1][1], style.pupil_radius);
              if (in_pupil) {
                color[0] = color[1] = color[2] = kPupilGray;
              }
            }
          }
          acc[0] += color[0];
          acc[1] += color[1];
          acc[2] += color[2];
        }
      }
      const double inv = 1.0 / (kSubsamples * kSubsamples);
      img.at(y, x, 0) = static_cast<float>(acc[0] * inv);
      img.at(y, x, 1) = static_cast<float>(acc[1] * inv);
      img.at(y, x, 2) = static_cast<float>(acc[2] * inv);
    }
  }

  RenderedFrame frame;
  frame.image = std::move(img);
  frame.bbox = BBox{geom.face_cx - style.rx, geom.face_cy - style.ry, 2.0 * style.rx,
                    2.0 * style.ry};
  frame.geometry = geom;
  return frame;
}

RenderedFrame render_face_frame(Rng& rng, int label, double motion_jitter_px, int image_size) {
  const ClipStyle style = sample_clip_style(rng, image_size);
  const double jx = rng.uniform(-motion_jitter_px, motion_jitter_px);
  const double jy = rng.uniform(-motion_jitter_px, motion_jitter_px);
  return render_face_frame(style, label, jx, jy);
}

namespace {

// Largest-remainder 70/15/15 allocation.
std::array<std::size_t, 3> split_counts(std::size_t n) {
  const std::size_t train = static_cast<std::size_t>(std::lround(n * 0.70));
  std::size_t val = static_cast<std::size_t>(std::lround(n * 0.15));
  if (train + val > n) val = n - train;
  return {train, val, n - train - val};
}

std::string clip_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%06d", index);
  return buf;
}

void write_split_file(const std::filesystem::path& path, const std::vector<std::string>& clips) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write split file: " + path.string());
  for (const auto& clip : clips) out << clip << '\n';
}

}  // namespace

SynthManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& output_root) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(output_root / "frames", ec);
  if (ec) throw Error("cannot create output root: " + output_root.string() + ": " + ec.message());

  // Positive quota: round(n / (1 + ratio)), keeping both classes represented
  // whenever n_clips >= 2.
  const double p = 1.0 / (1.0 + spec.imbalance_ratio);
  std::int64_t n_pos = std::llround(spec.n_clips * p);
  if (spec.n_clips >= 2) {
    n_pos = std::clamp<std::int64_t>(n_pos, 1, spec.n_clips - 1);
  }

  std::vector<int> labels(static_cast<std::size_t>(spec.n_clips), 0);
  {
    std::vector<int> order(static_cast<std::size_t>(spec.n_clips));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(spec.seed, "labels"));
    rng.shuffle(order);
    for (std::int64_t i = 0; i < n_pos; ++i) labels[static_cast<std::size_t>(order[i])] = 1;
  }

  // Stratified split by label, 70/15/15.
  std::array<std::vector<int>, 3> split_indices;  // train, val, test
  {
    Rng rng(derive_seed(spec.seed, "split"));
    for (int cls = 0; cls <= 1; ++cls) {
      std::vector<int> members;
      for (int i = 0; i < spec.n_clips; ++i) {
        if (labels[static_cast<std::size_t>(i)] == cls) members.push_back(i);
      }
      rng.shuffle(members);
      const auto counts = split_counts(members.size());
      std::size_t cursor = 0;
      for (int s = 0; s < 3; ++s) {
        for (std::size_t k = 0; k < counts[static_cast<std::size_t>(s)]; ++k) {
          split_indices[static_cast<std::size_t>(s)].push_back(members[cursor++]);
        }
      }
    }
    for (auto& split : split_indices) std::sort(split.begin(), split.end());
  }

  SynthManifest manifest;
  manifest.n_positive_clips = n_pos;
  manifest.n_negative_clips = spec.n_clips - n_pos;

  for (int i = 0; i < spec.n_clips; ++i) {
    const std::string clip = clip_name(i);
    const std::filesystem::path clip_dir = output_root / "frames" / clip;
    std::filesystem::create_directories(clip_dir, ec);
    if (ec) throw Error("cannot create clip directory: " + clip_dir.string());

    Rng rng(derive_seed(spec.seed, "clip", {static_cast<std::uint64_t>(i)}));
    const ClipStyle style = sample_clip_style(rng, spec.image_size);
    const int clip_label = labels[static_cast<std::size_t>(i)];
    for (int f = 0; f < spec.frames_per_clip; ++f) {
      const double jx = rng.uniform(-spec.motion_jitter_px, spec.motion_jitter_px);
      const double jy = rng.uniform(-spec.motion_jitter_px, spec.motion_jitter_px);
      const bool flip = rng.uniform() < spec.frame_label_flip_prob;
      const int label = flip ? 1 - clip_label : clip_label;
      const RenderedFrame rendered = render_face_frame(style, label, jx, jy);

      char frame_name[32];
      std::snprintf(frame_name, sizeof(frame_name), "%06d.png", f);
      save_png(clip_dir / frame_name, rendered.image);

      AnnotationRecord rec;
      rec.clip_id = clip;
      rec.frame_index = f;
      rec.face_id = "face_0";
      rec.bbox = rendered.bbox;
      rec.label = label;
      manifest.records.push_back(std::move(rec));
    }
  }

  {
    std::ofstream out(output_root / "annotations.jsonl");
    if (!out) throw Error("cannot write annotations: " + (output_root / "annotations.jsonl").string());
    serialize_annotations(out, manifest.records);
  }

  const std::array<const char*, 3> names{"train", "val", "test"};
  std::array<std::vector<std::string>*, 3> lists{&manifest.train_clips, &manifest.val_clips,
                                                 &manifest.test_clips};
  for (int s = 0; s < 3; ++s) {
    for (int idx : split_indices[static_cast<std::size_t>(s)]) {
      lists[static_cast<std::size_t>(s)]->push_back(clip_name(idx));
    }
    write_split_file(output_root / ("split_" + std::string(names[static_cast<std::size_t>(s)]) + ".txt"),
                     *lists[static_cast<std::size_t>(s)]);
  }
  return manifest;
}

}  // namespace gazemae
