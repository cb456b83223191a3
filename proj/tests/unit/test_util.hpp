#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "gazemae/annotations.hpp"
#include "gazemae/model.hpp"
#include "gazemae/rng.hpp"

namespace gazemae::test {

// Unique scratch directory under the system temp root, removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gazemae_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline AnnotationRecord make_record(const std::string& clip, std::int64_t frame,
                                    const std::string& face, int label, double x = 4, double y = 6,
                                    double w = 20, double h = 24) {
  AnnotationRecord rec;
  rec.clip_id = clip;
  rec.frame_index = frame;
  rec.face_id = face;
  rec.bbox = BBox{x, y, w, h};
  rec.label = label;
  return rec;
}

inline std::vector<AnnotationRecord> random_records(Rng& rng, int n_clips, int max_frames) {
  std::vector<AnnotationRecord> records;
  for (int c = 0; c < n_clips; ++c) {
    const std::string clip = "clip" + std::to_string(c);
    const int faces = 1 + static_cast<int>(rng.below(3));
    for (int f = 0; f < faces; ++f) {
      const std::string face = "face" + std::to_string(f);
      const int frames = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_frames)));
      for (int t = 0; t < frames; ++t) {
        if (rng.uniform() < 0.3) continue;  // gaps
        records.push_back(make_record(clip, t, face, rng.bernoulli(0.2) ? 1 : 0,
                                      rng.uniform(0, 30), rng.uniform(0, 30),
                                      rng.uniform(1, 30), rng.uniform(1, 30)));
      }
    }
  }
  return records;
}

// Smallest config that exercises every model component (the gradient-check
// geometry: image 32, patch 16, T=7).
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 16;
  cfg.tubelet_size = 1;
  cfg.frames = 7;
  cfg.embed_dim = 16;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.decoder_dim = 8;
  cfg.decoder_depth = 1;
  cfg.mask_ratio = 0.75;
  cfg.variant = "gradcheck";
  return cfg;
}

inline VideoTensorD random_window_d(Rng& rng, int frames, int size) {
  VideoTensorD w = VideoTensorD::zeros(frames, size, size);
  for (auto& v : w.data) v = rng.normal() * 0.5;
  return w;
}

inline VideoTensor random_window_f(Rng& rng, int frames, int size) {
  VideoTensor w = VideoTensor::zeros(frames, size, size);
  for (auto& v : w.data) v = static_cast<float>(rng.uniform());
  return w;
}

}  // namespace gazemae::test
