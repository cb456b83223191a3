#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gazemae/annotations.hpp"
#include "gazemae/windowing.hpp"

namespace gazemae {

// On-disk dataset layout produced by the synthesizer and consumed by every
// training / evaluation stage:
//   <root>/annotations.jsonl
//   <root>/frames/<clip_id>/<frame %06d>.png
//   <root>/split_{train,val,test}.txt
struct DatasetLayout {
  std::filesystem::path root;

  std::filesystem::path annotations() const { return root / "annotations.jsonl"; }
  std::filesystem::path frames_root() const { return root / "frames"; }
  std::filesystem::path split_file(const std::string& split) const {
    return root / ("split_" + split + ".txt");
  }
};

std::vector<std::string> read_split_file(const std::filesystem::path& path);

// Annotation records restricted to the clips of one split ("train", "val",
// "test"), or all records for split "all".
std::vector<AnnotationRecord> load_split_annotations(const DatasetLayout& layout,
                                                     const std::string& split);

struct SplitWindows {
  std::vector<FaceTrack> tracks;
  std::vector<WindowSample> windows;
};

SplitWindows load_split_windows(const DatasetLayout& layout, const std::string& split,
                                const SamplingSpec& spec);

}  // namespace gazemae
