#include "gazemae/windowing.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "gazemae/errors.hpp"

namespace gazemae {

void SamplingSpec::validate() const {
  if (stride < 1) throw ValidationError("SamplingSpec: stride must be >= 1");
  if (half_window < 0) throw ValidationError("SamplingSpec: half_window must be >= 0");
  if (resolution < 1) throw ValidationError("SamplingSpec: resolution must be >= 1");
}

std::vector<std::int64_t> select_centers(const FaceTrack& track, const SamplingSpec& spec) {
  spec.validate();
  if (track.records.empty()) throw ValidationError("select_centers: empty track");
  std::vector<std::int64_t> centers;
  for (std::size_t pos = 0; pos < track.records.size(); pos += spec.stride) {
    centers.push_back(track.records[pos].frame_index);
  }
  return centers;
}

WindowSample build_window(const FaceTrack& track, std::int64_t center, const SamplingSpec& spec) {
  spec.validate();
  std::unordered_map<std::int64_t, const AnnotationRecord*> by_frame;
  by_frame.reserve(track.records.size());
  for (const auto& rec : track.records) {
    by_frame.emplace(rec.frame_index, &rec);
  }
  const auto center_it = by_frame.find(center);
  if (center_it == by_frame.end()) {
    throw ValidationError("build_window: center frame " + std::to_string(center) +
                          " is not annotated in track (" + track.clip_id + ", " +
                          track.face_id + ")");
  }

  WindowSample window;
  window.clip_id = track.clip_id;
  window.face_id = track.face_id;
  window.center_frame_index = center;
  window.label = center_it->second->label;
  window.slots.reserve(spec.window_length());
  for (int i = -spec.half_window; i <= spec.half_window; ++i) {
    const auto it = by_frame.find(center + i);
    if (it == by_frame.end()) {
      window.slots.push_back(FrameSlot::blank_slot());
    } else {
      window.slots.push_back(FrameSlot::frame(it->first, it->second->bbox));
    }
  }
  return window;
}

std::vector<WindowSample> track_windows(const FaceTrack& track, const SamplingSpec& spec) {
  std::vector<WindowSample> windows;
  for (std::int64_t center : select_centers(track, spec)) {
    windows.push_back(build_window(track, center, spec));
  }
  return windows;
}

std::filesystem::path FrameStore::frame_path(const std::string& clip_id,
                                             std::int64_t frame_index) const {
  char name[32];
  std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(frame_index));
  return root_ / clip_id / name;
}

Image FrameStore::load(const std::string& clip_id, std::int64_t frame_index) const {
  const auto path = frame_path(clip_id, frame_index);
  if (!std::filesystem::exists(path)) {
    throw Error("missing frame file: " + path.string());
  }
  return load_png(path);
}

VideoTensor materialize_window(const WindowSample& window, const FrameStore& store,
                               const SamplingSpec& spec) {
  spec.validate();
  const int T = static_cast<int>(window.slots.size());
  VideoTensor out = VideoTensor::zeros(T, spec.resolution, spec.resolution);
  for (int t = 0; t < T; ++t) {
    const FrameSlot& slot = window.slots[t];
    if (slot.blank) continue;  // stays all-zero
    const Image frame = store.load(window.clip_id, slot.frame_index);
    const Image crop = crop_and_resize(frame, slot.bbox, spec.resolution);
    std::copy(crop.data.begin(), crop.data.end(),
              out.data.begin() + static_cast<std::size_t>(t) * crop.data.size());
  }
  return out;
}

std::string window_manifest_line(const WindowSample& window) {
  std::ostringstream os;
  os << window.clip_id << ' ' << window.face_id << ' ' << window.center_frame_index << ' '
     << window.label;
  for (const auto& slot : window.slots) {
    os << ' ';
    if (slot.blank) {
      os << '-';
    } else {
      os << slot.frame_index;
    }
  }
  return os.str();
}

}  // namespace gazemae
