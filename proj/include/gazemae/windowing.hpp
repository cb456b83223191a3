#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gazemae/annotations.hpp"
#include "gazemae/image.hpp"

namespace gazemae {

// Window construction parameters. A window holds T = 2*half_window + 1
// consecutive raw frame indices around a center frame; centers are picked
// every `stride` positions of a track's record list.
struct SamplingSpec {
  int stride = 13;
  int half_window = 3;
  int resolution = 224;

  int window_length() const { return 2 * half_window + 1; }
  void validate() const;
};

// One temporal slot: either a real annotated frame (with its own face box)
// or the BLANK fill sentinel.
struct FrameSlot {
  bool blank = true;
  std::int64_t frame_index = -1;
  BBox bbox;

  static FrameSlot blank_slot() { return FrameSlot{}; }
  static FrameSlot frame(std::int64_t index, const BBox& box) {
    return FrameSlot{false, index, box};
  }
};

// The T-frame face sequence centered on a labeled frame. The center slot is
// never blank; the label is the center frame's label.
struct WindowSample {
  std::string clip_id;
  std::string face_id;
  std::int64_t center_frame_index = 0;
  int label = 0;
  std::vector<FrameSlot> slots;
};

// Centers are the track records at positions 0, stride, 2*stride, ... of the
// record list. stride 1 selects every annotated frame.
std::vector<std::int64_t> select_centers(const FaceTrack& track, const SamplingSpec& spec);

// Slot i (i = -half..+half) holds the track record at raw frame index
// center+i when that frame is annotated, else BLANK. Throws ValidationError
// when the center itself is not an annotated frame of the track.
WindowSample build_window(const FaceTrack& track, std::int64_t center, const SamplingSpec& spec);

// Convenience: all windows of a track under `spec`.
std::vector<WindowSample> track_windows(const FaceTrack& track, const SamplingSpec& spec);

// Frame file resolution: <root>/<clip_id>/<frame_index padded to 6 digits>.png
class FrameStore {
 public:
  explicit FrameStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path frame_path(const std::string& clip_id, std::int64_t frame_index) const;

  // Throws Error naming the path when the frame file is missing.
  Image load(const std::string& clip_id, std::int64_t frame_index) const;

 private:
  std::filesystem::path root_;
};

// BLANK slots become all-zero slices; real slots are crop_and_resize outputs.
VideoTensor materialize_window(const WindowSample& window, const FrameStore& store,
                               const SamplingSpec& spec);

// One manifest line per window: clip, face, center, label, then the T slot
// frame indices with BLANK rendered as '-'.
std::string window_manifest_line(const WindowSample& window);

}  // namespace gazemae
