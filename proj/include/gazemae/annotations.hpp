#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gazemae/image.hpp"

namespace gazemae {

// One labeled face observation. label 1 means the face is looking at the
// camera-wearer.
struct AnnotationRecord {
  std::string clip_id;
  std::int64_t frame_index = 0;
  std::string face_id;
  BBox bbox;
  int label = 0;

  bool operator==(const AnnotationRecord&) const = default;
};

// All observations of one face within one clip, ordered by frame index.
// Gaps are permitted.
struct FaceTrack {
  std::string clip_id;
  std::string face_id;
  std::vector<AnnotationRecord> records;
};

struct ClassBalanceReport {
  std::int64_t n_positive = 0;
  std::int64_t n_negative = 0;
  std::optional<double> ratio_neg_to_pos;  // empty when there are no positives
  std::int64_t n_clips = 0;
  std::int64_t n_tracks = 0;
};

// Annotation files are UTF-8 JSON lines with keys clip_id, frame_index,
// face_id, x, y, w, h, label. parse and serialize round-trip bit-exactly.
std::vector<AnnotationRecord> parse_annotations(std::istream& stream);
std::vector<AnnotationRecord> parse_annotations_file(const std::filesystem::path& path);

std::string serialize_record(const AnnotationRecord& record);
void serialize_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records);

// Partition validated records into per-(clip_id, face_id) tracks, each sorted
// by frame index. Tracks come out in first-appearance order of their key.
std::vector<FaceTrack> group_tracks(const std::vector<AnnotationRecord>& records);

ClassBalanceReport dataset_stats(const std::vector<FaceTrack>& tracks);

}  // namespace gazemae
