#include "gazemae/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gazemae/errors.hpp"

namespace gazemae {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  std::ostringstream msg;
  msg << "annotation line " << line_no << ": " << what;
  throw ValidationError(msg.str());
}

double require_number(const ordered_json& obj, const char* key, std::size_t line_no) {
  if (!obj.contains(key)) line_error(line_no, std::string("missing field '") + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) line_error(line_no, std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

std::string require_string(const ordered_json& obj, const char* key, std::size_t line_no) {
  if (!obj.contains(key)) line_error(line_no, std::string("missing field '") + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_string()) line_error(line_no, std::string("field '") + key + "' is not a string");
  auto s = v.get<std::string>();
  if (s.empty()) line_error(line_no, std::string("field '") + key + "' is empty");
  return s;
}

}  // namespace

std::vector<AnnotationRecord> parse_annotations(std::istream& stream) {
  static const std::set<std::string> kKnownKeys = {
      "clip_id", "frame_index", "face_id", "x", "y", "w", "h", "label"};

  std::vector<AnnotationRecord> records;
  std::unordered_set<std::string> seen_keys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty()) continue;

    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      line_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) line_error(line_no, "not a JSON object");
    for (const auto& [key, _] : obj.items()) {
      if (!kKnownKeys.count(key)) line_error(line_no, "unknown field '" + key + "'");
    }

    AnnotationRecord rec;
    rec.clip_id = require_string(obj, "clip_id", line_no);
    rec.face_id = require_string(obj, "face_id", line_no);

    const double frame = require_number(obj, "frame_index", line_no);
    if (frame < 0 || frame != std::floor(frame)) {
      line_error(line_no, "field 'frame_index' must be a non-negative integer");
    }
    rec.frame_index = static_cast<std::int64_t>(frame);

    rec.bbox.x = require_number(obj, "x", line_no);
    rec.bbox.y = require_number(obj, "y", line_no);
    rec.bbox.w = require_number(obj, "w", line_no);
    rec.bbox.h = require_number(obj, "h", line_no);
    if (!(rec.bbox.w > 0)) line_error(line_no, "field 'w' must be positive");
    if (!(rec.bbox.h > 0)) line_error(line_no, "field 'h' must be positive");

    const double label = require_number(obj, "label", line_no);
    if (label != 0.0 && label != 1.0) line_error(line_no, "field 'label' must be 0 or 1");
    rec.label = static_cast<int>(label);

    std::string key = rec.clip_id + '\x1f' + std::to_string(rec.frame_index) + '\x1f' + rec.face_id;
    if (!seen_keys.insert(std::move(key)).second) {
      line_error(line_no, "duplicate (clip_id, frame_index, face_id) = (" + rec.clip_id +
                              ", " + std::to_string(rec.frame_index) + ", " + rec.face_id + ")");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<AnnotationRecord> parse_annotations_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open annotation file: " + path.string());
  return parse_annotations(in);
}

std::string serialize_record(const AnnotationRecord& record) {
  ordered_json obj;
  obj["clip_id"] = record.clip_id;
  obj["frame_index"] = record.frame_index;
  obj["face_id"] = record.face_id;
  obj["x"] = record.bbox.x;
  obj["y"] = record.bbox.y;
  obj["w"] = record.bbox.w;
  obj["h"] = record.bbox.h;
  obj["label"] = record.label;
  return obj.dump();
}

void serialize_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  for (const auto& rec : records) {
    out << serialize_record(rec) << '\n';
  }
}

std::vector<FaceTrack> group_tracks(const std::vector<AnnotationRecord>& records) {
  std::vector<FaceTrack> tracks;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& rec : records) {
    const std::string key = rec.clip_id + '\x1f' + rec.face_id;
    auto [it, inserted] = index.emplace(key, tracks.size());
    if (inserted) {
      tracks.push_back(FaceTrack{rec.clip_id, rec.face_id, {}});
    }
    tracks[it->second].records.push_back(rec);
  }
  for (auto& track : tracks) {
    std::stable_sort(track.records.begin(), track.records.end(),
                     [](const AnnotationRecord& a, const AnnotationRecord& b) {
                       return a.frame_index < b.frame_index;
                     });
    for (std::size_t i = 1; i < track.records.size(); ++i) {
      if (track.records[i].frame_index == track.records[i - 1].frame_index) {
        throw ValidationError("group_tracks: duplicate frame " +
                              std::to_string(track.records[i].frame_index) + " in track (" +
                              track.clip_id + ", " + track.face_id + ")");
      }
    }
  }
  return tracks;
}

ClassBalanceReport dataset_stats(const std::vector<FaceTrack>& tracks) {
  if (tracks.empty()) throw ValidationError("dataset_stats: no tracks");
  ClassBalanceReport report;
  std::unordered_set<std::string> clips;
  for (const auto& track : tracks) {
    clips.insert(track.clip_id);
    for (const auto& rec : track.records) {
      if (rec.label == 1) {
        ++report.n_positive;
      } else {
        ++report.n_negative;
      }
    }
  }
  report.n_clips = static_cast<std::int64_t>(clips.size());
  report.n_tracks = static_cast<std::int64_t>(tracks.size());
  if (report.n_positive > 0) {
    report.ratio_neg_to_pos = static_cast<double>(report.n_negative) / report.n_positive;
  }
  return report;
}

}  // namespace gazemae
