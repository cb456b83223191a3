#include "gazemae/pipeline.hpp"

#include <fstream>
#include <unordered_set>

#include "gazemae/errors.hpp"

namespace gazemae {

std::vector<std::string> read_split_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open split file: " + path.string());
  std::vector<std::string> clips;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) clips.push_back(line);
  }
  return clips;
}

std::vector<AnnotationRecord> load_split_annotations(const DatasetLayout& layout,
                                                     const std::string& split) {
  auto records = parse_annotations_file(layout.annotations());
  if (split == "all") return records;
  const auto clips = read_split_file(layout.split_file(split));
  const std::unordered_set<std::string> keep(clips.begin(), clips.end());
  std::vector<AnnotationRecord> filtered;
  filtered.reserve(records.size());
  for (auto& rec : records) {
    if (keep.count(rec.clip_id)) filtered.push_back(std::move(rec));
  }
  return filtered;
}

SplitWindows load_split_windows(const DatasetLayout& layout, const std::string& split,
                                const SamplingSpec& spec) {
  SplitWindows out;
  out.tracks = group_tracks(load_split_annotations(layout, split));
  for (const auto& track : out.tracks) {
    auto windows = track_windows(track, spec);
    out.windows.insert(out.windows.end(), std::make_move_iterator(windows.begin()),
                       std::make_move_iterator(windows.end()));
  }
  return out;
}

}  // namespace gazemae
