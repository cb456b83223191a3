#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gazemae/annotations.hpp"

namespace gazemae {

struct PredictionRecord {
  std::string clip_id;
  std::int64_t frame_index = 0;
  std::string face_id;
  double score = 0;  // p(looking), in [0,1]
  std::optional<int> label;
};

struct MetricsReport {
  std::optional<double> map;  // empty when the split has no positives
  std::optional<double> map_macro;
  double accuracy = 0;
  std::int64_t n_samples = 0;
  double threshold = 0.5;
  std::int64_t n_positive = 0;
  std::int64_t n_negative = 0;
  std::optional<double> ratio_neg_to_pos;
};

// Raw-staircase average precision: rank by score descending (ties broken by
// input index), AP = sum over positive hits of precision(k) * delta-recall.
// Returns empty when labels contain no positive.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels);

// Fraction of samples with (score >= threshold) == label.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold = 0.5);

// Joins predictions against annotation records on (clip_id, frame_index,
// face_id); every annotated frame must be predicted and vice versa, else an
// error listing up to 10 offending keys is thrown. When `macro` is set the
// report also carries the two-class macro average of AP.
MetricsReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                   const std::vector<AnnotationRecord>& annotations,
                                   double threshold = 0.5, bool macro = false);

// Prediction CSV: header `clip_id,frame_index,face_id,score`.
std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path);
void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRecord>& predictions);

std::string metrics_report_json(const MetricsReport& report);
std::string metrics_report_text(const MetricsReport& report);

}  // namespace gazemae
