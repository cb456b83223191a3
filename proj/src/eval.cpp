#include "gazemae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "gazemae/errors.hpp"

namespace gazemae {

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("average_precision: need equal-length non-empty inputs");
  }
  std::int64_t n_positive = 0;
  for (int label : labels) {
    if (label != 0 && label != 1) throw ValidationError("average_precision: labels must be 0/1");
    n_positive += label;
  }
  if (n_positive == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // deterministic tie-break: input index
  });

  // Tied scores form one threshold step: precision is taken at the end of
  // the tied group. On tie-free data this is exactly the per-rank staircase.
  double sum_precision = 0;
  std::int64_t true_positives = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::int64_t group_positives = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_positives += labels[order[j]];
      ++j;
    }
    true_positives += group_positives;
    if (group_positives > 0) {
      sum_precision += static_cast<double>(group_positives) *
                       (static_cast<double>(true_positives) / static_cast<double>(j));
    }
    i = j;
  }
  return sum_precision / static_cast<double>(n_positive);
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("accuracy: need equal-length non-empty inputs");
  }
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] >= threshold ? 1 : 0;
    if (predicted == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

namespace {

std::string join_key(const std::string& clip, std::int64_t frame, const std::string& face) {
  return clip + '\x1f' + std::to_string(frame) + '\x1f' + face;
}

std::string pretty_key(const std::string& clip, std::int64_t frame, const std::string& face) {
  return "(" + clip + ", " + std::to_string(frame) + ", " + face + ")";
}

[[noreturn]] void offender_error(const std::string& what, const std::vector<std::string>& keys,
                                 std::size_t total) {
  std::ostringstream msg;
  msg << what << ": " << total << " offending key(s);";
  for (const auto& k : keys) msg << ' ' << k;
  if (total > keys.size()) msg << " ...";
  throw ValidationError(msg.str());
}

}  // namespace

MetricsReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                   const std::vector<AnnotationRecord>& annotations,
                                   double threshold, bool macro) {
  if (annotations.empty()) throw ValidationError("evaluate_predictions: no annotations");

  std::unordered_map<std::string, const AnnotationRecord*> truth;
  truth.reserve(annotations.size());
  for (const auto& rec : annotations) {
    truth.emplace(join_key(rec.clip_id, rec.frame_index, rec.face_id), &rec);
  }

  std::vector<std::string> extra;
  std::size_t n_extra = 0;
  std::unordered_map<std::string, double> scored;
  scored.reserve(predictions.size());
  for (const auto& pred : predictions) {
    if (!(pred.score >= 0.0) || !(pred.score <= 1.0)) {
      throw ValidationError("evaluate_predictions: score outside [0,1] for " +
                            pretty_key(pred.clip_id, pred.frame_index, pred.face_id));
    }
    const std::string key = join_key(pred.clip_id, pred.frame_index, pred.face_id);
    if (!scored.emplace(key, pred.score).second) {
      throw ValidationError("evaluate_predictions: duplicate prediction for " +
                            pretty_key(pred.clip_id, pred.frame_index, pred.face_id));
    }
    if (!truth.count(key)) {
      ++n_extra;
      if (extra.size() < 10) {
        extra.push_back(pretty_key(pred.clip_id, pred.frame_index, pred.face_id));
      }
    }
  }
  if (n_extra > 0) {
    offender_error("evaluate_predictions: predictions without annotation", extra, n_extra);
  }

  std::vector<std::string> missing;
  std::size_t n_missing = 0;
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(annotations.size());
  labels.reserve(annotations.size());
  for (const auto& rec : annotations) {
    const auto it = scored.find(join_key(rec.clip_id, rec.frame_index, rec.face_id));
    if (it == scored.end()) {
      ++n_missing;
      if (missing.size() < 10) {
        missing.push_back(pretty_key(rec.clip_id, rec.frame_index, rec.face_id));
      }
      continue;
    }
    scores.push_back(it->second);
    labels.push_back(rec.label);
  }
  if (n_missing > 0) {
    offender_error("evaluate_predictions: annotated frames without prediction", missing,
                   n_missing);
  }

  MetricsReport report;
  report.threshold = threshold;
  report.n_samples = static_cast<std::int64_t>(scores.size());
  for (int label : labels) {
    if (label == 1) {
      ++report.n_positive;
    } else {
      ++report.n_negative;
    }
  }
  if (report.n_positive > 0) {
    report.ratio_neg_to_pos = static_cast<double>(report.n_negative) / report.n_positive;
  }
  report.map = average_precision(scores, labels);
  report.accuracy = accuracy(scores, labels, threshold);
  if (macro) {
    // AP of the negative class: rank by negated score, flip labels.
    std::vector<double> neg_scores(scores.size());
    std::vector<int> neg_labels(labels.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      neg_scores[i] = -scores[i];
      neg_labels[i] = 1 - labels[i];
    }
    const auto ap_neg = average_precision(neg_scores, neg_labels);
    if (report.map && ap_neg) {
      report.map_macro = 0.5 * (*report.map + *ap_neg);
    }
  }
  return report;
}

std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prediction file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("prediction file is empty: " + path.string());
  if (line == "clip_id,frame_index,face_id,score\r") line.pop_back();
  if (line != "clip_id,frame_index,face_id,score") {
    throw ValidationError("prediction file header must be 'clip_id,frame_index,face_id,score'");
  }
  std::vector<PredictionRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      fields.push_back(line.substr(start, end - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 4) {
      throw ValidationError("prediction line " + std::to_string(line_no) +
                            ": expected 4 comma-separated fields");
    }
    PredictionRecord rec;
    rec.clip_id = fields[0];
    rec.face_id = fields[2];
    try {
      rec.frame_index = std::stoll(fields[1]);
      rec.score = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw ValidationError("prediction line " + std::to_string(line_no) + ": malformed number");
    }
    if (rec.clip_id.empty() || rec.face_id.empty() || rec.frame_index < 0) {
      throw ValidationError("prediction line " + std::to_string(line_no) + ": invalid key");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<PredictionRecord>& predictions) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write prediction file: " + path.string());
  out << "clip_id,frame_index,face_id,score\n";
  char buf[64];
  for (const auto& pred : predictions) {
    std::snprintf(buf, sizeof(buf), "%.17g", pred.score);
    out << pred.clip_id << ',' << pred.frame_index << ',' << pred.face_id << ',' << buf << '\n';
  }
}

std::string metrics_report_json(const MetricsReport& report) {
  nlohmann::ordered_json obj;
  if (report.map) {
    obj["mAP"] = *report.map;
  } else {
    obj["mAP"] = nullptr;
  }
  if (report.map_macro) obj["mAP_macro"] = *report.map_macro;
  obj["accuracy"] = report.accuracy;
  obj["n_samples"] = report.n_samples;
  obj["threshold"] = report.threshold;
  obj["n_positive"] = report.n_positive;
  obj["n_negative"] = report.n_negative;
  if (report.ratio_neg_to_pos) {
    obj["ratio_neg_to_pos"] = *report.ratio_neg_to_pos;
  } else {
    obj["ratio_neg_to_pos"] = nullptr;
  }
  return obj.dump();
}

std::string metrics_report_text(const MetricsReport& report) {
  std::ostringstream os;
  os << "samples:          " << report.n_samples << "\n";
  os << "class balance:    " << report.n_positive << " positive / " << report.n_negative
     << " negative";
  if (report.ratio_neg_to_pos) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *report.ratio_neg_to_pos);
    os << " (neg:pos = " << buf << ")";
  } else {
    os << " (neg:pos undefined, no positives)";
  }
  os << "\n";
  if (report.map) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *report.map);
    os << "mAP:              " << buf << "\n";
  } else {
    os << "mAP:              undefined (no positives)\n";
  }
  if (report.map_macro) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *report.map_macro);
    os << "mAP (macro):      " << buf << "\n";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", report.accuracy);
  os << "accuracy:         " << buf << " (threshold " << report.threshold << ")\n";
  return os.str();
}

}  // namespace gazemae
