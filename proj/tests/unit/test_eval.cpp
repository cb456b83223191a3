#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gazemae/errors.hpp"
#include "gazemae/eval.hpp"
#include "gazemae/rng.hpp"
#include "test_util.hpp"

using namespace gazemae;

namespace {

// O(n^2) oracle: walk ranks in descending-score order (ties by input index)
// and, at every positive rank, recount the positives among the top-k from
// scratch.
double ap_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::int64_t n_positive = 0;
  for (int l : labels) n_positive += l;
  double sum = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (labels[order[k - 1]] != 1) continue;
    std::int64_t tp = 0;
    for (std::size_t j = 0; j < k; ++j) tp += labels[order[j]];
    sum += static_cast<double>(tp) / static_cast<double>(k);
  }
  return sum / static_cast<double>(n_positive);
}

std::vector<PredictionRecord> predictions_for(const std::vector<AnnotationRecord>& annotations) {
  std::vector<PredictionRecord> preds;
  for (const auto& rec : annotations) {
    PredictionRecord p;
    p.clip_id = rec.clip_id;
    p.frame_index = rec.frame_index;
    p.face_id = rec.face_id;
    p.score = static_cast<double>(rec.label);
    preds.push_back(p);
  }
  return preds;
}

}  // namespace

TEST_CASE("average precision reproduces the hand-enumerated staircase") {
  const auto ap = average_precision({0.9, 0.8, 0.3}, {1, 0, 1});
  REQUIRE(ap.has_value());
  CHECK(std::abs(*ap - (0.5 * 1.0 + 0.5 * (2.0 / 3.0))) < 1e-9);
}

TEST_CASE("average precision trivial anchors") {
  CHECK(*average_precision({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);  // perfectly ranked
  CHECK(*average_precision({0.5, 0.1, 0.9}, {1, 1, 1}) == 1.0);          // all positive
  CHECK_FALSE(average_precision({0.5, 0.1}, {0, 0}).has_value());        // undefined sentinel
  CHECK_THROWS_AS(average_precision({}, {}), ValidationError);
  CHECK_THROWS_AS(average_precision({0.5}, {0, 1}), ValidationError);
}

TEST_CASE("average precision equals the O(n^2) oracle on random instances") {
  Rng rng(606);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(200));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    bool any_positive = false;
    for (int i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] = rng.uniform();
      labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.3) ? 1 : 0;
      any_positive |= labels[static_cast<std::size_t>(i)] == 1;
    }
    if (!any_positive) labels[0] = 1;
    const auto ap = average_precision(scores, labels);
    REQUIRE(ap.has_value());
    REQUIRE(*ap == ap_oracle(scores, labels));
  }
}

TEST_CASE("average precision is invariant under strictly monotone score transforms") {
  Rng rng(707);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(120));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] = rng.uniform();
      labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.4) ? 1 : 0;
    }
    labels[0] = 1;
    std::vector<double> transformed(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      transformed[i] = std::exp(2.0 * scores[i]) - 0.25;  // strictly increasing
    }
    CHECK(*average_precision(scores, labels) == *average_precision(transformed, labels));
  }
}

TEST_CASE("duplicating every sample leaves both metrics unchanged") {
  Rng rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(80));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] = rng.uniform();
      labels[static_cast<std::size_t>(i)] = rng.bernoulli(0.3) ? 1 : 0;
    }
    labels[static_cast<std::size_t>(n - 1)] = 1;
    std::vector<double> scores2 = scores;
    std::vector<int> labels2 = labels;
    scores2.insert(scores2.end(), scores.begin(), scores.end());
    labels2.insert(labels2.end(), labels.begin(), labels.end());
    CHECK(*average_precision(scores2, labels2) ==
          doctest::Approx(*average_precision(scores, labels)).epsilon(1e-12));
    CHECK(accuracy(scores2, labels2) == accuracy(scores, labels));
  }
}

TEST_CASE("accuracy basics and the >= threshold tie rule") {
  CHECK(accuracy({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(accuracy({0.4, 0.6}, {1, 0}) == 0.0);  // total miss
  // everything at exactly the threshold counts as predicted positive
  CHECK(accuracy({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 1}) == 0.75);
}

TEST_CASE("accuracy equals the counting oracle on random pairs") {
  Rng rng(909);
  std::vector<double> scores(1000);
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  const double threshold = 0.37;
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= threshold ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  CHECK(accuracy(scores, labels, threshold) == static_cast<double>(correct) / 1000.0);
}

TEST_CASE("accuracy is invariant under permutation") {
  Rng rng(111);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
  }
  const double base = accuracy(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<double> s2;
  std::vector<int> l2;
  for (auto i : order) {
    s2.push_back(scores[i]);
    l2.push_back(labels[i]);
  }
  CHECK(accuracy(s2, l2) == base);
}

TEST_CASE("evaluate_predictions joins and reports") {
  Rng rng(13);
  std::vector<AnnotationRecord> annotations;
  for (int c = 0; c < 6; ++c) {
    for (int f = 0; f < 5; ++f) {
      annotations.push_back(
          test::make_record("clip" + std::to_string(c), f, "face0", c == 0 ? 1 : 0));
    }
  }

  SUBCASE("ground-truth scores give perfect metrics") {
    const auto report = evaluate_predictions(predictions_for(annotations), annotations);
    REQUIRE(report.map.has_value());
    CHECK(*report.map == 1.0);
    CHECK(report.accuracy == 1.0);
    CHECK(report.n_samples == 30);
    CHECK(report.n_positive == 5);
    CHECK(report.n_negative == 25);
    CHECK(*report.ratio_neg_to_pos == 5.0);
  }

  SUBCASE("flat scores at the threshold predict all positive") {
    auto preds = predictions_for(annotations);
    for (auto& p : preds) p.score = 0.5;
    const auto report = evaluate_predictions(preds, annotations);
    CHECK(report.accuracy == doctest::Approx(5.0 / 30.0));
  }

  SUBCASE("missing predictions are reported with up to 10 offenders") {
    auto preds = predictions_for(annotations);
    preds.resize(preds.size() - 12);
    try {
      evaluate_predictions(preds, annotations);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      CHECK(what.find("without prediction") != std::string::npos);
      CHECK(what.find("12 offending") != std::string::npos);
      CHECK(what.find("...") != std::string::npos);  // truncated at 10
    }
  }

  SUBCASE("extra predictions are rejected") {
    auto preds = predictions_for(annotations);
    PredictionRecord ghost;
    ghost.clip_id = "clip99";
    ghost.frame_index = 0;
    ghost.face_id = "face0";
    ghost.score = 0.5;
    preds.push_back(ghost);
    CHECK_THROWS_AS(evaluate_predictions(preds, annotations), ValidationError);
  }

  SUBCASE("duplicate and out-of-range predictions are rejected") {
    auto preds = predictions_for(annotations);
    preds.push_back(preds[0]);
    CHECK_THROWS_AS(evaluate_predictions(preds, annotations), ValidationError);
    preds = predictions_for(annotations);
    preds[0].score = 1.5;
    CHECK_THROWS_AS(evaluate_predictions(preds, annotations), ValidationError);
  }

  SUBCASE("macro flag adds the two-class average") {
    auto preds = predictions_for(annotations);
    for (auto& p : preds) p.score = std::clamp(p.score * 0.8 + rng.uniform() * 0.1, 0.0, 1.0);
    const auto report = evaluate_predictions(preds, annotations, 0.5, true);
    REQUIRE(report.map_macro.has_value());
    CHECK(*report.map_macro <= 1.0);
    CHECK(*report.map_macro >= 0.0);
  }
}

TEST_CASE("prediction csv round trip is bit exact") {
  test::TempDir dir("preds");
  Rng rng(19);
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 50; ++i) {
    PredictionRecord p;
    p.clip_id = "clip" + std::to_string(i % 7);
    p.frame_index = i;
    p.face_id = "face0";
    p.score = rng.uniform();
    preds.push_back(p);
  }
  const auto path = dir.path() / "p.csv";
  write_predictions_csv(path, preds);
  const auto back = read_predictions_csv(path);
  REQUIRE(back.size() == preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(back[i].clip_id == preds[i].clip_id);
    CHECK(back[i].frame_index == preds[i].frame_index);
    CHECK(back[i].score == preds[i].score);
  }
}

TEST_CASE("prediction csv header is validated") {
  test::TempDir dir("badcsv");
  const auto path = dir.path() / "bad.csv";
  {
    std::ofstream out(path);
    out << "clip,frame,face,score\n";
  }
  CHECK_THROWS_AS(read_predictions_csv(path), ValidationError);
}

TEST_CASE("metrics report renders json and text") {
  MetricsReport report;
  report.map = 0.875;
  report.accuracy = 0.9;
  report.n_samples = 40;
  report.n_positive = 4;
  report.n_negative = 36;
  report.ratio_neg_to_pos = 9.0;
  const auto json = metrics_report_json(report);
  CHECK(json.find("\"mAP\":0.875") != std::string::npos);
  const auto text = metrics_report_text(report);
  CHECK(text.find("neg:pos") != std::string::npos);

  MetricsReport undefined;
  undefined.accuracy = 1.0;
  undefined.n_samples = 3;
  undefined.n_negative = 3;
  CHECK(metrics_report_json(undefined).find("\"mAP\":null") != std::string::npos);
  CHECK(metrics_report_text(undefined).find("undefined") != std::string::npos);
}
