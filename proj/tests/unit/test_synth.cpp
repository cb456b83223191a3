#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gazemae/errors.hpp"
#include "gazemae/pipeline.hpp"
#include "gazemae/synth.hpp"
#include "test_util.hpp"

using namespace gazemae;

namespace {

SynthSpec small_spec(std::uint64_t seed = 42) {
  SynthSpec spec;
  spec.n_clips = 40;
  spec.frames_per_clip = 6;
  spec.image_size = 64;
  spec.imbalance_ratio = 10.0;
  spec.motion_jitter_px = 1.0;
  spec.seed = seed;
  return spec;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("generate_dataset is byte-identical across runs") {
  test::TempDir a("synth_a");
  test::TempDir b("synth_b");
  const auto spec = small_spec();
  const auto ma = generate_dataset(spec, a.path());
  const auto mb = generate_dataset(spec, b.path());
  CHECK(slurp(a.path() / "annotations.jsonl") == slurp(b.path() / "annotations.jsonl"));
  CHECK(slurp(a.path() / "split_train.txt") == slurp(b.path() / "split_train.txt"));
  CHECK(ma.records.size() == mb.records.size());
  CHECK(ma.train_clips == mb.train_clips);
  // and one frame spot-check
  CHECK(slurp(a.path() / "frames/clip_000000/000000.png") ==
        slurp(b.path() / "frames/clip_000000/000000.png"));
}

TEST_CASE("positive quota tracks the imbalance ratio") {
  test::TempDir dir("synth_quota");
  SynthSpec spec = small_spec();
  spec.n_clips = 1100;
  spec.frames_per_clip = 1;
  const auto manifest = generate_dataset(spec, dir.path());
  CHECK(manifest.n_positive_clips == 100);  // round(1100/11), inside the binomial 3-sigma band
  CHECK(manifest.n_negative_clips == 1000);
}

TEST_CASE("round trip: parsing the annotation file reproduces the records") {
  test::TempDir dir("synth_rt");
  const auto manifest = generate_dataset(small_spec(), dir.path());
  const auto parsed = parse_annotations_file(dir.path() / "annotations.jsonl");
  REQUIRE(parsed.size() == manifest.records.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i] == manifest.records[i]);
  }
}

TEST_CASE("splits are disjoint and cover every clip") {
  test::TempDir dir("synth_split");
  const auto manifest = generate_dataset(small_spec(), dir.path());
  std::set<std::string> all;
  std::size_t total = 0;
  for (const auto* split : {&manifest.train_clips, &manifest.val_clips, &manifest.test_clips}) {
    for (const auto& clip : *split) all.insert(clip);
    total += split->size();
  }
  CHECK(total == 40);
  CHECK(all.size() == 40);  // disjoint

  // the split files round-trip through the loader
  const DatasetLayout layout{dir.path()};
  CHECK(read_split_file(layout.split_file("train")) == manifest.train_clips);
}

TEST_CASE("train split ratio stays within five percent of the target") {
  test::TempDir dir("synth_ratio");
  SynthSpec spec = small_spec();
  spec.n_clips = 1100;
  spec.frames_per_clip = 2;
  generate_dataset(spec, dir.path());
  const DatasetLayout layout{dir.path()};
  const auto report = dataset_stats(group_tracks(load_split_annotations(layout, "train")));
  REQUIRE(report.ratio_neg_to_pos.has_value());
  CHECK(*report.ratio_neg_to_pos == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("generated bboxes stay fully inside the frame") {
  test::TempDir dir("synth_bbox");
  const auto manifest = generate_dataset(small_spec(), dir.path());
  for (const auto& rec : manifest.records) {
    CHECK(rec.bbox.x >= 0);
    CHECK(rec.bbox.y >= 0);
    CHECK(rec.bbox.x + rec.bbox.w <= 64);
    CHECK(rec.bbox.y + rec.bbox.h <= 64);
  }
}

TEST_CASE("render determinism and label-only pupil difference") {
  Rng rng_a(909);
  Rng rng_b(909);
  const auto fa = render_face_frame(rng_a, 0, 1.0, 64);
  const auto fb = render_face_frame(rng_b, 0, 1.0, 64);
  CHECK(fa.image.data == fb.image.data);

  Rng rng_c(909);
  const auto fc = render_face_frame(rng_c, 1, 1.0, 64);
  // differing pixels lie within the pupil neighborhoods of the two eyes
  const double limit = fa.geometry.eye_radius + 1.5;
  bool any_diff = false;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      bool differs = false;
      for (int c = 0; c < 3; ++c) {
        differs |= fa.image.at(y, x, c) != fc.image.at(y, x, c);
      }
      if (!differs) continue;
      any_diff = true;
      const double dl = std::hypot(x - fa.geometry.eye_left[0], y - fa.geometry.eye_left[1]);
      const double dr = std::hypot(x - fa.geometry.eye_right[0], y - fa.geometry.eye_right[1]);
      REQUIRE(std::min(dl, dr) <= limit);
    }
  }
  CHECK(any_diff);
}

TEST_CASE("label-0 pupils measure at least 30 percent of the eye radius off center") {
  double total_offset = 0;
  double total_radius = 0;
  int measured = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(33, "offset-test", {static_cast<std::uint64_t>(trial)}));
    const auto frame = render_face_frame(rng, 0, 0.0, 64);
    // intensity centroid of darkness inside each eye disk
    for (const auto& eye : {frame.geometry.eye_left, frame.geometry.eye_right}) {
      double wsum = 0;
      double cx = 0;
      double cy = 0;
      const double r = frame.geometry.eye_radius;
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          if (std::hypot(x - eye[0], y - eye[1]) > r) continue;
          const double w = std::max(0.0, 0.9 - frame.image.at(y, x, 0));
          wsum += w;
          cx += w * x;
          cy += w * y;
        }
      }
      if (wsum <= 0) continue;
      cx /= wsum;
      cy /= wsum;
      total_offset += std::hypot(cx - eye[0], cy - eye[1]);
      total_radius += r;
      ++measured;
    }
  }
  REQUIRE(measured > 150);
  CHECK(total_offset / measured >= 0.3 * (total_radius / measured));
}

TEST_CASE("per-frame label flips are honored") {
  test::TempDir dir("synth_flip");
  SynthSpec spec = small_spec();
  spec.frame_label_flip_prob = 1.0;  // every frame flips the clip label
  const auto manifest = generate_dataset(spec, dir.path());
  // with flip prob 1 and quota 4 positive clips, flipped counts invert
  std::int64_t positives = 0;
  for (const auto& rec : manifest.records) positives += rec.label;
  const std::int64_t frames = spec.frames_per_clip;
  CHECK(positives == manifest.n_negative_clips * frames);
}

TEST_CASE("unwritable output root raises") {
  test::TempDir dir("synth_bad");
  const auto file_path = dir.path() / "occupied";
  {
    std::ofstream out(file_path);
    out << "x";
  }
  SynthSpec spec = small_spec();
  spec.n_clips = 2;
  CHECK_THROWS_AS(generate_dataset(spec, file_path / "nested"), Error);
}

TEST_CASE("synth spec validation") {
  SynthSpec spec = small_spec();
  spec.n_clips = 0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = small_spec();
  spec.imbalance_ratio = 0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = small_spec();
  spec.motion_jitter_px = 100;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}
