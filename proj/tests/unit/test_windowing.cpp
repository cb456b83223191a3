#include <doctest.h>

#include <set>

#include "gazemae/errors.hpp"
#include "gazemae/rng.hpp"
#include "gazemae/windowing.hpp"
#include "test_util.hpp"

using namespace gazemae;

namespace {

FaceTrack make_track(const std::vector<std::int64_t>& frames, int label = 0) {
  FaceTrack track;
  track.clip_id = "clip";
  track.face_id = "face";
  for (auto f : frames) {
    track.records.push_back(test::make_record("clip", f, "face", label, 2.0 + f, 3.0, 8, 9));
  }
  return track;
}

SamplingSpec spec_with_stride(int stride) {
  SamplingSpec spec;
  spec.stride = stride;
  spec.half_window = 3;
  spec.resolution = 32;
  return spec;
}

}  // namespace

TEST_CASE("select_centers strides over record positions") {
  std::vector<std::int64_t> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(i);
  const auto track = make_track(frames);
  const auto centers = select_centers(track, spec_with_stride(13));
  REQUIRE(centers.size() == 2);
  CHECK(centers[0] == 0);
  CHECK(centers[1] == 13);
}

TEST_CASE("select_centers stride 1 selects every annotated frame") {
  const auto track = make_track({0, 2, 5, 9, 14});
  const auto centers = select_centers(track, spec_with_stride(1));
  REQUIRE(centers.size() == track.records.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    CHECK(centers[i] == track.records[i].frame_index);
  }
}

TEST_CASE("select_centers singleton track") {
  const auto track = make_track({42});
  for (int stride : {1, 5, 13}) {
    const auto centers = select_centers(track, spec_with_stride(stride));
    REQUIRE(centers.size() == 1);
    CHECK(centers[0] == 42);
  }
}

TEST_CASE("select_centers matches the position-enumeration oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> frames;
    std::int64_t f = rng.below(5);
    const int n = 1 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      frames.push_back(f);
      f += 1 + static_cast<std::int64_t>(rng.below(4));
    }
    const auto track = make_track(frames);
    const int stride = 1 + static_cast<int>(rng.below(15));
    const auto centers = select_centers(track, spec_with_stride(stride));

    std::vector<std::int64_t> expected;
    for (std::size_t pos = 0; pos < frames.size(); pos += static_cast<std::size_t>(stride)) {
      expected.push_back(frames[pos]);
    }
    CHECK(centers == expected);
  }
}

TEST_CASE("build_window boundary fill") {
  const auto track = make_track({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto window = build_window(track, 0, spec_with_stride(13));
  REQUIRE(window.slots.size() == 7);
  CHECK(window.slots[0].blank);
  CHECK(window.slots[1].blank);
  CHECK(window.slots[2].blank);
  for (int i = 3; i < 7; ++i) {
    REQUIRE_FALSE(window.slots[static_cast<std::size_t>(i)].blank);
    CHECK(window.slots[static_cast<std::size_t>(i)].frame_index == i - 3);
  }
}

TEST_CASE("build_window gap handling and unannotated center") {
  const auto track = make_track({0, 1, 2, 4, 5, 6});
  CHECK_THROWS_AS(build_window(track, 3, spec_with_stride(1)), ValidationError);

  const auto window = build_window(track, 2, spec_with_stride(1));
  REQUIRE(window.slots.size() == 7);
  CHECK(window.slots[0].blank);  // frame -1
  CHECK(window.slots[1].frame_index == 0);
  CHECK(window.slots[2].frame_index == 1);
  CHECK(window.slots[3].frame_index == 2);
  CHECK(window.slots[4].blank);  // frame 3 is the gap
  CHECK(window.slots[5].frame_index == 4);
  CHECK(window.slots[6].frame_index == 5);
}

TEST_CASE("build_window dense interior has no blanks") {
  const auto track = make_track({0, 1, 2, 3, 4, 5, 6, 7, 8});
  const auto window = build_window(track, 4, spec_with_stride(1));
  for (const auto& slot : window.slots) CHECK_FALSE(slot.blank);
}

TEST_CASE("windowing matches brute-force scan oracle on random gapped tracks") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::set<std::int64_t> frame_set;
    const int n = 1 + static_cast<int>(rng.below(25));
    std::int64_t f = rng.below(4);
    for (int i = 0; i < n; ++i) {
      frame_set.insert(f);
      f += 1 + static_cast<std::int64_t>(rng.below(4));
    }
    const std::vector<std::int64_t> frames(frame_set.begin(), frame_set.end());
    const auto track = make_track(frames);
    const auto spec = spec_with_stride(1 + static_cast<int>(rng.below(14)));

    const auto centers = select_centers(track, spec);
    for (const auto center : centers) {
      const auto window = build_window(track, center, spec);
      REQUIRE(window.slots.size() == 7);
      CHECK_FALSE(window.slots[3].blank);
      CHECK(window.center_frame_index == center);
      // brute-force scan center-3 .. center+3
      for (int i = -3; i <= 3; ++i) {
        const bool exists = frame_set.count(center + i) > 0;
        const auto& slot = window.slots[static_cast<std::size_t>(i + 3)];
        CHECK(slot.blank == !exists);
        if (exists) CHECK(slot.frame_index == center + i);
      }
      // monotone frame indices among非blank slots
      std::int64_t prev = -1000;
      for (const auto& slot : window.slots) {
        if (slot.blank) continue;
        CHECK(slot.frame_index > prev);
        prev = slot.frame_index;
      }
    }
  }
}

TEST_CASE("stride 1 yields exactly one window per annotated frame") {
  const auto track = make_track({0, 3, 4, 8, 9, 10, 22});
  const auto windows = track_windows(track, spec_with_stride(1));
  REQUIRE(windows.size() == track.records.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(windows[i].center_frame_index == track.records[i].frame_index);
    CHECK(windows[i].label == track.records[i].label);
  }
}

TEST_CASE("materialize_window fills blanks with zeros and crops the rest") {
  test::TempDir dir("frames");
  Rng rng(5);

  // two real frames on disk: 0 and 2
  FaceTrack track;
  track.clip_id = "clipA";
  track.face_id = "face0";
  std::filesystem::create_directories(dir.path() / "clipA");
  std::vector<Image> images;
  for (const std::int64_t f : {0, 2}) {
    Image img = Image::zeros(40, 40);
    for (auto& v : img.data) v = static_cast<float>(rng.below(256)) / 255.0f;
    char name[16];
    std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(f));
    save_png(dir.path() / "clipA" / name, img);
    images.push_back(img);
    track.records.push_back(test::make_record("clipA", f, "face0", 1, 4, 6, 20, 22));
  }

  SamplingSpec spec;
  spec.stride = 1;
  spec.half_window = 3;
  spec.resolution = 24;
  const FrameStore store(dir.path());
  const auto window = build_window(track, 0, spec);
  const auto tensor = materialize_window(window, store, spec);
  REQUIRE(tensor.frames == 7);
  REQUIRE(tensor.height == 24);

  // slots: [B,B,B, f0, B, f2, B]
  for (const int t : {0, 1, 2, 4, 6}) {
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        for (int c = 0; c < 3; ++c) {
          REQUIRE(tensor.at(t, y, x, c) == 0.0f);
        }
      }
    }
  }
  // per-frame crop oracle applied independently
  int slot_t = 3;
  for (std::size_t i = 0; i < images.size(); ++i, slot_t += 2) {
    const Image expect = crop_and_resize(images[i], track.records[i].bbox, 24);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        for (int c = 0; c < 3; ++c) {
          REQUIRE(tensor.at(slot_t, y, x, c) == expect.at(y, x, c));
        }
      }
    }
  }
}

TEST_CASE("materialize_window names the missing frame path") {
  test::TempDir dir("missing");
  FaceTrack track;
  track.clip_id = "clipB";
  track.face_id = "f";
  track.records.push_back(test::make_record("clipB", 0, "f", 0));
  SamplingSpec spec;
  spec.resolution = 16;
  const auto window = build_window(track, 0, spec);
  const FrameStore store(dir.path());
  try {
    materialize_window(window, store, spec);
    FAIL("expected Error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("clipB") != std::string::npos);
    CHECK(std::string(e.what()).find("000000.png") != std::string::npos);
  }
}

TEST_CASE("window manifest line renders blanks as dashes") {
  const auto track = make_track({0, 1}, 1);
  const auto window = build_window(track, 0, spec_with_stride(1));
  CHECK(window_manifest_line(window) == "clip face 0 1 - - - 0 1 - -");
}
