#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "synth.hpp"
#include "vqa/video.hpp"

using namespace vqa;

namespace {

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_sidecar(const std::filesystem::path& p, std::int64_t w, std::int64_t h,
                   std::int64_t frames) {
  std::ofstream os(p);
  os << "{\"width\": " << w << ", \"height\": " << h << ", \"frames\": " << frames
     << ", \"bitdepth\": 8}";
}

}  // namespace

TEST_CASE("load_raw_video: size arithmetic, mismatch, round trip") {
  auto dir = temp_dir("vqa_video_io");

  SUBCASE("a 4x2x3 file of 24 bytes loads with frame count 3") {
    std::vector<std::uint8_t> bytes(24);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i);
    {
      std::ofstream os(dir / "v.yuv", std::ios::binary);
      os.write(reinterpret_cast<const char*>(bytes.data()), 24);
    }
    write_sidecar(dir / "v.yuv.json", 4, 2, 3);
    auto v = load_raw_video(dir / "v.yuv");
    CHECK(v.frames == 3);
    CHECK(v.width == 4);
    CHECK(v.height == 2);
    CHECK(v.at(2, 1, 3) == 23);
  }

  SUBCASE("23 bytes against a 4x2x3 sidecar is an error") {
    {
      std::ofstream os(dir / "short.yuv", std::ios::binary);
      std::vector<char> b(23, 0);
      os.write(b.data(), 23);
    }
    write_sidecar(dir / "short.yuv.json", 4, 2, 3);
    CHECK_THROWS_AS(load_raw_video(dir / "short.yuv"), std::runtime_error);
  }

  SUBCASE("missing file and malformed sidecar are errors") {
    CHECK_THROWS_AS(load_raw_video(dir / "absent.yuv"), std::runtime_error);
    {
      std::ofstream os(dir / "bad.yuv.json");
      os << "{\"width\": 4}";
    }
    {
      std::ofstream os(dir / "bad.yuv", std::ios::binary);
    }
    CHECK_THROWS_AS(load_raw_video(dir / "bad.yuv"), std::runtime_error);
  }

  SUBCASE("synthetic gradient video survives a write/read round trip byte-identically") {
    RawVideo v;
    v.width = 6;
    v.height = 5;
    v.frames = 4;
    v.luma.resize(120);
    for (std::size_t i = 0; i < v.luma.size(); ++i) {
      v.luma[i] = static_cast<std::uint8_t>((i * 7) % 256);
    }
    save_raw_video(dir / "rt.yuv", v);
    auto back = load_raw_video(dir / "rt.yuv");
    CHECK(back.width == v.width);
    CHECK(back.height == v.height);
    CHECK(back.frames == v.frames);
    CHECK(back.luma == v.luma);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("sample_training_clips: tiling counts and bounds") {
  Rng content(1);
  auto make_video = [&](std::int64_t w, std::int64_t h, std::int64_t f) {
    RawVideo v;
    v.width = w;
    v.height = h;
    v.frames = f;
    v.luma.resize(static_cast<std::size_t>(w * h * f));
    for (auto& px : v.luma) px = static_cast<std::uint8_t>(content.uniform_int(256));
    return v;
  };

  SUBCASE("224x224 at window 112 gives 4 clips") {
    auto ref = make_video(224, 224, 10);
    auto dist = make_video(224, 224, 10);
    Rng rng(2);
    auto clips = sample_training_clips(ref, dist, 8, 112, rng, 0.5f, "v");
    CHECK(clips.size() == 4);
  }

  SUBCASE("112x112 gives exactly one clip") {
    auto ref = make_video(112, 112, 10);
    auto dist = make_video(112, 112, 10);
    Rng rng(3);
    auto clips = sample_training_clips(ref, dist, 8, 112, rng, 0.5f, "v");
    CHECK(clips.size() == 1);
    CHECK(clips[0].row == 0);
    CHECK(clips[0].col == 0);
  }

  SUBCASE("768x432 gives 3*6 = 18 clips") {
    auto ref = make_video(768, 432, 9);
    auto dist = make_video(768, 432, 9);
    Rng rng(4);
    auto clips = sample_training_clips(ref, dist, 8, 112, rng, 0.25f, "v");
    CHECK(clips.size() == 18);
  }

  SUBCASE("label constancy and in-bounds origins") {
    auto ref = make_video(300, 250, 12);
    auto dist = make_video(300, 250, 12);
    Rng rng(5);
    auto clips = sample_training_clips(ref, dist, 8, 112, rng, 0.77f, "vid9");
    CHECK(clips.size() == 4);  // floor(250/112)=2, floor(300/112)=2
    for (const auto& c : clips) {
      CHECK(c.label == 0.77f);
      CHECK(c.video_id == "vid9");
      CHECK(c.frame_offset >= 0);
      CHECK(c.frame_offset + 8 <= 12);
      CHECK(c.row + 112 <= 250);
      CHECK(c.col + 112 <= 300);
      CHECK(c.distorted->shape() == Shape{1, 8, 112, 112});
    }
  }

  SUBCASE("too short or too small videos are rejected") {
    auto ref = make_video(112, 112, 4);
    auto dist = make_video(112, 112, 4);
    Rng rng(6);
    CHECK_THROWS_AS(sample_training_clips(ref, dist, 8, 112, rng, 0.0f, "v"),
                    std::invalid_argument);
    auto small_ref = make_video(64, 64, 20);
    auto small_dist = make_video(64, 64, 20);
    CHECK_THROWS_AS(sample_training_clips(small_ref, small_dist, 8, 112, rng, 0.0f, "v"),
                    std::invalid_argument);
    auto mismatched = make_video(112, 96, 20);
    CHECK_THROWS_AS(sample_training_clips(ref, mismatched, 8, 112, rng, 0.0f, "v"),
                    std::invalid_argument);
  }
}

TEST_CASE("clip values: distorted in [0,1], residual reconstructs the reference") {
  auto ref = synth::make_reference(16, 16, 6, 11);
  auto dist = synth::add_noise(ref, 20.0, 12);
  auto clip = cut_clip(ref, dist, 4, 16, {1, 0, 0}, 0.5f, "v");

  for (std::int64_t i = 0; i < clip.distorted->numel(); ++i) {
    const float dv = clip.distorted->data()[i];
    const float rv = clip.residual->data()[i];
    CHECK(dv >= 0.0f);
    CHECK(dv <= 1.0f);
    CHECK(rv >= -1.0f);
    CHECK(rv <= 1.0f);
  }

  // Integer-exact identity: round(255*(distorted + residual)) == reference.
  std::size_t i = 0;
  for (std::int64_t f = 0; f < 4; ++f) {
    for (std::int64_t y = 0; y < 16; ++y) {
      for (std::int64_t x = 0; x < 16; ++x, ++i) {
        const double back =
            (static_cast<double>(clip.distorted->data()[i]) +
             static_cast<double>(clip.residual->data()[i])) * 255.0;
        CHECK(std::lround(back) == ref.at(1 + f, y, x));
        // And the float reconstruction is exact to storage precision.
        CHECK(std::fabs(back / 255.0 - ref.at(1 + f, y, x) / 255.0) <= 2e-7);
      }
    }
  }
}

TEST_CASE("sample_eval_segments: deterministic tiling, enumeration oracle") {
  RawVideo v;
  v.width = 240;
  v.height = 120;
  v.luma.clear();

  SUBCASE("120 frames at D=60 give 2 temporal positions") {
    v.frames = 120;
    v.luma.resize(static_cast<std::size_t>(v.width * v.height * v.frames));
    auto anchors = sample_eval_segments(v, 60, 112);
    // spatial tiling: floor(120/112)=1, floor(240/112)=2
    CHECK(anchors.size() == 2 * 1 * 2);
  }

  SUBCASE("150 frames at D=60 drop the 30-frame tail") {
    v.frames = 150;
    v.luma.resize(static_cast<std::size_t>(v.width * v.height * v.frames));
    auto anchors = sample_eval_segments(v, 60, 112);
    CHECK(anchors.size() == 2 * 1 * 2);
    for (const auto& a : anchors) CHECK(a.frame_offset % 60 == 0);
  }

  SUBCASE("anchor count equals brute-force enumeration") {
    v.frames = 37;
    v.luma.resize(static_cast<std::size_t>(v.width * v.height * v.frames));
    const std::int64_t d = 8, window = 48;
    auto anchors = sample_eval_segments(v, d, window);
    std::int64_t count = 0;
    for (std::int64_t t = 0; t + d <= v.frames; t += d) {
      for (std::int64_t r = 0; r + window <= v.height; r += window) {
        for (std::int64_t c = 0; c + window <= v.width; c += window) {
          ++count;
        }
      }
    }
    CHECK(static_cast<std::int64_t>(anchors.size()) == count);
    // Calling twice gives the identical list (no RNG anywhere).
    auto again = sample_eval_segments(v, d, window);
    REQUIRE(again.size() == anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      CHECK(again[i].frame_offset == anchors[i].frame_offset);
      CHECK(again[i].row == anchors[i].row);
      CHECK(again[i].col == anchors[i].col);
    }
  }
}

TEST_CASE("make_split: sizes, determinism, content separation") {
  SUBCASE("10 references split 8/2") {
    auto m = synth::make_split_manifest(10);
    auto plan = make_split(m, 0.8, 7);
    CHECK(plan.train_references.size() == 8);
    CHECK(plan.test_references.size() == 2);
  }

  SUBCASE("12 references split 10/2 (round(9.6) = 10)") {
    auto m = synth::make_split_manifest(12);
    auto plan = make_split(m, 0.8, 7);
    CHECK(plan.train_references.size() == 10);
    CHECK(plan.test_references.size() == 2);
  }

  SUBCASE("same seed reproduces the plan; different seeds differ somewhere") {
    auto m = synth::make_split_manifest(10);
    auto a = make_split(m, 0.8, 123);
    auto b = make_split(m, 0.8, 123);
    CHECK(a.train_references == b.train_references);
    CHECK(a.test_references == b.test_references);
    bool any_diff = false;
    for (std::uint64_t s = 0; s < 20 && !any_diff; ++s) {
      any_diff = make_split(m, 0.8, s).train_references != a.train_references;
    }
    CHECK(any_diff);
  }

  SUBCASE("every reference lands on exactly one side") {
    auto m = synth::make_split_manifest(9);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto plan = make_split(m, 0.8, seed);
      std::set<std::string> seen;
      for (const auto& r : plan.train_references) seen.insert(r);
      for (const auto& r : plan.test_references) {
        CHECK(seen.count(r) == 0);
        seen.insert(r);
      }
      CHECK(seen.size() == 9);
    }
  }

  SUBCASE("degenerate manifests are rejected") {
    auto m = synth::make_split_manifest(1);
    CHECK_THROWS_AS(make_split(m, 0.8, 1), std::invalid_argument);
  }
}

TEST_CASE("manifest: load/save, resolution, validation") {
  auto dir = temp_dir("vqa_manifest");
  DatasetManifest m;
  m.polarity = ScorePolarity::kLowerIsBetter;
  m.references.push_back({"r1", dir / "r1.yuv"});
  m.distorted.push_back({"d1", "r1", dir / "d1.yuv", 42.5, "h264"});
  save_manifest(dir / "m.json", m);

  auto back = load_manifest(dir / "m.json");
  CHECK(back.polarity == ScorePolarity::kLowerIsBetter);
  REQUIRE(back.references.size() == 1);
  REQUIRE(back.distorted.size() == 1);
  CHECK(back.distorted[0].reference_id == "r1");
  CHECK(back.distorted[0].score == 42.5);
  CHECK(back.distorted[0].distortion == "h264");
  // Paths resolve relative to the manifest location.
  CHECK(back.references[0].file == dir / "r1.yuv");

  SUBCASE("unresolvable reference id") {
    std::ofstream os(dir / "bad.json");
    os << R"({"score_polarity": "lower_is_better",
              "references": [{"id": "a", "file": "a.yuv"}],
              "distorted": [{"id": "d", "reference_id": "missing",
                             "file": "d.yuv", "score": 1.0}]})";
    os.close();
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), std::runtime_error);
  }

  SUBCASE("bad polarity string") {
    std::ofstream os(dir / "pol.json");
    os << R"({"score_polarity": "sideways", "references": [], "distorted": []})";
    os.close();
    CHECK_THROWS_AS(load_manifest(dir / "pol.json"), std::runtime_error);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("label scale: min-max with polarity orientation") {
  DistortedEntry a{"a", "r", "f", 20.0, ""};
  DistortedEntry b{"b", "r", "f", 60.0, ""};
  DistortedEntry c{"c", "r", "f", 40.0, ""};
  std::vector<const DistortedEntry*> entries = {&a, &b, &c};

  SUBCASE("higher is better maps [min,max] onto [0,1]") {
    auto s = fit_label_scale(entries, ScorePolarity::kHigherIsBetter);
    CHECK(s.apply(20.0) == doctest::Approx(0.0));
    CHECK(s.apply(60.0) == doctest::Approx(1.0));
    CHECK(s.apply(40.0) == doctest::Approx(0.5));
  }

  SUBCASE("lower is better flips so 1 = best") {
    auto s = fit_label_scale(entries, ScorePolarity::kLowerIsBetter);
    CHECK(s.apply(20.0) == doctest::Approx(1.0));
    CHECK(s.apply(60.0) == doctest::Approx(0.0));
  }

  SUBCASE("degenerate spans collapse to 0.5") {
    DistortedEntry d{"d", "r", "f", 40.0, ""};
    std::vector<const DistortedEntry*> same = {&c, &d};
    auto s = fit_label_scale(same, ScorePolarity::kHigherIsBetter);
    CHECK(s.apply(40.0) == doctest::Approx(0.5));
  }

  CHECK(orient_score(3.0, ScorePolarity::kHigherIsBetter) == 3.0);
  CHECK(orient_score(3.0, ScorePolarity::kLowerIsBetter) == -3.0);
}

TEST_CASE("training clip sampling is reproducible under RNG forks per video") {
  auto ref = synth::make_reference(128, 128, 20, 31);
  auto dist = synth::add_noise(ref, 12.0, 32);

  Rng base(99);
  Rng r1 = base.fork(fnv1a64("videoA"));
  Rng r2 = base.fork(fnv1a64("videoA"));
  auto c1 = sample_training_clips(ref, dist, 8, 64, r1, 0.5f, "videoA");
  auto c2 = sample_training_clips(ref, dist, 8, 64, r2, 0.5f, "videoA");
  REQUIRE(c1.size() == c2.size());
  CHECK(c1[0].frame_offset == c2[0].frame_offset);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    for (std::int64_t j = 0; j < c1[i].distorted->numel(); ++j) {
      REQUIRE(c1[i].distorted->data()[j] == c2[i].distorted->data()[j]);
    }
  }
}
