// Synthetic fixtures: procedural moving textures, noise-graded distortions,
// and the tiny manifests the training/eval tests run on.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "vqa/rng.hpp"
#include "vqa/video.hpp"

namespace synth {

/// Procedural texture with motion: two drifting sinusoidal gratings plus a
/// per-reference DC offset. Parameters are drawn from the seed so every
/// reference has distinct content.
inline vqa::RawVideo make_reference(std::int64_t width, std::int64_t height,
                                    std::int64_t frames, std::uint64_t seed) {
  vqa::Rng rng(seed);
  struct Wave {
    double fx, fy, ft, phase, amp;
  };
  Wave waves[2];
  for (auto& w : waves) {
    w.fx = rng.uniform(0.02, 0.22);
    w.fy = rng.uniform(0.02, 0.22);
    w.ft = rng.uniform(0.05, 0.45);
    w.phase = rng.uniform(0.0, 6.28318);
    w.amp = rng.uniform(28.0, 52.0);
  }
  const double dc = rng.uniform(96.0, 160.0);
  vqa::RawVideo v;
  v.width = width;
  v.height = height;
  v.frames = frames;
  v.luma.resize(static_cast<std::size_t>(width * height * frames));
  std::size_t i = 0;
  for (std::int64_t t = 0; t < frames; ++t) {
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x, ++i) {
        double val = dc;
        for (const auto& w : waves) {
          val += w.amp * std::sin(6.28318 * (w.fx * static_cast<double>(x) +
                                             w.fy * static_cast<double>(y) +
                                             w.ft * static_cast<double>(t)) +
                                  w.phase);
        }
        v.luma[i] = static_cast<std::uint8_t>(std::clamp(val, 0.0, 255.0));
      }
    }
  }
  return v;
}

/// Additive Gaussian noise on 8-bit samples, clamped to range.
inline vqa::RawVideo add_noise(const vqa::RawVideo& ref, double sigma, std::uint64_t seed) {
  vqa::Rng rng(seed);
  vqa::RawVideo out = ref;
  for (auto& px : out.luma) {
    const double v = static_cast<double>(px) + rng.gaussian(0.0, sigma);
    px = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

/// Noise-graded dataset: n_refs procedural references, each distorted at the
/// given sigma levels. Scores are the sigmas (lower is better). Videos and
/// manifest are written under dir; returns the manifest path.
inline std::filesystem::path make_noise_graded_dataset(
    const std::filesystem::path& dir, std::int64_t n_refs,
    const std::vector<double>& sigmas, std::int64_t width, std::int64_t height,
    std::int64_t frames, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  vqa::DatasetManifest m;
  m.polarity = vqa::ScorePolarity::kLowerIsBetter;
  for (std::int64_t r = 0; r < n_refs; ++r) {
    const std::string rid = "ref" + std::to_string(r);
    auto ref = make_reference(width, height, frames, seed + static_cast<std::uint64_t>(r));
    const auto ref_file = dir / (rid + ".yuv");
    vqa::save_raw_video(ref_file, ref);
    m.references.push_back({rid, ref_file});
    for (std::size_t lvl = 0; lvl < sigmas.size(); ++lvl) {
      const std::string did = rid + "_n" + std::to_string(lvl);
      auto dist = add_noise(ref, sigmas[lvl],
                            seed ^ (static_cast<std::uint64_t>(r) * 1000 + lvl + 17));
      const auto dist_file = dir / (did + ".yuv");
      vqa::save_raw_video(dist_file, dist);
      m.distorted.push_back({did, rid, dist_file, sigmas[lvl], "awgn"});
    }
  }
  const auto manifest_path = dir / "manifest.json";
  vqa::save_manifest(manifest_path, m);
  return manifest_path;
}

/// Overfit fixture: references 0 and 1 carry four distorted videos each (the
/// eight training clips when a split keeps both on the training side);
/// reference 2 carries one and forms the held-out side. Every video is
/// exactly D frames at the patch size, so each yields the same single clip
/// every epoch. Noise strength rises monotonically with the assigned score.
inline std::filesystem::path make_overfit_dataset(const std::filesystem::path& dir,
                                                  std::int64_t patch, std::int64_t frames,
                                                  std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  vqa::DatasetManifest m;
  m.polarity = vqa::ScorePolarity::kHigherIsBetter;
  const double sigmas[8] = {6, 13, 20, 27, 34, 41, 48, 55};
  int clip_index = 0;
  for (std::int64_t r = 0; r < 3; ++r) {
    const std::string rid = "ref" + std::to_string(r);
    auto ref = make_reference(patch, patch, frames, seed + static_cast<std::uint64_t>(r));
    const auto ref_file = dir / (rid + ".yuv");
    vqa::save_raw_video(ref_file, ref);
    m.references.push_back({rid, ref_file});
    const int k_count = r < 2 ? 4 : 1;
    for (int k = 0; k < k_count; ++k, ++clip_index) {
      const std::string did = rid + "_v" + std::to_string(k);
      const double sigma = r < 2 ? sigmas[r * 4 + k] : 30.0;
      auto dist =
          add_noise(ref, sigma, seed ^ static_cast<std::uint64_t>(clip_index * 131 + 7));
      const auto dist_file = dir / (did + ".yuv");
      vqa::save_raw_video(dist_file, dist);
      const double score = r < 2 ? 0.1 * (r * 4 + k + 1) : 0.45;
      m.distorted.push_back({did, rid, dist_file, score, "overfit"});
    }
  }
  const auto manifest_path = dir / "manifest.json";
  vqa::save_manifest(manifest_path, m);
  return manifest_path;
}

/// Manifest with n references and one distorted entry each; no files behind
/// it (split logic never opens them).
inline vqa::DatasetManifest make_split_manifest(std::int64_t n_refs) {
  vqa::DatasetManifest m;
  m.polarity = vqa::ScorePolarity::kLowerIsBetter;
  for (std::int64_t r = 0; r < n_refs; ++r) {
    const std::string rid = "ref" + std::to_string(r);
    m.references.push_back({rid, "unused.yuv"});
    for (int k = 0; k < 3; ++k) {
      m.distorted.push_back({rid + "_d" + std::to_string(k), rid, "unused.yuv",
                             static_cast<double>(k), "tag"});
    }
  }
  return m;
}

}  // namespace synth
