#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqa/rng.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

/// Raw planar 8-bit luminance video, frame-major, row-major within a frame.
struct RawVideo {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t frames = 0;
  std::vector<std::uint8_t> luma;

  std::uint8_t at(std::int64_t frame, std::int64_t row, std::int64_t col) const {
    return luma[static_cast<std::size_t>((frame * height + row) * width + col)];
  }
};

/// Reads a raw Y video described by a JSON sidecar {width,height,frames,
/// bitdepth}. The file size must match width*height*frames exactly; frames
/// are never rescaled.
RawVideo load_raw_video(const std::filesystem::path& path,
                        const std::filesystem::path& sidecar);
/// Convenience: sidecar at `path + ".json"`.
RawVideo load_raw_video(const std::filesystem::path& path);

void save_raw_video(const std::filesystem::path& path, const RawVideo& video);

/// One spatiotemporal training/eval sample. Distorted samples are scaled to
/// [0,1]; the residual is (reference - distorted) after that scaling, hence
/// in [-1,1]. All clips cut from one distorted video carry its label.
struct ClipPair {
  TensorPtr distorted;  // [1, D, h, w]
  TensorPtr residual;   // [1, D, h, w]
  float label = 0.0f;
  std::string video_id;
  std::int64_t frame_offset = 0;
  std::int64_t row = 0;
  std::int64_t col = 0;
};

/// Spatiotemporal anchor of one segment inside a video.
struct SegmentAnchor {
  std::int64_t frame_offset = 0;
  std::int64_t row = 0;
  std::int64_t col = 0;
};

/// Cuts one clip pair at an anchor.
ClipPair cut_clip(const RawVideo& reference, const RawVideo& distorted, std::int64_t d,
                  std::int64_t window, const SegmentAnchor& anchor, float label,
                  const std::string& video_id);

/// Training sampling: one uniformly random temporal offset, then a
/// non-overlapping spatial tiling anchored at (0,0); right/bottom remainders
/// are discarded. One ClipPair per window.
std::vector<ClipPair> sample_training_clips(const RawVideo& reference,
                                            const RawVideo& distorted, std::int64_t d,
                                            std::int64_t window, Rng& rng, float label,
                                            const std::string& video_id);

/// Deterministic evaluation tiling: temporal anchors 0, D, 2D, ... (a final
/// partial clip is dropped) crossed with the spatial tiling.
std::vector<SegmentAnchor> sample_eval_segments(const RawVideo& video, std::int64_t d,
                                                std::int64_t window);

enum class ScorePolarity {
  kHigherIsBetter,
  kLowerIsBetter,
};

struct ReferenceEntry {
  std::string id;
  std::filesystem::path file;
};

struct DistortedEntry {
  std::string id;
  std::string reference_id;
  std::filesystem::path file;
  double score = 0.0;
  std::string distortion;  // optional tag
};

/// Declarative dataset description. File paths are stored resolved against
/// the manifest's directory.
struct DatasetManifest {
  ScorePolarity polarity = ScorePolarity::kHigherIsBetter;
  std::vector<ReferenceEntry> references;
  std::vector<DistortedEntry> distorted;

  const ReferenceEntry& reference_by_id(const std::string& id) const;
  std::vector<const DistortedEntry*> distorted_of(const std::string& reference_id) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Content-separated split: whole reference videos (with every distorted
/// video derived from them) land on one side.
struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> train_references;
  std::vector<std::string> test_references;
};

/// round(fraction * N) references to train, the rest to test; at least one on
/// each side. Deterministic per seed.
SplitPlan make_split(const DatasetManifest& manifest, double fraction, std::uint64_t seed);

/// Affine map taking raw subjective scores to training targets in [0,1] with
/// 1 = best quality (the polarity decides whether the scale flips).
struct LabelScale {
  double offset = 0.0;
  double slope = 1.0;

  float apply(double raw_score) const {
    return static_cast<float>(offset + slope * raw_score);
  }
};

/// Min-max normalization over the scores of the given distorted entries.
/// Degenerate spans (all scores equal) map everything to 0.5.
LabelScale fit_label_scale(const std::vector<const DistortedEntry*>& entries,
                           ScorePolarity polarity);

/// Orients a raw subjective score so that greater means better quality.
double orient_score(double raw_score, ScorePolarity polarity);

}  // namespace vqa
