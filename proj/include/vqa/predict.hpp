#pragma once

#include <vector>

#include "vqa/model.hpp"
#include "vqa/video.hpp"

namespace vqa {

/// Deterministic per-segment scores (eval tiling, no RNG) for one video pair.
std::vector<double> score_segments(const ModelParams& params, const RawVideo& reference,
                                   const RawVideo& distorted, std::int64_t window);

/// Arithmetic mean of the segment scores: the video-level prediction.
double predict_video(const ModelParams& params, const RawVideo& reference,
                     const RawVideo& distorted, std::int64_t window);

}  // namespace vqa
