#include "vqa/predict.hpp"

namespace vqa {

std::vector<double> score_segments(const ModelParams& params, const RawVideo& reference,
                                   const RawVideo& distorted, std::int64_t window) {
  const auto anchors = sample_eval_segments(distorted, params.config.frames, window);
  std::vector<double> scores;
  scores.reserve(anchors.size());
  for (const auto& a : anchors) {
    auto clip = cut_clip(reference, distorted, params.config.frames, window, a,
                         /*label=*/0.0f, /*video_id=*/"");
    auto res = forward(params, clip.distorted, clip.residual, nullptr);
    scores.push_back(static_cast<double>(res.score->item()));
  }
  return scores;
}

double predict_video(const ModelParams& params, const RawVideo& reference,
                     const RawVideo& distorted, std::int64_t window) {
  const auto scores = score_segments(params, reference, distorted, window);
  double acc = 0.0;
  for (double s : scores) acc += s;
  return acc / static_cast<double>(scores.size());
}

}  // namespace vqa
