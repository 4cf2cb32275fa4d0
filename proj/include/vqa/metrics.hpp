#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "vqa/video.hpp"

namespace vqa {

/// Paired predicted/subjective scores; correlations need at least 3 pairs.
struct ScorePairs {
  std::vector<double> predicted;
  std::vector<double> subjective;
};

/// 4-parameter monotone logistic
///   f(x) = (b1 - b2) / (1 + exp(-(x - b3)/|b4|)) + b2.
struct LogisticParams {
  double b1 = 1.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double b4 = 1.0;
  bool fallback_affine = false;  // set when the fit diverged and an affine
                                 // map was used instead

  double eval(double x) const;
};

/// Spearman rank-order correlation: Pearson correlation of the rank vectors,
/// ties getting average ranks. Throws when either list has zero rank
/// variance (a constant list makes the coefficient undefined).
double srocc(const ScorePairs& pairs);

/// Fits the logistic by damped Gauss-Newton (falling back to an affine map if
/// the fit diverges) and returns the Pearson correlation of f(predicted)
/// against subjective, plus the fitted curve.
struct PlccResult {
  double plcc = 0.0;
  LogisticParams params;
};
PlccResult plcc_after_logistic(const ScorePairs& pairs);

/// Pearson correlation of two equal-length lists (length >= 3).
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Video PSNR on 8-bit luma: 10*log10(255^2 / mean over frames of frame MSE).
/// Identical videos report +infinity.
double psnr_video(const RawVideo& reference, const RawVideo& distorted);

/// One evaluation run on one split.
struct RunMetrics {
  std::uint64_t seed = 0;
  double plcc = 0.0;
  double srocc = 0.0;
  LogisticParams logistic;
};

/// Per-run metrics plus medians (midpoint averaging for even counts).
struct EvalReport {
  std::vector<RunMetrics> runs;
  double median_plcc = 0.0;
  double median_srocc = 0.0;
};

/// Median with midpoint averaging; requires a non-empty list.
double median(std::vector<double> values);

/// Builds the report (medians included) from per-run metrics.
EvalReport aggregate_runs(std::vector<RunMetrics> runs);

/// CSV: header, one row per run, and a final `median` row. JSON mirrors the
/// same fields.
void save_report_csv(const std::filesystem::path& path, const EvalReport& report);
void save_report_json(const std::filesystem::path& path, const EvalReport& report);

}  // namespace vqa
