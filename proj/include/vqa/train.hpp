#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vqa/metrics.hpp"
#include "vqa/model.hpp"
#include "vqa/predict.hpp"
#include "vqa/video.hpp"

namespace vqa {

/// One reproducible run: dataset, model geometry, optimization schedule.
/// Loaded from flat JSON; command-line flags override individual fields.
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "out";

  ModelConfig model;          // frames/patch/channels/variant
  std::int64_t window = 112;  // sampling window (= model.patch)

  double lr = 1e-4;           // 3e-4 is the CSIQ-style preset
  std::int64_t epochs = 250;
  std::int64_t batch_size = 4;
  LossHyperParams loss;
  double split_fraction = 0.8;
  std::uint64_t seed = 1;
  std::int64_t repeats = 10;

  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Per-epoch training trace. The learning-rate column never increases and
/// each decrease is exactly a factor of the scheduler's 0.9.
struct TrainLog {
  struct Row {
    std::int64_t epoch = 0;
    double loss = 0.0;
    double mse = 0.0;  // data term only
    double lr = 0.0;
    double seconds = 0.0;
  };
  std::vector<Row> rows;
  std::int64_t best_epoch = -1;
  double best_loss = 0.0;
};

void save_train_log(const std::filesystem::path& path, const TrainLog& log);

struct TrainResult {
  TrainLog log;
  std::shared_ptr<ModelParams> best_params;
  SplitPlan split;
  std::filesystem::path checkpoint_path;
};

/// Runs the epoch loop on the train side of the (seeded) split: per epoch,
/// every training video contributes the clips of one random temporal draw;
/// batches feed the Eq.(1) objective, Adam steps, and the plateau scheduler.
/// The checkpoint of the smallest-training-loss epoch is kept and written to
/// output_dir along with the log. Throws on divergence (non-finite loss).
TrainResult train_model(const RunConfig& cfg, const DatasetManifest& manifest);

/// Video-level scorer: higher output = better predicted quality.
using VideoScorer = std::function<double(const RawVideo& reference, const RawVideo& dist)>;

/// Wraps a trained model as a VideoScorer (segment-mean prediction).
VideoScorer make_model_scorer(std::shared_ptr<const ModelParams> params,
                              std::int64_t window);

/// For each repeat r: split with seed cfg.seed + r, score the test-side
/// distorted videos, correlate against subjective scores oriented so higher
/// is better, fit the logistic for PLCC. Predictions are cached per video
/// across repeats (the scorer is pure). Reports are written to output_dir
/// when `write_outputs`.
EvalReport evaluate(const RunConfig& cfg, const DatasetManifest& manifest,
                    const VideoScorer& scorer, bool write_outputs = true);

/// Per-segment-length train+eval sweep. Emits CSV rows
/// `D,PLCC,SROCC,epoch_seconds`; a failing segment length is recorded as a
/// row of NaNs and the sweep continues.
struct SweepRow {
  std::int64_t frames = 0;
  double plcc = 0.0;
  double srocc = 0.0;
  double epoch_seconds = 0.0;
  bool failed = false;
  std::string error;
};

std::vector<SweepRow> sweep_frames(const RunConfig& cfg, const DatasetManifest& manifest,
                                   const std::vector<std::int64_t>& frame_counts);

void save_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace vqa
