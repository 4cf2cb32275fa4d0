#include "vqa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "vqa/checkpoint.hpp"
#include "vqa/optim.hpp"

namespace vqa {

using nlohmann::json;

void RunConfig::validate() const {
  model.validate();
  if (window != model.patch) {
    throw std::invalid_argument("config: sampling window must equal the model patch size");
  }
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch size must be >= 1");
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument("config: learning rate must be positive");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw std::invalid_argument("config: split fraction must be in (0,1)");
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": bad JSON: " + e.what());
  }
  RunConfig cfg;
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  try {
    if (j.contains("manifest")) {
      cfg.manifest = base / j.at("manifest").get<std::string>();
    }
    if (j.contains("output_dir")) {
      cfg.output_dir = base / j.at("output_dir").get<std::string>();
    }
    if (j.contains("frames")) cfg.model.frames = j.at("frames").get<std::int64_t>();
    if (j.contains("patch")) cfg.model.patch = j.at("patch").get<std::int64_t>();
    if (j.contains("branch_channels")) {
      cfg.model.branch_channels = j.at("branch_channels").get<std::int64_t>();
    }
    if (j.contains("trunk_channels")) {
      cfg.model.trunk_channels = j.at("trunk_channels").get<std::vector<std::int64_t>>();
    }
    if (j.contains("fc_hidden")) cfg.model.fc_hidden = j.at("fc_hidden").get<std::int64_t>();
    if (j.contains("variant")) {
      const auto v = j.at("variant").get<std::string>();
      if (v == "c3d") {
        cfg.model.variant = ModelVariant::kC3D;
      } else if (v == "2d") {
        cfg.model.variant = ModelVariant::kAblation2D;
      } else {
        throw std::runtime_error("config: variant must be \"c3d\" or \"2d\"");
      }
    }
    if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::int64_t>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::int64_t>();
    if (j.contains("lambda1")) cfg.loss.lambda1 = j.at("lambda1").get<double>();
    if (j.contains("lambda2")) cfg.loss.lambda2 = j.at("lambda2").get<double>();
    if (j.contains("split_fraction")) cfg.split_fraction = j.at("split_fraction").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("repeats")) cfg.repeats = j.at("repeats").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  cfg.window = cfg.model.patch;
  return cfg;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  json j{{"manifest", cfg.manifest.string()},
         {"output_dir", cfg.output_dir.string()},
         {"frames", cfg.model.frames},
         {"patch", cfg.model.patch},
         {"branch_channels", cfg.model.branch_channels},
         {"trunk_channels", cfg.model.trunk_channels},
         {"fc_hidden", cfg.model.fc_hidden},
         {"variant", cfg.model.variant == ModelVariant::kC3D ? "c3d" : "2d"},
         {"lr", cfg.lr},
         {"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"lambda1", cfg.loss.lambda1},
         {"lambda2", cfg.loss.lambda2},
         {"split_fraction", cfg.split_fraction},
         {"seed", cfg.seed},
         {"repeats", cfg.repeats}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

void save_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("train log: cannot open " + path.string());
  os.precision(10);
  os << "epoch,loss,mse,lr,seconds\n";
  for (const auto& r : log.rows) {
    os << r.epoch << "," << r.loss << "," << r.mse << "," << r.lr << "," << r.seconds
       << "\n";
  }
  if (!os) throw std::runtime_error("train log: write failed for " + path.string());
}

// --- training loop ----------------------------------------------------------------

namespace {

/// Loads manifest videos on first use and keeps them for the run.
class VideoStore {
 public:
  explicit VideoStore(const DatasetManifest& manifest) : manifest_(manifest) {}

  const RawVideo& reference(const std::string& id) {
    return get("ref:" + id, manifest_.reference_by_id(id).file);
  }

  const RawVideo& distorted(const DistortedEntry& e) {
    return get("dist:" + e.id, e.file);
  }

 private:
  const RawVideo& get(const std::string& key, const std::filesystem::path& file) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, load_raw_video(file)).first->second;
  }

  const DatasetManifest& manifest_;
  std::map<std::string, RawVideo> cache_;
};

std::vector<std::vector<float>> snapshot_params(const ModelParams& params) {
  std::vector<std::vector<float>> snap;
  for (const auto& t : params.parameters()) {
    snap.emplace_back(t->data().begin(), t->data().end());
  }
  return snap;
}

void restore_params(ModelParams& params, const std::vector<std::vector<float>>& snap) {
  auto tensors = params.parameters();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    std::copy(snap[i].begin(), snap[i].end(), tensors[i]->data().begin());
  }
}

}  // namespace

TrainResult train_model(const RunConfig& cfg, const DatasetManifest& manifest) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  const SplitPlan split = make_split(manifest, cfg.split_fraction, cfg.seed);

  // Training entries follow manifest order within the training references.
  std::vector<const DistortedEntry*> train_entries;
  for (const auto& d : manifest.distorted) {
    if (std::find(split.train_references.begin(), split.train_references.end(),
                  d.reference_id) != split.train_references.end()) {
      train_entries.push_back(&d);
    }
  }
  if (train_entries.empty()) {
    throw std::runtime_error("train: no distorted videos on the training side");
  }
  const LabelScale labels = fit_label_scale(train_entries, manifest.polarity);

  VideoStore store(manifest);
  auto model = build_model(cfg.model, Rng(cfg.seed).fork(fnv1a64("init")).seed());
  AdamOptimizer optimizer(model->parameters(), cfg.lr);
  PlateauScheduler scheduler;

  TrainResult result;
  result.split = split;
  std::vector<std::vector<float>> best_snapshot;
  double best_loss = std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = -1;

  const Rng run_rng(cfg.seed);
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng epoch_rng = run_rng.fork(fnv1a64("epoch") + static_cast<std::uint64_t>(epoch));

    // One temporal draw per training video; RNG split per video id so the
    // sample set does not depend on iteration order.
    std::vector<ClipPair> clips;
    for (const auto* entry : train_entries) {
      Rng vid_rng = epoch_rng.fork(fnv1a64(entry->id.c_str()));
      auto vc = sample_training_clips(store.reference(entry->reference_id),
                                      store.distorted(*entry), cfg.model.frames,
                                      cfg.window, vid_rng, labels.apply(entry->score),
                                      entry->id);
      for (auto& c : vc) clips.push_back(std::move(c));
    }
    // Seeded Fisher-Yates over the epoch's clips.
    Rng shuffle_rng = epoch_rng.fork(fnv1a64("shuffle"));
    for (std::size_t i = clips.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(i));
      std::swap(clips[i - 1], clips[j]);
    }

    double loss_acc = 0.0;
    double mse_acc = 0.0;
    const auto weights = model->weight_tensors();
    for (std::size_t start = 0; start < clips.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(clips.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Tape tape;
      std::vector<TensorPtr> preds;
      std::vector<float> batch_labels;
      for (std::size_t i = start; i < stop; ++i) {
        auto out = forward(*model, clips[i].distorted, clips[i].residual, &tape);
        preds.push_back(out.score);
        batch_labels.push_back(clips[i].label);
      }
      auto loss = eq1_loss(preds, batch_labels, weights, cfg.loss, &tape);
      const double loss_value = loss->item();
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch starting at clip " +
                                 std::to_string(start));
      }
      double batch_mse = 0.0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        const double d = static_cast<double>(preds[i]->item()) - batch_labels[i];
        batch_mse += d * d;
      }
      loss_acc += loss_value * static_cast<double>(preds.size());
      mse_acc += batch_mse;

      tape.backward(loss);
      optimizer.step();
    }
    const double epoch_loss = loss_acc / static_cast<double>(clips.size());
    const double epoch_mse = mse_acc / static_cast<double>(clips.size());
    optimizer.set_lr(scheduler.update(epoch_loss, optimizer.lr()));

    const auto t1 = std::chrono::steady_clock::now();
    TrainLog::Row row;
    row.epoch = epoch;
    row.loss = epoch_loss;
    row.mse = epoch_mse;
    row.lr = optimizer.lr();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.log.rows.push_back(row);

    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best_epoch = epoch;
      best_snapshot = snapshot_params(*model);
    }
  }

  restore_params(*model, best_snapshot);
  result.best_params = model;
  result.log.best_epoch = best_epoch;
  result.log.best_loss = best_loss;

  result.checkpoint_path = cfg.output_dir / "checkpoint.bin";
  save_checkpoint(result.checkpoint_path, model->named_parameters());
  save_train_log(cfg.output_dir / "train_log.csv", result.log);
  {
    json j{{"best_epoch", best_epoch},
           {"best_loss", best_loss},
           {"epochs", cfg.epochs},
           {"seed", cfg.seed},
           {"train_references", result.split.train_references},
           {"test_references", result.split.test_references}};
    std::ofstream os(cfg.output_dir / "train_summary.json");
    os << j.dump(2) << "\n";
  }
  return result;
}

// --- evaluation -----------------------------------------------------------------------

VideoScorer make_model_scorer(std::shared_ptr<const ModelParams> params,
                              std::int64_t window) {
  return [params, window](const RawVideo& reference, const RawVideo& distorted) {
    return predict_video(*params, reference, distorted, window);
  };
}

EvalReport evaluate(const RunConfig& cfg, const DatasetManifest& manifest,
                    const VideoScorer& scorer, bool write_outputs) {
  VideoStore store(manifest);
  std::map<std::string, double> prediction_cache;

  std::vector<RunMetrics> runs;
  for (std::int64_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t split_seed = cfg.seed + static_cast<std::uint64_t>(r);
    const SplitPlan split = make_split(manifest, cfg.split_fraction, split_seed);

    ScorePairs pairs;
    for (const auto& ref_id : split.test_references) {
      for (const auto* entry : manifest.distorted_of(ref_id)) {
        auto it = prediction_cache.find(entry->id);
        if (it == prediction_cache.end()) {
          const double pred =
              scorer(store.reference(entry->reference_id), store.distorted(*entry));
          it = prediction_cache.emplace(entry->id, pred).first;
        }
        pairs.predicted.push_back(it->second);
        pairs.subjective.push_back(orient_score(entry->score, manifest.polarity));
      }
    }
    if (pairs.predicted.size() < 5) {
      throw std::runtime_error("eval: test split of seed " + std::to_string(split_seed) +
                               " has only " + std::to_string(pairs.predicted.size()) +
                               " distorted videos; need >= 5");
    }
    RunMetrics m;
    m.seed = split_seed;
    m.srocc = srocc(pairs);
    auto plcc = plcc_after_logistic(pairs);
    m.plcc = plcc.plcc;
    m.logistic = plcc.params;
    runs.push_back(m);
  }
  EvalReport report = aggregate_runs(std::move(runs));
  if (write_outputs) {
    std::filesystem::create_directories(cfg.output_dir);
    save_report_csv(cfg.output_dir / "eval_report.csv", report);
    save_report_json(cfg.output_dir / "eval_report.json", report);
  }
  return report;
}

// --- frame-count sweep -------------------------------------------------------------------

std::vector<SweepRow> sweep_frames(const RunConfig& cfg, const DatasetManifest& manifest,
                                   const std::vector<std::int64_t>& frame_counts) {
  std::vector<SweepRow> rows;
  for (std::int64_t d : frame_counts) {
    SweepRow row;
    row.frames = d;
    try {
      RunConfig sub = cfg;
      sub.model.frames = d;
      sub.output_dir = cfg.output_dir / ("sweep_D" + std::to_string(d));
      auto trained = train_model(sub, manifest);
      auto report = evaluate(sub, manifest,
                             make_model_scorer(trained.best_params, sub.window),
                             /*write_outputs=*/true);
      row.plcc = report.median_plcc;
      row.srocc = report.median_srocc;
      double secs = 0.0;
      for (const auto& lr : trained.log.rows) secs += lr.seconds;
      row.epoch_seconds = secs / static_cast<double>(trained.log.rows.size());
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.plcc = row.srocc = row.epoch_seconds = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("sweep: cannot open " + path.string());
  os.precision(10);
  os << "D,PLCC,SROCC,epoch_seconds\n";
  for (const auto& r : rows) {
    os << r.frames << "," << r.plcc << "," << r.srocc << "," << r.epoch_seconds << "\n";
  }
  if (!os) throw std::runtime_error("sweep: write failed for " + path.string());
}

}  // namespace vqa
