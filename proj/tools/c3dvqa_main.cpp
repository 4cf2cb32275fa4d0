// c3dvqa: full-reference video quality assessment toolkit.
//
// Subcommands: train, eval, predict, gradcheck, sweep-frames, dump-maps.
// All state flows through the JSON config and flags; no environment needed.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vqa/checkpoint.hpp"
#include "vqa/metrics.hpp"
#include "vqa/model.hpp"
#include "vqa/predict.hpp"
#include "vqa/refcheck.hpp"
#include "vqa/train.hpp"
#include "vqa/video.hpp"

namespace {

struct ConfigOverrides {
  std::optional<std::string> manifest;
  std::optional<std::string> output_dir;
  std::optional<std::int64_t> frames;
  std::optional<std::int64_t> patch;
  std::optional<double> lr;
  std::optional<std::int64_t> epochs;
  std::optional<std::int64_t> batch_size;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> repeats;
  std::optional<std::string> variant;
};

void add_override_flags(CLI::App* cmd, ConfigOverrides& ov, bool with_out = true) {
  cmd->add_option("--manifest", ov.manifest, "Dataset manifest path (overrides config)");
  if (with_out) {
    cmd->add_option("--out", ov.output_dir, "Output directory (overrides config)");
  }
  cmd->add_option("--frames", ov.frames, "Segment length D (overrides config)");
  cmd->add_option("--patch", ov.patch, "Patch/window extent (overrides config)");
  cmd->add_option("--lr", ov.lr, "Initial learning rate (overrides config)");
  cmd->add_option("--epochs", ov.epochs, "Training epochs (overrides config)");
  cmd->add_option("--batch", ov.batch_size, "Clips per optimizer step (overrides config)");
  cmd->add_option("--lambda1", ov.lambda1, "Data-term weight (overrides config)");
  cmd->add_option("--lambda2", ov.lambda2, "L2 weight (overrides config)");
  cmd->add_option("--seed", ov.seed, "Run seed (overrides config)");
  cmd->add_option("--repeats", ov.repeats, "Evaluation repeats (overrides config)");
  cmd->add_option("--variant", ov.variant, "Model variant: c3d or 2d (overrides config)");
}

vqa::RunConfig resolve_config(const std::string& config_path, const ConfigOverrides& ov) {
  vqa::RunConfig cfg = vqa::load_run_config(config_path);
  if (ov.manifest) cfg.manifest = *ov.manifest;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.frames) cfg.model.frames = *ov.frames;
  if (ov.patch) cfg.model.patch = *ov.patch;
  if (ov.lr) cfg.lr = *ov.lr;
  if (ov.epochs) cfg.epochs = *ov.epochs;
  if (ov.batch_size) cfg.batch_size = *ov.batch_size;
  if (ov.lambda1) cfg.loss.lambda1 = *ov.lambda1;
  if (ov.lambda2) cfg.loss.lambda2 = *ov.lambda2;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.repeats) cfg.repeats = *ov.repeats;
  if (ov.variant) {
    if (*ov.variant == "c3d") {
      cfg.model.variant = vqa::ModelVariant::kC3D;
    } else if (*ov.variant == "2d") {
      cfg.model.variant = vqa::ModelVariant::kAblation2D;
    } else {
      throw std::runtime_error("--variant must be c3d or 2d");
    }
  }
  cfg.window = cfg.model.patch;
  cfg.validate();
  return cfg;
}

std::shared_ptr<vqa::ModelParams> load_model(const vqa::RunConfig& cfg,
                                             const std::string& checkpoint) {
  auto model = vqa::build_model(cfg.model, cfg.seed);
  vqa::load_checkpoint(checkpoint, model->named_parameters());
  return model;
}

std::vector<std::int64_t> parse_int_list(const std::string& csv, const char* what) {
  std::vector<std::int64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw std::runtime_error(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw std::runtime_error(std::string(what) + ": empty list");
  return out;
}

int cmd_train(const std::string& config_path, const ConfigOverrides& ov) {
  auto cfg = resolve_config(config_path, ov);
  auto manifest = vqa::load_manifest(cfg.manifest);
  auto result = vqa::train_model(cfg, manifest);
  std::cout << "trained " << cfg.epochs << " epochs; best epoch " << result.log.best_epoch
            << " (loss " << result.log.best_loss << ")\n"
            << "checkpoint: " << result.checkpoint_path.string() << "\n"
            << "log:        " << (cfg.output_dir / "train_log.csv").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const ConfigOverrides& ov,
             const std::string& checkpoint) {
  auto cfg = resolve_config(config_path, ov);
  auto manifest = vqa::load_manifest(cfg.manifest);
  auto model = load_model(cfg, checkpoint);
  auto report = vqa::evaluate(cfg, manifest, vqa::make_model_scorer(model, cfg.window));
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    std::cout << "run " << i << " (seed " << report.runs[i].seed
              << "): PLCC=" << report.runs[i].plcc << " SROCC=" << report.runs[i].srocc
              << "\n";
  }
  std::cout << "median: PLCC=" << report.median_plcc << " SROCC=" << report.median_srocc
            << "\n"
            << "report: " << (cfg.output_dir / "eval_report.csv").string() << "\n";
  return 0;
}

int cmd_predict(const std::string& config_path, const ConfigOverrides& ov,
                const std::string& checkpoint, const std::string& ref_path,
                const std::string& dist_path, bool as_json) {
  auto cfg = resolve_config(config_path, ov);
  auto model = load_model(cfg, checkpoint);
  auto ref = vqa::load_raw_video(ref_path);
  auto dist = vqa::load_raw_video(dist_path);
  auto segments = vqa::score_segments(*model, ref, dist, cfg.window);
  double mean = 0.0;
  for (double s : segments) mean += s;
  mean /= static_cast<double>(segments.size());
  if (as_json) {
    nlohmann::json j{{"segments", segments}, {"score", mean}};
    std::cout << j.dump(2) << "\n";
  } else {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      std::cout << "segment " << i << ": " << segments[i] << "\n";
    }
    std::cout << "score: " << mean << "\n";
  }
  return 0;
}

int cmd_gradcheck(bool negative_control) {
  auto rows = vqa::run_gradcheck(negative_control);
  bool all_pass = true;
  std::printf("%-12s %-14s %-10s %s\n", "layer", "max_rel_err", "tolerance", "status");
  for (const auto& r : rows) {
    std::printf("%-12s %-14.3e %-10.0e %s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                r.pass ? "pass" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const ConfigOverrides& ov,
              const std::string& frames_csv) {
  auto cfg = resolve_config(config_path, ov);
  auto manifest = vqa::load_manifest(cfg.manifest);
  auto frame_counts = parse_int_list(frames_csv, "--frames-list");
  auto rows = vqa::sweep_frames(cfg, manifest, frame_counts);
  std::filesystem::create_directories(cfg.output_dir);
  const auto csv = cfg.output_dir / "sweep.csv";
  vqa::save_sweep_csv(csv, rows);
  for (const auto& r : rows) {
    if (r.failed) {
      std::cout << "D=" << r.frames << ": FAILED (" << r.error << ")\n";
    } else {
      std::cout << "D=" << r.frames << ": PLCC=" << r.plcc << " SROCC=" << r.srocc
                << " epoch_seconds=" << r.epoch_seconds << "\n";
    }
  }
  std::cout << "sweep CSV: " << csv.string() << "\n";
  return 0;
}

int cmd_dump_maps(const std::string& config_path, const ConfigOverrides& ov,
                  const std::string& checkpoint, const std::string& ref_path,
                  const std::string& dist_path, const std::string& out_dir,
                  const std::string& frames_csv, std::int64_t segment_index) {
  auto cfg = resolve_config(config_path, ov);
  auto model = load_model(cfg, checkpoint);
  auto ref = vqa::load_raw_video(ref_path);
  auto dist = vqa::load_raw_video(dist_path);
  auto anchors = vqa::sample_eval_segments(dist, cfg.model.frames, cfg.window);
  if (segment_index < 0 || segment_index >= static_cast<std::int64_t>(anchors.size())) {
    throw std::runtime_error("--segment out of range; video has " +
                             std::to_string(anchors.size()) + " segments");
  }
  auto clip = vqa::cut_clip(ref, dist, cfg.model.frames, cfg.window,
                            anchors[static_cast<std::size_t>(segment_index)], 0.0f, "");
  auto frames = parse_int_list(frames_csv, "--frames-index");
  auto written =
      vqa::dump_maps(*model, clip.distorted, clip.residual, out_dir, frames);
  for (const auto& p : written) std::cout << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C3DVQA: full-reference video quality assessment"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, ref_path, dist_path, out_dir;
  std::string frames_list = "15,30,60,120";
  std::string frames_index = "0";
  std::int64_t segment_index = 0;
  bool as_json = false;
  bool negative_control = false;
  ConfigOverrides ov;

  auto* train = app.add_subcommand("train", "Train a model from a config + manifest");
  train->add_option("--config", config_path, "Run config JSON")->required();
  add_override_flags(train, ov);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint over repeated splits");
  eval->add_option("--config", config_path, "Run config JSON")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  add_override_flags(eval, ov);

  auto* predict = app.add_subcommand("predict", "Score one distorted video");
  predict->add_option("--config", config_path, "Run config JSON")->required();
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--ref", ref_path, "Reference raw-Y video")->required();
  predict->add_option("--dist", dist_path, "Distorted raw-Y video")->required();
  predict->add_flag("--json", as_json, "Machine-readable output");
  add_override_flags(predict, ov);

  auto* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference checks for every layer type");
  gradcheck
      ->add_flag("--negative-control", negative_control,
                 "Corrupt one backward result on purpose (harness self-test)")
      ->group("");  // hidden

  auto* sweep = app.add_subcommand("sweep-frames", "Train/eval per segment length");
  sweep->add_option("--config", config_path, "Run config JSON")->required();
  sweep->add_option("--frames-list", frames_list, "Comma-separated segment lengths");
  add_override_flags(sweep, ov);

  auto* dump = app.add_subcommand("dump-maps", "Write response/threshold/masked PGMs");
  dump->add_option("--config", config_path, "Run config JSON")->required();
  dump->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  dump->add_option("--ref", ref_path, "Reference raw-Y video")->required();
  dump->add_option("--dist", dist_path, "Distorted raw-Y video")->required();
  dump->add_option("--out", out_dir, "Output directory")->required();
  dump->add_option("--frames-index", frames_index, "Comma-separated frame indices");
  dump->add_option("--segment", segment_index, "Segment index (eval tiling order)");
  add_override_flags(dump, ov, /*with_out=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, ov);
    if (eval->parsed()) return cmd_eval(config_path, ov, checkpoint);
    if (predict->parsed()) {
      return cmd_predict(config_path, ov, checkpoint, ref_path, dist_path, as_json);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(negative_control);
    if (sweep->parsed()) return cmd_sweep(config_path, ov, frames_list);
    if (dump->parsed()) {
      return cmd_dump_maps(config_path, ov, checkpoint, ref_path, dist_path, out_dir,
                           frames_index, segment_index);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
