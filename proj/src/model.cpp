#include "vqa/model.hpp"

#include <cstdio>
#include <stdexcept>
#include <string>

#include "vqa/pgm.hpp"

namespace vqa {

void ModelConfig::validate() const {
  if (frames < 1) throw std::invalid_argument("model config: frames must be >= 1");
  if (patch < 4 || patch % 4 != 0) {
    throw std::invalid_argument("model config: patch extent must be divisible by 4");
  }
  if (branch_channels < 1) {
    throw std::invalid_argument("model config: branch channels must be >= 1");
  }
  if (trunk_channels.empty() || trunk_channels.back() != 1) {
    throw std::invalid_argument("model config: trunk channels must end in 1");
  }
  for (std::int64_t c : trunk_channels) {
    if (c < 1) throw std::invalid_argument("model config: trunk channels must be >= 1");
  }
  if (fc_hidden < 1) throw std::invalid_argument("model config: fc hidden must be >= 1");
}

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

ModelParams::ModelParams(const ModelConfig& cfg, Rng& rng)
    : config(validated(cfg)),
      fc1(cfg.fc_hidden, cfg.variant == ModelVariant::kC3D ? cfg.frames : 1, rng),
      fc2(1, cfg.fc_hidden, rng) {
  // Branches: two 3x3 stride-2 pad-1 layers, 1 -> N -> N channels.
  const std::int64_t bc = cfg.branch_channels;
  distorted_branch.emplace_back(bc, 1, 3, 2, 1, rng);
  distorted_branch.emplace_back(bc, bc, 3, 2, 1, rng);
  residual_branch.emplace_back(bc, 1, 3, 2, 1, rng);
  residual_branch.emplace_back(bc, bc, 3, 2, 1, rng);
  // Trunk: concatenated branches in, channel chain per config.
  std::int64_t in_ch = 2 * bc;
  for (std::int64_t out_ch : cfg.trunk_channels) {
    if (cfg.variant == ModelVariant::kC3D) {
      trunk3d.emplace_back(out_ch, in_ch, 3, 3, rng);
    } else {
      trunk2d.emplace_back(out_ch, in_ch, 3, 1, 1, rng);
    }
    in_ch = out_ch;
  }
}

NamedTensors ModelParams::named_parameters() const {
  NamedTensors out;
  auto push_conv2d = [&out](const std::string& prefix, const Conv2DLayer& l) {
    out.emplace_back(prefix + ".weight", l.weights);
    out.emplace_back(prefix + ".bias", l.bias);
  };
  for (std::size_t i = 0; i < distorted_branch.size(); ++i) {
    push_conv2d("distorted_branch." + std::to_string(i), distorted_branch[i]);
  }
  for (std::size_t i = 0; i < residual_branch.size(); ++i) {
    push_conv2d("residual_branch." + std::to_string(i), residual_branch[i]);
  }
  for (std::size_t i = 0; i < trunk3d.size(); ++i) {
    out.emplace_back("trunk." + std::to_string(i) + ".weight", trunk3d[i].weights);
    out.emplace_back("trunk." + std::to_string(i) + ".bias", trunk3d[i].bias);
  }
  for (std::size_t i = 0; i < trunk2d.size(); ++i) {
    push_conv2d("trunk." + std::to_string(i), trunk2d[i]);
  }
  out.emplace_back("fc1.weight", fc1.weights);
  out.emplace_back("fc1.bias", fc1.bias);
  out.emplace_back("fc2.weight", fc2.weights);
  out.emplace_back("fc2.bias", fc2.bias);
  return out;
}

std::vector<TensorPtr> ModelParams::parameters() const {
  std::vector<TensorPtr> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<TensorPtr> ModelParams::weight_tensors() const {
  std::vector<TensorPtr> out;
  for (const auto& [name, t] : named_parameters()) {
    if (name.ends_with(".weight")) out.push_back(t);
  }
  return out;
}

std::int64_t ModelParams::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& t : parameters()) n += t->numel();
  return n;
}

std::shared_ptr<ModelParams> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return std::make_shared<ModelParams>(cfg, rng);
}

namespace {

void check_clip_inputs(const ModelParams& params, const TensorPtr& distorted,
                       const TensorPtr& residual) {
  const auto& cfg = params.config;
  const Shape want{1, cfg.frames, cfg.patch, cfg.patch};
  if (distorted->shape() != want || residual->shape() != want) {
    throw std::invalid_argument(
        "forward: clip must be [1," + std::to_string(cfg.frames) + "," +
        std::to_string(cfg.patch) + "," + std::to_string(cfg.patch) + "]");
  }
}

// Both branch stacks share this: frames as batch, two stride-2 convs + ReLU.
TensorPtr run_branch(const std::vector<Conv2DLayer>& branch, const TensorPtr& clip,
                     Tape* tape) {
  const std::int64_t d = clip->dim(1);
  const std::int64_t h = clip->dim(2);
  const std::int64_t w = clip->dim(3);
  auto x = reshape(clip, {d, 1, h, w}, tape);  // C=1, so this is a pure relabel
  x = relu(conv2d_forward(x, branch[0], tape), tape);
  x = relu(conv2d_forward(x, branch[1], tape), tape);
  return x;  // [D, 16, H/4, W/4]
}

}  // namespace

TensorPtr mask_residual(const TensorPtr& residual, const TensorPtr& threshold,
                        Tape* tape) {
  if (residual->rank() != 4 || threshold->rank() != 4) {
    throw std::invalid_argument("mask_residual: rank-4 inputs expected");
  }
  auto pooled = avg_pool_spatial(abs(residual, tape), 4, tape);
  if (pooled->shape() != threshold->shape()) {
    throw std::invalid_argument("mask_residual: threshold shape does not match pooled residual");
  }
  return mul(pooled, threshold, tape);
}

ForwardResult forward(const ModelParams& params, const TensorPtr& distorted,
                      const TensorPtr& residual, Tape* tape) {
  check_clip_inputs(params, distorted, residual);
  const auto& cfg = params.config;
  const std::int64_t d = cfg.frames;
  const std::int64_t h = cfg.patch / 4;
  const std::int64_t w = cfg.patch / 4;

  ForwardResult res;
  res.distorted_features = run_branch(params.distorted_branch, distorted, tape);
  res.residual_features = run_branch(params.residual_branch, residual, tape);

  if (cfg.variant == ModelVariant::kC3D) {
    // [D,16,h,w] -> [16,D,h,w], concatenate to 32 channels.
    auto fd = permute(res.distorted_features, {1, 0, 2, 3}, tape);
    auto fr = permute(res.residual_features, {1, 0, 2, 3}, tape);
    auto x = concat(fd, fr, 0, tape);  // [32, D, h, w]
    const std::size_t n = params.trunk3d.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      x = relu(conv3d_forward(x, params.trunk3d[i], tape), tape);
    }
    x = conv3d_forward(x, params.trunk3d[n - 1], tape);
    res.threshold = sigmoid(x, tape);  // [1, D, h, w]

    res.masked = mask_residual(residual, res.threshold, tape);
    auto pooled = global_avg_pool(res.masked, PoolAxes::kSpatialOnly, tape);  // [1, D]
    auto hdn = relu(fc_forward(pooled, params.fc1, tape), tape);
    auto score = fc_forward(hdn, params.fc2, tape);  // [1,1]
    res.score = reshape(score, {}, tape);
  } else {
    // Per-frame 2D trunk; the temporal axis stays the batch axis throughout.
    auto x = concat(res.distorted_features, res.residual_features, 1, tape);  // [D,32,h,w]
    const std::size_t n = params.trunk2d.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      x = relu(conv2d_forward(x, params.trunk2d[i], tape), tape);
    }
    x = conv2d_forward(x, params.trunk2d[n - 1], tape);
    res.threshold = sigmoid(x, tape);  // [D, 1, h, w]

    auto res_frames = reshape(residual, {d, 1, cfg.patch, cfg.patch}, tape);
    res.masked = mask_residual(res_frames, res.threshold, tape);
    auto pooled = global_avg_pool(res.masked, PoolAxes::kSpatialOnly, tape);  // [D, 1]
    auto hdn = relu(fc_forward(pooled, params.fc1, tape), tape);
    auto frame_scores = fc_forward(hdn, params.fc2, tape);  // [D, 1]
    res.score = reduce_mean_all(frame_scores, tape);
  }
  (void)d;
  (void)h;
  (void)w;
  return res;
}

namespace {

// Channel-mean of one frame of a [D,C,h,w] feature block.
std::vector<float> frame_channel_mean(const TensorPtr& features, std::int64_t frame) {
  const std::int64_t c = features->dim(1);
  const std::int64_t h = features->dim(2);
  const std::int64_t w = features->dim(3);
  std::vector<float> img(static_cast<std::size_t>(h * w), 0.0f);
  const float* p = features->data_ptr() + frame * c * h * w;
  for (std::int64_t i = 0; i < h * w; ++i) {
    double acc = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch) acc += static_cast<double>(p[ch * h * w + i]);
    img[static_cast<std::size_t>(i)] = static_cast<float>(acc / static_cast<double>(c));
  }
  return img;
}

// One frame of the threshold/masked maps in either variant layout.
std::vector<float> map_frame(const TensorPtr& map, ModelVariant variant,
                             std::int64_t frame) {
  const std::int64_t h = map->dim(2);
  const std::int64_t w = map->dim(3);
  const float* p = map->data_ptr();
  // C3D: [1,D,h,w], frame-major inside; ablation: [D,1,h,w], same stride.
  (void)variant;
  p += frame * h * w;
  return std::vector<float>(p, p + h * w);
}

}  // namespace

std::vector<std::filesystem::path> dump_maps(const ModelParams& params,
                                             const TensorPtr& distorted,
                                             const TensorPtr& residual,
                                             const std::filesystem::path& out_dir,
                                             const std::vector<std::int64_t>& frames) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("dump_maps: cannot create " + out_dir.string());

  auto res = forward(params, distorted, residual, nullptr);
  const std::int64_t h = res.threshold->dim(2);
  const std::int64_t w = res.threshold->dim(3);

  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& stem, std::int64_t frame, std::span<const float> img) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_f%04lld.pgm", stem.c_str(),
                  static_cast<long long>(frame));
    auto path = out_dir / name;
    write_pgm_normalized(path, img, w, h);
    written.push_back(path);
  };
  for (std::int64_t f : frames) {
    if (f < 0 || f >= params.config.frames) {
      throw std::invalid_argument("dump_maps: frame index out of range");
    }
    auto d_img = frame_channel_mean(res.distorted_features, f);
    auto r_img = frame_channel_mean(res.residual_features, f);
    auto t_img = map_frame(res.threshold, params.config.variant, f);
    auto m_img = map_frame(res.masked, params.config.variant, f);
    emit("distorted_response", f, d_img);
    emit("residual_response", f, r_img);
    emit("threshold", f, t_img);
    emit("masked_residual", f, m_img);
  }
  return written;
}

}  // namespace vqa
