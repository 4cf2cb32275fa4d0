#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vqa/checkpoint.hpp"
#include "vqa/layers.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

enum class ModelVariant {
  kC3D,         // 3D trunk learning the spatiotemporal threshold
  kAblation2D,  // per-frame 2D trunk, video score = mean of frame scores
};

/// Network geometry. The FC head's first layer is tied to the segment length
/// D (spatial pooling leaves a per-frame vector), so a model is built for one
/// segment length.
struct ModelConfig {
  std::int64_t frames = 60;   // D
  std::int64_t patch = 112;   // H = W, divisible by 4
  std::int64_t branch_channels = 16;
  std::vector<std::int64_t> trunk_channels = {64, 64, 32, 1};
  std::int64_t fc_hidden = 64;
  ModelVariant variant = ModelVariant::kC3D;

  void validate() const;
};

/// All learnable weights: two independent 2D branches, the trunk (3D, or 2D
/// for the ablation variant), and the FC regression head.
struct ModelParams {
  ModelConfig config;

  std::vector<Conv2DLayer> distorted_branch;  // 2 layers, stride 2, pad 1
  std::vector<Conv2DLayer> residual_branch;
  std::vector<Conv3DLayer> trunk3d;           // C3D variant
  std::vector<Conv2DLayer> trunk2d;           // ablation variant
  FCLayer fc1;
  FCLayer fc2;

  ModelParams(const ModelConfig& cfg, Rng& rng);

  /// Every learnable tensor in checkpoint order.
  NamedTensors named_parameters() const;
  std::vector<TensorPtr> parameters() const;
  /// Convolution and FC weight tensors (biases excluded) for L2 regularization.
  std::vector<TensorPtr> weight_tensors() const;
  std::int64_t parameter_count() const;
};

/// Everything one forward pass produces. `threshold` is the sigmoid-bounded
/// distortion-visibility map, `masked` the pooled |residual| gated by it.
struct ForwardResult {
  TensorPtr score;              // rank-0
  TensorPtr threshold;          // [1,D,H/4,W/4] (C3D) or [D,1,H/4,W/4] (2D)
  TensorPtr masked;             // same shape as threshold
  TensorPtr distorted_features; // branch output, [D,16,H/4,W/4]
  TensorPtr residual_features;
};

/// Full pipeline on one clip: branches -> concat -> trunk -> sigmoid ->
/// residual masking -> pooling -> FC regression. Inputs are [1,D,H,W];
/// distorted in [0,1], residual in [-1,1]. Dispatches on config.variant.
ForwardResult forward(const ModelParams& params, const TensorPtr& distorted,
                      const TensorPtr& residual, Tape* tape = nullptr);

/// The masking stage on its own: 4x4 average pooling of |residual| times the
/// threshold map. Exposed so the gain property is testable with a fixed
/// threshold.
TensorPtr mask_residual(const TensorPtr& residual, const TensorPtr& threshold,
                        Tape* tape = nullptr);

/// Builds freshly initialized parameters; deterministic for a given seed.
std::shared_ptr<ModelParams> build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Grayscale dumps of branch responses (channel means), the threshold map and
/// the masked residual for the given frames, as normalized binary PGM files.
/// Returns the written paths.
std::vector<std::filesystem::path> dump_maps(const ModelParams& params,
                                             const TensorPtr& distorted,
                                             const TensorPtr& residual,
                                             const std::filesystem::path& out_dir,
                                             const std::vector<std::int64_t>& frames);

}  // namespace vqa
