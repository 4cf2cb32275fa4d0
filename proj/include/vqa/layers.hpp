#pragma once

#include <cstdint>
#include <vector>

#include "vqa/rng.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

/// 2D convolution layer. Weights are [n_out x n_in x d x d] with d odd;
/// spatial output extent is floor((H + 2*pad - d)/stride) + 1.
struct Conv2DLayer {
  TensorPtr weights;
  TensorPtr bias;
  std::int64_t stride = 1;
  std::int64_t padding = 0;

  Conv2DLayer(std::int64_t n_out, std::int64_t n_in, std::int64_t d,
              std::int64_t stride, std::int64_t padding, Rng& rng);

  std::int64_t out_channels() const { return weights->dim(0); }
  std::int64_t in_channels() const { return weights->dim(1); }
  std::int64_t kernel() const { return weights->dim(2); }
};

/// 3D convolution layer, fixed stride 1 and padding (1,1,1): with a 3x3x3
/// kernel the temporal and spatial extents pass through unchanged. Weights
/// are [n_out x n_in x t x d x d].
struct Conv3DLayer {
  TensorPtr weights;
  TensorPtr bias;
  static constexpr std::int64_t stride = 1;
  static constexpr std::int64_t padding = 1;

  Conv3DLayer(std::int64_t n_out, std::int64_t n_in, std::int64_t t, std::int64_t d,
              Rng& rng);

  std::int64_t out_channels() const { return weights->dim(0); }
  std::int64_t in_channels() const { return weights->dim(1); }
  std::int64_t kernel_t() const { return weights->dim(2); }
  std::int64_t kernel_d() const { return weights->dim(3); }
};

/// Fully connected layer, weights [out x in], y = x . W^T + b for a batch of
/// row vectors x [N x in].
struct FCLayer {
  TensorPtr weights;
  TensorPtr bias;

  FCLayer(std::int64_t out, std::int64_t in, Rng& rng);

  std::int64_t out_features() const { return weights->dim(0); }
  std::int64_t in_features() const { return weights->dim(1); }
};

/// Input is [C x H x W] or [B x C x H x W].
TensorPtr conv2d_forward(const TensorPtr& input, const Conv2DLayer& layer,
                         Tape* tape = nullptr);

/// Input is [C x D x H x W] or [B x C x D x H x W].
TensorPtr conv3d_forward(const TensorPtr& input, const Conv3DLayer& layer,
                         Tape* tape = nullptr);

TensorPtr fc_forward(const TensorPtr& input, const FCLayer& layer, Tape* tape = nullptr);

enum class PoolAxes {
  kSpatialOnly,     // [C,D,H,W] -> [C,D]  ([B,...] keeps the batch axis)
  kSpatioTemporal,  // [C,D,H,W] -> [C]
};

/// Global average pooling over the trailing spatial (and optionally temporal)
/// axes of a rank-4 [C,D,H,W] or rank-5 [B,C,D,H,W] tensor.
TensorPtr global_avg_pool(const TensorPtr& input, PoolAxes axes, Tape* tape = nullptr);

/// Non-overlapping k x k average pooling over the two trailing axes.
/// Extents must divide evenly by k.
TensorPtr avg_pool_spatial(const TensorPtr& input, std::int64_t k, Tape* tape = nullptr);

/// Hyper-parameters of the training objective:
///   lambda1 * mean_n ||pred_n - y_n||^2 + lambda2 * sum of squared weights.
struct LossHyperParams {
  double lambda1 = 1.0;
  double lambda2 = 1e-4;
};

/// Builds the objective above on the tape. `weights` are the tensors subject
/// to L2 regularization (convolution and FC weights; biases excluded).
TensorPtr eq1_loss(const std::vector<TensorPtr>& preds, const std::vector<float>& labels,
                   const std::vector<TensorPtr>& weights, const LossHyperParams& h,
                   Tape* tape);

/// Output spatial extent of a convolution along one axis.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, std::int64_t pad,
                             std::int64_t stride);

}  // namespace vqa
