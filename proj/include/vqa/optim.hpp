#pragma once

#include <cstdint>
#include <vector>

#include "vqa/tensor.hpp"

namespace vqa {

/// Adam with bias correction over a fixed list of parameters. Moment buffers
/// are congruent to their parameters; the step counter increases by one per
/// step() call. step() consumes and clears the gradients.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<TensorPtr> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  /// One update. Throws if any parameter has no populated gradient.
  void step();
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t step_count() const { return step_count_; }
  const std::vector<TensorPtr>& params() const { return params_; }

 private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  double lr_;
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
};

/// Multiplies the learning rate by `factor` once the loss has gone `patience`
/// consecutive epochs without a strict improvement (1e-6 relative tolerance)
/// over the best seen so far. The rate never increases.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(double factor = 0.9, int patience = 5)
      : factor_(factor), patience_(patience) {}

  /// Feed one epoch loss; returns the possibly-decayed learning rate.
  /// Non-finite losses throw (divergence is the caller's problem).
  double update(double epoch_loss, double current_lr);

  double best_loss() const { return best_; }
  int stagnation() const { return stagnation_; }

 private:
  double factor_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int stagnation_ = 0;
};

}  // namespace vqa
