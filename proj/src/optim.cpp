#include "vqa/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vqa {

AdamOptimizer::AdamOptimizer(std::vector<TensorPtr> params, double lr, double beta1,
                             double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p->numel()), 0.0f);
    v_.emplace_back(static_cast<std::size_t>(p->numel()), 0.0f);
  }
}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i]->has_grad()) {
      throw std::runtime_error("adam: parameter " + std::to_string(i) +
                               " has no gradient");
    }
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(beta1_, t);
  const double bc2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto data = params_[i]->data();
    auto grad = params_[i]->grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad[j];
      const double mj = beta1_ * m[j] + (1.0 - beta1_) * g;
      const double vj = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      data[j] = static_cast<float>(data[j] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
  zero_grad();
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) p->clear_grad();
}

double PlateauScheduler::update(double epoch_loss, double current_lr) {
  if (!std::isfinite(epoch_loss)) {
    throw std::runtime_error("plateau scheduler: non-finite epoch loss");
  }
  const double improvement_bar =
      std::isinf(best_) ? best_ : best_ - 1e-6 * std::fabs(best_);
  if (epoch_loss < improvement_bar || std::isinf(best_)) {
    best_ = epoch_loss;
    stagnation_ = 0;
    return current_lr;
  }
  ++stagnation_;
  if (stagnation_ >= patience_) {
    stagnation_ = 0;
    return current_lr * factor_;
  }
  return current_lr;
}

}  // namespace vqa
