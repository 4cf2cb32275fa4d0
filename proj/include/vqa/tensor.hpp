#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vqa/rng.hpp"

namespace vqa {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;
using Shape = std::vector<std::int64_t>;

/// Dense row-major N-dimensional float tensor. Storage is 32-bit; reductions
/// and inner products accumulate in 64-bit before rounding back to storage
/// precision. The shape is fixed at construction. An optional gradient buffer
/// of the same length is allocated lazily on first accumulation.
class Tensor : public std::enable_shared_from_this<Tensor> {
 public:
  static TensorPtr full(Shape shape, float value, bool requires_grad = false);
  static TensorPtr zeros(Shape shape, bool requires_grad = false);
  static TensorPtr scalar(float value, bool requires_grad = false);
  static TensorPtr from_data(Shape shape, std::vector<float> data,
                             bool requires_grad = false);
  static TensorPtr uniform(Shape shape, float lo, float hi, Rng& rng,
                           bool requires_grad = false);
  static TensorPtr gaussian(Shape shape, double mean, double stddev, Rng& rng,
                            bool requires_grad = false);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t dim(std::size_t axis) const { return shape_[axis]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* data_ptr() { return data_.data(); }
  const float* data_ptr() const { return data_.data(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  /// Gradient buffer, or empty span if nothing has been accumulated yet.
  std::span<float> grad() { return grad_; }
  std::span<const float> grad() const { return grad_; }
  bool has_grad() const { return !grad_.empty(); }

  /// Allocates (zero-filled) the gradient buffer if absent.
  std::vector<float>& ensure_grad();
  /// Zeroes the gradient buffer if allocated; keeps it absent otherwise.
  void zero_grad();
  /// Drops the gradient buffer entirely.
  void clear_grad();

  void accumulate_grad(std::span<const float> g);
  void accumulate_grad(std::span<const double> g);

  /// Value of a single-element tensor.
  float item() const;

  /// Number of elements a shape spans; throws on negative extents or on
  /// overflow of the flat index space.
  static std::int64_t checked_numel(const Shape& shape);

 private:
  Tensor() = default;

  Shape shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
  bool requires_grad_ = false;
};

/// Records the operations of one forward pass in execution order (which is a
/// topological order by construction: an operation's inputs always exist
/// before it runs). backward() replays the records once, in reverse.
class Tape {
 public:
  /// Appends a record. `fn` propagates output->grad into the inputs' grads.
  void record(TensorPtr output, std::vector<TensorPtr> inputs,
              std::function<void()> fn);

  /// Reverse-mode sweep from `loss` (a rank-0 tensor recorded on this tape).
  /// Seeds d(loss)/d(loss) = 1 and visits each record at most once, in
  /// reverse order. Gradients accumulate additively across fan-out.
  void backward(const TensorPtr& loss);

  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  void clear() { ops_.clear(); }

 private:
  struct Record {
    TensorPtr output;
    std::vector<TensorPtr> inputs;
    std::function<void()> fn;
  };
  std::vector<Record> ops_;
};

/// Free-function spelling of the reverse sweep.
void backward(const TensorPtr& loss, Tape& tape);

// --- Elementwise operations -------------------------------------------------
//
// Binary ops require identical shapes; the one sanctioned broadcast is a
// rank-0 tensor against any shape. Passing tape == nullptr runs the op
// without recording (inference mode).

TensorPtr add(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr);
TensorPtr mul(const TensorPtr& a, float s, Tape* tape = nullptr);
TensorPtr relu(const TensorPtr& a, Tape* tape = nullptr);
TensorPtr sigmoid(const TensorPtr& a, Tape* tape = nullptr);
TensorPtr abs(const TensorPtr& a, Tape* tape = nullptr);

// --- Matrix product ----------------------------------------------------------

/// [m x k] . [k x n] -> [m x n]; both operands rank-2.
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b, Tape* tape = nullptr);

// --- Reductions ---------------------------------------------------------------

/// Sum/mean over `axes` (distinct, valid). Reduced extents are removed unless
/// `keepdims`, in which case they stay as size 1. Accumulates in 64-bit.
TensorPtr reduce_sum(const TensorPtr& a, std::vector<std::int64_t> axes,
                     bool keepdims = false, Tape* tape = nullptr);
TensorPtr reduce_mean(const TensorPtr& a, std::vector<std::int64_t> axes,
                      bool keepdims = false, Tape* tape = nullptr);
/// Full reduction to a rank-0 scalar.
TensorPtr reduce_sum_all(const TensorPtr& a, Tape* tape = nullptr);
TensorPtr reduce_mean_all(const TensorPtr& a, Tape* tape = nullptr);

// --- Layout ------------------------------------------------------------------

/// Copies into a new tensor with the same flat element order.
TensorPtr reshape(const TensorPtr& a, Shape new_shape, Tape* tape = nullptr);
/// Axis permutation: out[idx[perm[0]], idx[perm[1]], ...] = in[idx].
TensorPtr permute(const TensorPtr& a, std::vector<std::size_t> perm,
                  Tape* tape = nullptr);
/// Concatenation of two tensors along `axis`; all other extents must agree.
TensorPtr concat(const TensorPtr& a, const TensorPtr& b, std::int64_t axis,
                 Tape* tape = nullptr);

}  // namespace vqa
