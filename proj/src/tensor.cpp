#include "vqa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace vqa {

namespace {

// Largest flat length we allow; keeps index arithmetic well inside int64.
constexpr std::int64_t kMaxElements = std::int64_t{1} << 40;

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * shape[i];
  }
  return strides;
}

bool is_scalar(const TensorPtr& t) { return t->rank() == 0; }

}  // namespace

std::int64_t Tensor::checked_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) {
    if (e < 0) throw std::invalid_argument("tensor extent must be non-negative");
    if (e != 0 && n > kMaxElements / std::max<std::int64_t>(e, 1)) {
      throw std::invalid_argument("tensor shape overflows the flat index space");
    }
    n *= e;
  }
  return n;
}

TensorPtr Tensor::full(Shape shape, float value, bool requires_grad) {
  auto t = TensorPtr(new Tensor());
  std::int64_t n = checked_numel(shape);
  t->shape_ = std::move(shape);
  t->data_.assign(static_cast<std::size_t>(n), value);
  t->requires_grad_ = requires_grad;
  return t;
}

TensorPtr Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

TensorPtr Tensor::scalar(float value, bool requires_grad) {
  return full({}, value, requires_grad);
}

TensorPtr Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  std::int64_t n = checked_numel(shape);
  if (n != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("from_data: " + std::to_string(data.size()) +
                                " values for shape " + shape_str(shape));
  }
  auto t = TensorPtr(new Tensor());
  t->shape_ = std::move(shape);
  t->data_ = std::move(data);
  t->requires_grad_ = requires_grad;
  return t;
}

TensorPtr Tensor::uniform(Shape shape, float lo, float hi, Rng& rng, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (float& v : t->data_) v = rng.uniform_float(lo, hi);
  return t;
}

TensorPtr Tensor::gaussian(Shape shape, double mean, double stddev, Rng& rng,
                           bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (float& v : t->data_) v = static_cast<float>(rng.gaussian(mean, stddev));
  return t;
}

std::vector<float>& Tensor::ensure_grad() {
  if (grad_.empty() && !data_.empty()) grad_.assign(data_.size(), 0.0f);
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0f); }

void Tensor::clear_grad() {
  grad_.clear();
  grad_.shrink_to_fit();
}

void Tensor::accumulate_grad(std::span<const float> g) {
  if (static_cast<std::int64_t>(g.size()) != numel()) {
    throw std::invalid_argument("gradient length does not match tensor");
  }
  auto& dst = ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

void Tensor::accumulate_grad(std::span<const double> g) {
  if (static_cast<std::int64_t>(g.size()) != numel()) {
    throw std::invalid_argument("gradient length does not match tensor");
  }
  auto& dst = ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<float>(g[i]);
}

float Tensor::item() const {
  if (numel() != 1) {
    throw std::runtime_error("item(): tensor has " + std::to_string(numel()) +
                             " elements");
  }
  return data_[0];
}

// --- Tape ---------------------------------------------------------------------

void Tape::record(TensorPtr output, std::vector<TensorPtr> inputs,
                  std::function<void()> fn) {
  ops_.push_back({std::move(output), std::move(inputs), std::move(fn)});
}

void Tape::backward(const TensorPtr& loss) {
  if (!loss) throw std::invalid_argument("backward: null loss");
  if (loss->rank() != 0) {
    throw std::invalid_argument("backward: loss must be rank-0, got shape of rank " +
                                std::to_string(loss->rank()));
  }
  // The loss must be the output of some recorded operation; search from the
  // end since it is normally the most recent record.
  std::size_t loss_index = ops_.size();
  for (std::size_t i = ops_.size(); i-- > 0;) {
    if (ops_[i].output.get() == loss.get()) {
      loss_index = i;
      break;
    }
  }
  if (loss_index == ops_.size()) {
    throw std::runtime_error("backward: loss is not recorded on this tape");
  }
  loss->ensure_grad();
  loss->grad()[0] += 1.0f;
  for (std::size_t i = loss_index + 1; i-- > 0;) {
    ops_[i].fn();
  }
}

void backward(const TensorPtr& loss, Tape& tape) { tape.backward(loss); }

// --- Op helpers ----------------------------------------------------------------

namespace {

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape() != b->shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->shape()) + " vs " + shape_str(b->shape()));
  }
}

TensorPtr make_output(Shape shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

// Shared skeleton for same-shape binary ops with the rank-0 broadcast special
// case. fwd(a, b) -> out; bwd_a / bwd_b map (gout, a, b) to the input grads.
template <typename Fwd, typename BwdA, typename BwdB>
TensorPtr binary_op(const char* name, const TensorPtr& a, const TensorPtr& b,
                    Tape* tape, Fwd fwd, BwdA bwd_a, BwdB bwd_b) {
  const bool a_scalar = is_scalar(a);
  const bool b_scalar = is_scalar(b);
  if (!a_scalar && !b_scalar) check_same_shape(a, b, name);
  const Shape& out_shape = a_scalar ? b->shape() : a->shape();

  bool rg = a->requires_grad() || b->requires_grad();
  auto out = make_output(out_shape, rg);
  const float* pa = a->data_ptr();
  const float* pb = b->data_ptr();
  float* po = out->data_ptr();
  const std::int64_t n = out->numel();
  const std::int64_t sa = a_scalar && !b_scalar ? 0 : 1;
  const std::int64_t sb = b_scalar && !a_scalar ? 0 : 1;
  for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i * sa], pb[i * sb]);

  if (tape && rg) {
    tape->record(out, {a, b}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      if (a->requires_grad()) {
        if (sa == 0) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < n; ++i)
            acc += static_cast<double>(bwd_a(gout[i], pa[0], pb[i * sb]));
          const double g = acc;
          a->accumulate_grad(std::span<const double>(&g, 1));
        } else {
          auto& ga = a->ensure_grad();
          for (std::int64_t i = 0; i < n; ++i) ga[i] += bwd_a(gout[i], pa[i], pb[i * sb]);
        }
      }
      if (b->requires_grad()) {
        if (sb == 0) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < n; ++i)
            acc += static_cast<double>(bwd_b(gout[i], pa[i * sa], pb[0]));
          const double g = acc;
          b->accumulate_grad(std::span<const double>(&g, 1));
        } else {
          auto& gb = b->ensure_grad();
          for (std::int64_t i = 0; i < n; ++i) gb[i] += bwd_b(gout[i], pa[i * sa], pb[i]);
        }
      }
    });
  }
  return out;
}

template <typename Fwd, typename Bwd>
TensorPtr unary_op(const TensorPtr& a, Tape* tape, Fwd fwd, Bwd bwd) {
  auto out = make_output(a->shape(), a->requires_grad());
  const float* pa = a->data_ptr();
  float* po = out->data_ptr();
  const std::int64_t n = out->numel();
  for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);

  if (tape && a->requires_grad()) {
    tape->record(out, {a}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      auto& ga = a->ensure_grad();
      const float* py = out->data_ptr();
      for (std::int64_t i = 0; i < n; ++i) ga[i] += bwd(gout[i], pa[i], py[i]);
    });
  }
  return out;
}

}  // namespace

// --- Elementwise ----------------------------------------------------------------

TensorPtr add(const TensorPtr& a, const TensorPtr& b, Tape* tape) {
  return binary_op(
      "add", a, b, tape, [](float x, float y) { return x + y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b, Tape* tape) {
  return binary_op(
      "sub", a, b, tape, [](float x, float y) { return x - y; },
      [](float g, float, float) { return g; }, [](float g, float, float) { return -g; });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b, Tape* tape) {
  return binary_op(
      "mul", a, b, tape, [](float x, float y) { return x * y; },
      [](float g, float, float y) { return g * y; },
      [](float g, float x, float) { return g * x; });
}

TensorPtr mul(const TensorPtr& a, float s, Tape* tape) {
  return mul(a, Tensor::scalar(s), tape);
}

TensorPtr relu(const TensorPtr& a, Tape* tape) {
  return unary_op(
      a, tape, [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float g, float x, float) { return x > 0.0f ? g : 0.0f; });
}

namespace {

// Numerically stable logistic kept strictly inside (0,1): the largest float
// below 1 is 1 - 2^-24, so saturated activations clamp to that bound and its
// mirror image.
inline float sigmoid_scalar(float x) {
  float s;
  if (x >= 0.0f) {
    s = 1.0f / (1.0f + std::exp(-x));
  } else {
    const float e = std::exp(x);
    s = e / (1.0f + e);
  }
  constexpr float lo = 0x1.0p-24f;
  constexpr float hi = 1.0f - 0x1.0p-24f;
  return std::min(std::max(s, lo), hi);
}

}  // namespace

TensorPtr sigmoid(const TensorPtr& a, Tape* tape) {
  return unary_op(
      a, tape, [](float x) { return sigmoid_scalar(x); },
      [](float g, float, float y) { return g * y * (1.0f - y); });
}

TensorPtr abs(const TensorPtr& a, Tape* tape) {
  return unary_op(
      a, tape, [](float x) { return std::fabs(x); },
      [](float g, float x, float) { return x > 0.0f ? g : (x < 0.0f ? -g : 0.0f); });
}

// --- Matmul ---------------------------------------------------------------------

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b, Tape* tape) {
  if (a->rank() != 2 || b->rank() != 2) {
    throw std::invalid_argument("matmul: operands must be rank-2");
  }
  const std::int64_t m = a->dim(0), k = a->dim(1);
  const std::int64_t k2 = b->dim(0), n = b->dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul: inner extents disagree (" + std::to_string(k) +
                                " vs " + std::to_string(k2) + ")");
  }
  bool rg = a->requires_grad() || b->requires_grad();
  auto out = make_output({m, n}, rg);
  const float* pa = a->data_ptr();
  const float* pb = b->data_ptr();
  float* po = out->data_ptr();
  {
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < m; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t l = 0; l < k; ++l) {
        const double av = pa[i * k + l];
        const float* brow = pb + l * n;
        for (std::int64_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
      }
      for (std::int64_t j = 0; j < n; ++j) po[i * n + j] = static_cast<float>(acc[j]);
    }
  }

  if (tape && rg) {
    tape->record(out, {a, b}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      const float* pg = gout.data();
      if (a->requires_grad()) {
        // dA = dC . B^T
        std::vector<double> da(static_cast<std::size_t>(m * k), 0.0);
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t j = 0; j < n; ++j) {
            const double gv = pg[i * n + j];
            const float* brow = pb + j;  // column j of B, stride n
            for (std::int64_t l = 0; l < k; ++l)
              da[i * k + l] += gv * static_cast<double>(brow[l * n]);
          }
        }
        a->accumulate_grad(std::span<const double>(da));
      }
      if (b->requires_grad()) {
        // dB = A^T . dC
        std::vector<double> db(static_cast<std::size_t>(k * n), 0.0);
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t l = 0; l < k; ++l) {
            const double av = pa[i * k + l];
            const float* grow = pg + i * n;
            for (std::int64_t j = 0; j < n; ++j)
              db[l * n + j] += av * static_cast<double>(grow[j]);
          }
        }
        b->accumulate_grad(std::span<const double>(db));
      }
    });
  }
  return out;
}

// --- Reductions -------------------------------------------------------------------

namespace {

struct ReducePlan {
  Shape out_shape;          // with keepdims applied
  Shape reduced_mask;       // 1 where axis reduced
  std::int64_t count = 1;   // elements folded into each output slot
};

ReducePlan plan_reduce(const TensorPtr& a, std::vector<std::int64_t>& axes, bool keepdims) {
  const std::int64_t r = static_cast<std::int64_t>(a->rank());
  ReducePlan plan;
  plan.reduced_mask.assign(static_cast<std::size_t>(r), 0);
  for (std::int64_t ax : axes) {
    if (ax < 0 || ax >= r) {
      throw std::invalid_argument("reduce: axis " + std::to_string(ax) +
                                  " out of range for rank " + std::to_string(r));
    }
    if (plan.reduced_mask[static_cast<std::size_t>(ax)]) {
      throw std::invalid_argument("reduce: duplicate axis " + std::to_string(ax));
    }
    plan.reduced_mask[static_cast<std::size_t>(ax)] = 1;
    plan.count *= a->dim(static_cast<std::size_t>(ax));
  }
  for (std::int64_t i = 0; i < r; ++i) {
    if (!plan.reduced_mask[static_cast<std::size_t>(i)]) {
      plan.out_shape.push_back(a->dim(static_cast<std::size_t>(i)));
    } else if (keepdims) {
      plan.out_shape.push_back(1);
    }
  }
  return plan;
}

// Flat input index -> flat output index map for a reduction.
std::vector<std::int64_t> reduce_index_map(const TensorPtr& a, const Shape& mask,
                                           const Shape& out_shape_nokeep) {
  const Shape in_strides = row_major_strides(a->shape());
  const Shape out_strides = row_major_strides(out_shape_nokeep);
  std::vector<std::int64_t> map(static_cast<std::size_t>(a->numel()));
  const std::size_t r = a->rank();
  Shape idx(r, 0);
  for (std::int64_t flat = 0; flat < a->numel(); ++flat) {
    std::int64_t out_flat = 0;
    std::size_t oax = 0;
    for (std::size_t d = 0; d < r; ++d) {
      if (!mask[d]) {
        out_flat += idx[d] * out_strides[oax];
        ++oax;
      }
    }
    map[static_cast<std::size_t>(flat)] = out_flat;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < a->dim(d)) break;
      idx[d] = 0;
    }
  }
  return map;
}

TensorPtr reduce_impl(const TensorPtr& a, std::vector<std::int64_t> axes, bool keepdims,
                      bool mean, Tape* tape) {
  ReducePlan plan = plan_reduce(a, axes, keepdims);
  Shape out_nokeep;
  for (std::size_t d = 0; d < a->rank(); ++d) {
    if (!plan.reduced_mask[d]) out_nokeep.push_back(a->dim(d));
  }
  auto out = make_output(plan.out_shape, a->requires_grad());
  const std::int64_t out_n = out->numel();
  const double inv = plan.count > 0 ? 1.0 / static_cast<double>(plan.count) : 0.0;
  if (mean && plan.count == 0) {
    throw std::invalid_argument("reduce_mean over an empty extent");
  }

  auto map = reduce_index_map(a, plan.reduced_mask, out_nokeep);
  {
    std::vector<double> acc(static_cast<std::size_t>(out_n), 0.0);
    const float* pa = a->data_ptr();
    for (std::int64_t i = 0; i < a->numel(); ++i) {
      acc[static_cast<std::size_t>(map[static_cast<std::size_t>(i)])] +=
          static_cast<double>(pa[i]);
    }
    float* po = out->data_ptr();
    for (std::int64_t i = 0; i < out_n; ++i) {
      po[i] = static_cast<float>(mean ? acc[static_cast<std::size_t>(i)] * inv
                                      : acc[static_cast<std::size_t>(i)]);
    }
  }

  if (tape && a->requires_grad()) {
    const double scale = mean ? inv : 1.0;
    auto shared_map = std::make_shared<std::vector<std::int64_t>>(std::move(map));
    tape->record(out, {a}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      auto& ga = a->ensure_grad();
      const auto& m = *shared_map;
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += static_cast<float>(static_cast<double>(gout[m[i]]) * scale);
      }
    });
  }
  return out;
}

std::vector<std::int64_t> all_axes(const TensorPtr& a) {
  std::vector<std::int64_t> axes(a->rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<std::int64_t>(i);
  return axes;
}

}  // namespace

TensorPtr reduce_sum(const TensorPtr& a, std::vector<std::int64_t> axes, bool keepdims,
                     Tape* tape) {
  return reduce_impl(a, std::move(axes), keepdims, false, tape);
}

TensorPtr reduce_mean(const TensorPtr& a, std::vector<std::int64_t> axes, bool keepdims,
                      Tape* tape) {
  return reduce_impl(a, std::move(axes), keepdims, true, tape);
}

TensorPtr reduce_sum_all(const TensorPtr& a, Tape* tape) {
  return reduce_impl(a, all_axes(a), false, false, tape);
}

TensorPtr reduce_mean_all(const TensorPtr& a, Tape* tape) {
  return reduce_impl(a, all_axes(a), false, true, tape);
}

// --- Layout --------------------------------------------------------------------

TensorPtr reshape(const TensorPtr& a, Shape new_shape, Tape* tape) {
  if (Tensor::checked_numel(new_shape) != a->numel()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  auto out = Tensor::from_data(std::move(new_shape),
                               std::vector<float>(a->data().begin(), a->data().end()),
                               a->requires_grad());
  if (tape && a->requires_grad()) {
    tape->record(out, {a}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      a->accumulate_grad(gout);
    });
  }
  return out;
}

namespace {

std::vector<std::int64_t> permute_map(const TensorPtr& a,
                                      const std::vector<std::size_t>& perm) {
  const std::size_t r = a->rank();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = a->dim(perm[i]);
  const Shape out_strides = row_major_strides(out_shape);
  // out_flat_for_in[i] where i runs over the input in row-major order
  std::vector<std::int64_t> map(static_cast<std::size_t>(a->numel()));
  Shape idx(r, 0);
  std::vector<std::size_t> inv(r);
  for (std::size_t i = 0; i < r; ++i) inv[perm[i]] = i;
  for (std::int64_t flat = 0; flat < a->numel(); ++flat) {
    std::int64_t out_flat = 0;
    for (std::size_t d = 0; d < r; ++d) out_flat += idx[d] * out_strides[inv[d]];
    map[static_cast<std::size_t>(flat)] = out_flat;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < a->dim(d)) break;
      idx[d] = 0;
    }
  }
  return map;
}

}  // namespace

TensorPtr permute(const TensorPtr& a, std::vector<std::size_t> perm, Tape* tape) {
  const std::size_t r = a->rank();
  if (perm.size() != r) throw std::invalid_argument("permute: wrong permutation length");
  std::vector<bool> seen(r, false);
  for (std::size_t p : perm) {
    if (p >= r || seen[p]) throw std::invalid_argument("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = a->dim(perm[i]);
  auto out = make_output(std::move(out_shape), a->requires_grad());

  auto map = permute_map(a, perm);
  const float* pa = a->data_ptr();
  float* po = out->data_ptr();
  for (std::int64_t i = 0; i < a->numel(); ++i) {
    po[map[static_cast<std::size_t>(i)]] = pa[i];
  }

  if (tape && a->requires_grad()) {
    auto shared_map = std::make_shared<std::vector<std::int64_t>>(std::move(map));
    tape->record(out, {a}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      auto& ga = a->ensure_grad();
      const auto& m = *shared_map;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[m[i]];
    });
  }
  return out;
}

TensorPtr concat(const TensorPtr& a, const TensorPtr& b, std::int64_t axis, Tape* tape) {
  const std::int64_t r = static_cast<std::int64_t>(a->rank());
  if (static_cast<std::int64_t>(b->rank()) != r) {
    throw std::invalid_argument("concat: rank mismatch");
  }
  if (axis < 0 || axis >= r) throw std::invalid_argument("concat: axis out of range");
  for (std::int64_t d = 0; d < r; ++d) {
    if (d != axis && a->dim(static_cast<std::size_t>(d)) != b->dim(static_cast<std::size_t>(d))) {
      throw std::invalid_argument("concat: extents disagree off the concat axis");
    }
  }
  Shape out_shape = a->shape();
  out_shape[static_cast<std::size_t>(axis)] += b->dim(static_cast<std::size_t>(axis));

  // Treat tensors as [outer, axis_extent, inner] blocks.
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= a->dim(static_cast<std::size_t>(d));
  for (std::int64_t d = axis + 1; d < r; ++d) inner *= a->dim(static_cast<std::size_t>(d));
  const std::int64_t ea = a->dim(static_cast<std::size_t>(axis));
  const std::int64_t eb = b->dim(static_cast<std::size_t>(axis));

  bool rg = a->requires_grad() || b->requires_grad();
  auto out = make_output(std::move(out_shape), rg);
  float* po = out->data_ptr();
  const float* pa = a->data_ptr();
  const float* pb = b->data_ptr();
  for (std::int64_t o = 0; o < outer; ++o) {
    std::memcpy(po + o * (ea + eb) * inner, pa + o * ea * inner,
                static_cast<std::size_t>(ea * inner) * sizeof(float));
    std::memcpy(po + (o * (ea + eb) + ea) * inner, pb + o * eb * inner,
                static_cast<std::size_t>(eb * inner) * sizeof(float));
  }

  if (tape && rg) {
    tape->record(out, {a, b}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      if (a->requires_grad()) {
        auto& ga = a->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          const float* src = gout.data() + o * (ea + eb) * inner;
          float* dst = ga.data() + o * ea * inner;
          for (std::int64_t i = 0; i < ea * inner; ++i) dst[i] += src[i];
        }
      }
      if (b->requires_grad()) {
        auto& gb = b->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          const float* src = gout.data() + (o * (ea + eb) + ea) * inner;
          float* dst = gb.data() + o * eb * inner;
          for (std::int64_t i = 0; i < eb * inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

}  // namespace vqa
