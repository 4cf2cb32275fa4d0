#include "vqa/layers.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace vqa {

namespace {

// He initialization for ReLU stacks: zero-mean Gaussian, std = sqrt(2/fan_in).
TensorPtr he_init(Shape shape, std::int64_t fan_in, Rng& rng) {
  return Tensor::gaussian(std::move(shape), 0.0,
                          std::sqrt(2.0 / static_cast<double>(fan_in)), rng,
                          /*requires_grad=*/true);
}

// out[j] (double) += a * b[j] over n floats.
inline void axpy_acc(double a, const float* b, double* out, std::int64_t n) {
  for (std::int64_t j = 0; j < n; ++j) out[j] += a * static_cast<double>(b[j]);
}

// Dot product of two float rows accumulated in double with four partial sums.
inline double dot_acc(const float* a, const float* b, std::int64_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return ((s0 + s1) + (s2 + s3));
}

}  // namespace

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, std::int64_t pad,
                             std::int64_t stride) {
  return (in + 2 * pad - kernel) / stride + 1;
}

Conv2DLayer::Conv2DLayer(std::int64_t n_out, std::int64_t n_in, std::int64_t d,
                         std::int64_t stride_, std::int64_t padding_, Rng& rng) {
  if (n_out < 1 || n_in < 1) throw std::invalid_argument("conv2d: channels must be >= 1");
  if (d < 1 || d % 2 == 0) throw std::invalid_argument("conv2d: kernel extent must be odd");
  if (stride_ < 1 || padding_ < 0) throw std::invalid_argument("conv2d: bad stride/padding");
  weights = he_init({n_out, n_in, d, d}, n_in * d * d, rng);
  bias = Tensor::zeros({n_out}, /*requires_grad=*/true);
  stride = stride_;
  padding = padding_;
}

Conv3DLayer::Conv3DLayer(std::int64_t n_out, std::int64_t n_in, std::int64_t t,
                         std::int64_t d, Rng& rng) {
  if (n_out < 1 || n_in < 1) throw std::invalid_argument("conv3d: channels must be >= 1");
  if (t < 1 || t % 2 == 0 || d < 1 || d % 2 == 0) {
    throw std::invalid_argument("conv3d: kernel extents must be odd");
  }
  weights = he_init({n_out, n_in, t, d, d}, n_in * t * d * d, rng);
  bias = Tensor::zeros({n_out}, /*requires_grad=*/true);
}

FCLayer::FCLayer(std::int64_t out, std::int64_t in, Rng& rng) {
  if (out < 1 || in < 1) throw std::invalid_argument("fc: extents must be >= 1");
  weights = he_init({out, in}, in, rng);
  bias = Tensor::zeros({out}, /*requires_grad=*/true);
}

// --- conv2d ---------------------------------------------------------------------

namespace {

struct Conv2DGeom {
  std::int64_t batch, cin, h, w;      // input
  std::int64_t cout, k, stride, pad;  // layer
  std::int64_t oh, ow;                // output
  bool batched;                       // rank-4 input
};

Conv2DGeom conv2d_geom(const TensorPtr& input, const Conv2DLayer& layer) {
  Conv2DGeom g;
  g.batched = input->rank() == 4;
  if (input->rank() != 3 && input->rank() != 4) {
    throw std::invalid_argument("conv2d: input must be [C,H,W] or [B,C,H,W]");
  }
  std::size_t off = g.batched ? 1 : 0;
  g.batch = g.batched ? input->dim(0) : 1;
  g.cin = input->dim(off);
  g.h = input->dim(off + 1);
  g.w = input->dim(off + 2);
  g.cout = layer.out_channels();
  g.k = layer.kernel();
  g.stride = layer.stride;
  g.pad = layer.padding;
  if (g.cin != layer.in_channels()) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(g.cin) +
                                " channels, layer expects " +
                                std::to_string(layer.in_channels()));
  }
  g.oh = conv_out_extent(g.h, g.k, g.pad, g.stride);
  g.ow = conv_out_extent(g.w, g.k, g.pad, g.stride);
  if (g.oh < 1 || g.ow < 1) {
    throw std::invalid_argument("conv2d: output extent below 1");
  }
  return g;
}

// Patch matrix for one sample: rows indexed by (c, ky, kx), columns by output
// position (oy, ox). Out-of-range taps read as zero.
void im2col_2d(const float* in, const Conv2DGeom& g, float* col) {
  const std::int64_t P = g.oh * g.ow;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    const float* plane = in + c * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx, ++row) {
        float* dst = col + row * P;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) {
            std::memset(dst + oy * g.ow, 0, static_cast<std::size_t>(g.ow) * sizeof(float));
            continue;
          }
          const float* src = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[oy * g.ow + ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add of a patch-matrix gradient back onto the input.
void col2im_2d(const double* col, const Conv2DGeom& g, double* din) {
  const std::int64_t P = g.oh * g.ow;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    double* plane = din + c * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx, ++row) {
        const double* src = col + row * P;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) plane[iy * g.w + ix] += src[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

TensorPtr conv2d_forward(const TensorPtr& input, const Conv2DLayer& layer, Tape* tape) {
  const Conv2DGeom g = conv2d_geom(input, layer);
  const std::int64_t K = g.cin * g.k * g.k;
  const std::int64_t P = g.oh * g.ow;

  Shape out_shape = g.batched ? Shape{g.batch, g.cout, g.oh, g.ow}
                              : Shape{g.cout, g.oh, g.ow};
  bool rg = input->requires_grad() || layer.weights->requires_grad() ||
            layer.bias->requires_grad();
  auto out = Tensor::zeros(std::move(out_shape), rg);

  const float* wp = layer.weights->data_ptr();  // [cout x K] row-major
  const float* bp = layer.bias->data_ptr();
  {
    std::vector<float> col(static_cast<std::size_t>(K * P));
    std::vector<double> acc(static_cast<std::size_t>(P));
    for (std::int64_t b = 0; b < g.batch; ++b) {
      const float* in = input->data_ptr() + b * g.cin * g.h * g.w;
      float* op = out->data_ptr() + b * g.cout * P;
      im2col_2d(in, g, col.data());
      for (std::int64_t o = 0; o < g.cout; ++o) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(bp[o]));
        const float* wrow = wp + o * K;
        for (std::int64_t l = 0; l < K; ++l) {
          axpy_acc(wrow[l], col.data() + l * P, acc.data(), P);
        }
        for (std::int64_t p = 0; p < P; ++p) {
          op[o * P + p] = static_cast<float>(acc[p]);
        }
      }
    }
  }

  if (tape && rg) {
    TensorPtr w = layer.weights, bias = layer.bias;
    tape->record(out, {input, w, bias}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      const std::int64_t Kl = K, Pl = P;
      const float* wptr = w->data_ptr();
      std::vector<float> col(static_cast<std::size_t>(Kl * Pl));
      std::vector<double> dw(w->requires_grad() ? static_cast<std::size_t>(g.cout * Kl) : 0,
                             0.0);
      std::vector<double> db(bias->requires_grad() ? static_cast<std::size_t>(g.cout) : 0,
                             0.0);
      std::vector<double> dcol;
      std::vector<double> din;
      if (input->requires_grad()) {
        dcol.resize(static_cast<std::size_t>(Kl * Pl));
        din.resize(static_cast<std::size_t>(g.cin * g.h * g.w));
      }
      for (std::int64_t b = 0; b < g.batch; ++b) {
        const float* in = input->data_ptr() + b * g.cin * g.h * g.w;
        const float* go = gout.data() + b * g.cout * Pl;
        const bool need_col = w->requires_grad() || input->requires_grad();
        if (need_col) im2col_2d(in, g, col.data());
        if (bias->requires_grad()) {
          for (std::int64_t o = 0; o < g.cout; ++o) {
            double s = 0.0;
            for (std::int64_t p = 0; p < Pl; ++p) s += static_cast<double>(go[o * Pl + p]);
            db[static_cast<std::size_t>(o)] += s;
          }
        }
        if (w->requires_grad()) {
          for (std::int64_t o = 0; o < g.cout; ++o) {
            for (std::int64_t l = 0; l < Kl; ++l) {
              dw[static_cast<std::size_t>(o * Kl + l)] +=
                  dot_acc(go + o * Pl, col.data() + l * Pl, Pl);
            }
          }
        }
        if (input->requires_grad()) {
          std::fill(dcol.begin(), dcol.end(), 0.0);
          for (std::int64_t o = 0; o < g.cout; ++o) {
            const float* wrow = wptr + o * Kl;
            for (std::int64_t l = 0; l < Kl; ++l) {
              axpy_acc(wrow[l], go + o * Pl, dcol.data() + l * Pl, Pl);
            }
          }
          std::fill(din.begin(), din.end(), 0.0);
          col2im_2d(dcol.data(), g, din.data());
          // Accumulate this sample's slice of the input gradient.
          auto& gi = input->ensure_grad();
          float* dst = gi.data() + b * g.cin * g.h * g.w;
          for (std::size_t i = 0; i < din.size(); ++i) dst[i] += static_cast<float>(din[i]);
        }
      }
      if (w->requires_grad()) w->accumulate_grad(std::span<const double>(dw));
      if (bias->requires_grad()) bias->accumulate_grad(std::span<const double>(db));
    });
  }
  return out;
}

// --- conv3d ---------------------------------------------------------------------

namespace {

struct Conv3DGeom {
  std::int64_t batch, cin, d, h, w;
  std::int64_t cout, kt, kd;
  std::int64_t od, oh, ow;
  bool batched;
};

Conv3DGeom conv3d_geom(const TensorPtr& input, const Conv3DLayer& layer) {
  Conv3DGeom g;
  g.batched = input->rank() == 5;
  if (input->rank() != 4 && input->rank() != 5) {
    throw std::invalid_argument("conv3d: input must be [C,D,H,W] or [B,C,D,H,W]");
  }
  std::size_t off = g.batched ? 1 : 0;
  g.batch = g.batched ? input->dim(0) : 1;
  g.cin = input->dim(off);
  g.d = input->dim(off + 1);
  g.h = input->dim(off + 2);
  g.w = input->dim(off + 3);
  g.cout = layer.out_channels();
  g.kt = layer.kernel_t();
  g.kd = layer.kernel_d();
  if (g.cin != layer.in_channels()) {
    throw std::invalid_argument("conv3d: input has " + std::to_string(g.cin) +
                                " channels, layer expects " +
                                std::to_string(layer.in_channels()));
  }
  g.od = conv_out_extent(g.d, g.kt, Conv3DLayer::padding, Conv3DLayer::stride);
  g.oh = conv_out_extent(g.h, g.kd, Conv3DLayer::padding, Conv3DLayer::stride);
  g.ow = conv_out_extent(g.w, g.kd, Conv3DLayer::padding, Conv3DLayer::stride);
  if (g.od < 1 || g.oh < 1 || g.ow < 1) {
    throw std::invalid_argument("conv3d: output extent below 1");
  }
  return g;
}

// Patch matrix for the output frame `ot` of one sample: rows indexed by
// (c, kt, ky, kx), columns by spatial output position.
void im2col_3d_frame(const float* in, const Conv3DGeom& g, std::int64_t ot, float* col) {
  const std::int64_t P = g.oh * g.ow;
  const std::int64_t plane = g.h * g.w;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    const float* vol = in + c * g.d * plane;
    for (std::int64_t kt = 0; kt < g.kt; ++kt) {
      const std::int64_t it = ot * Conv3DLayer::stride - Conv3DLayer::padding + kt;
      const bool t_ok = it >= 0 && it < g.d;
      const float* frame = vol + (t_ok ? it : 0) * plane;
      for (std::int64_t ky = 0; ky < g.kd; ++ky) {
        for (std::int64_t kx = 0; kx < g.kd; ++kx, ++row) {
          float* dst = col + row * P;
          if (!t_ok) {
            std::memset(dst, 0, static_cast<std::size_t>(P) * sizeof(float));
            continue;
          }
          for (std::int64_t oy = 0; oy < g.oh; ++oy) {
            const std::int64_t iy = oy * Conv3DLayer::stride - Conv3DLayer::padding + ky;
            if (iy < 0 || iy >= g.h) {
              std::memset(dst + oy * g.ow, 0,
                          static_cast<std::size_t>(g.ow) * sizeof(float));
              continue;
            }
            const float* src = frame + iy * g.w;
            for (std::int64_t ox = 0; ox < g.ow; ++ox) {
              const std::int64_t ix = ox * Conv3DLayer::stride - Conv3DLayer::padding + kx;
              dst[oy * g.ow + ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im_3d_frame(const double* col, const Conv3DGeom& g, std::int64_t ot, double* din) {
  const std::int64_t P = g.oh * g.ow;
  const std::int64_t plane = g.h * g.w;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    double* vol = din + c * g.d * plane;
    for (std::int64_t kt = 0; kt < g.kt; ++kt) {
      const std::int64_t it = ot * Conv3DLayer::stride - Conv3DLayer::padding + kt;
      const bool t_ok = it >= 0 && it < g.d;
      double* frame = vol + (t_ok ? it : 0) * plane;
      for (std::int64_t ky = 0; ky < g.kd; ++ky) {
        for (std::int64_t kx = 0; kx < g.kd; ++kx, ++row) {
          if (!t_ok) continue;
          const double* src = col + row * P;
          for (std::int64_t oy = 0; oy < g.oh; ++oy) {
            const std::int64_t iy = oy * Conv3DLayer::stride - Conv3DLayer::padding + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t ox = 0; ox < g.ow; ++ox) {
              const std::int64_t ix =
                  ox * Conv3DLayer::stride - Conv3DLayer::padding + kx;
              if (ix >= 0 && ix < g.w) frame[iy * g.w + ix] += src[oy * g.ow + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

TensorPtr conv3d_forward(const TensorPtr& input, const Conv3DLayer& layer, Tape* tape) {
  const Conv3DGeom g = conv3d_geom(input, layer);
  const std::int64_t K = g.cin * g.kt * g.kd * g.kd;
  const std::int64_t P = g.oh * g.ow;  // one output frame at a time

  Shape out_shape = g.batched ? Shape{g.batch, g.cout, g.od, g.oh, g.ow}
                              : Shape{g.cout, g.od, g.oh, g.ow};
  bool rg = input->requires_grad() || layer.weights->requires_grad() ||
            layer.bias->requires_grad();
  auto out = Tensor::zeros(std::move(out_shape), rg);

  const float* wp = layer.weights->data_ptr();
  const float* bp = layer.bias->data_ptr();
  {
    std::vector<float> col(static_cast<std::size_t>(K * P));
    std::vector<double> acc(static_cast<std::size_t>(P));
    for (std::int64_t b = 0; b < g.batch; ++b) {
      const float* in = input->data_ptr() + b * g.cin * g.d * g.h * g.w;
      float* op = out->data_ptr() + b * g.cout * g.od * P;
      for (std::int64_t ot = 0; ot < g.od; ++ot) {
        im2col_3d_frame(in, g, ot, col.data());
        for (std::int64_t o = 0; o < g.cout; ++o) {
          std::fill(acc.begin(), acc.end(), static_cast<double>(bp[o]));
          const float* wrow = wp + o * K;
          for (std::int64_t l = 0; l < K; ++l) {
            axpy_acc(wrow[l], col.data() + l * P, acc.data(), P);
          }
          float* dst = op + (o * g.od + ot) * P;
          for (std::int64_t p = 0; p < P; ++p) dst[p] = static_cast<float>(acc[p]);
        }
      }
    }
  }

  if (tape && rg) {
    TensorPtr w = layer.weights, bias = layer.bias;
    tape->record(out, {input, w, bias}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      const std::int64_t Kl = K, Pl = P;
      const float* wptr = w->data_ptr();
      std::vector<float> col(static_cast<std::size_t>(Kl * Pl));
      std::vector<double> dw(w->requires_grad() ? static_cast<std::size_t>(g.cout * Kl) : 0,
                             0.0);
      std::vector<double> db(bias->requires_grad() ? static_cast<std::size_t>(g.cout) : 0,
                             0.0);
      std::vector<double> dcol;
      std::vector<double> din;
      if (input->requires_grad()) {
        dcol.resize(static_cast<std::size_t>(Kl * Pl));
        din.resize(static_cast<std::size_t>(g.cin * g.d * g.h * g.w));
      }
      for (std::int64_t b = 0; b < g.batch; ++b) {
        const float* in = input->data_ptr() + b * g.cin * g.d * g.h * g.w;
        const float* go = gout.data() + b * g.cout * g.od * Pl;
        if (input->requires_grad()) std::fill(din.begin(), din.end(), 0.0);
        for (std::int64_t ot = 0; ot < g.od; ++ot) {
          const bool need_col = w->requires_grad() || input->requires_grad();
          if (need_col) im2col_3d_frame(in, g, ot, col.data());
          if (bias->requires_grad()) {
            for (std::int64_t o = 0; o < g.cout; ++o) {
              double s = 0.0;
              const float* gframe = go + (o * g.od + ot) * Pl;
              for (std::int64_t p = 0; p < Pl; ++p) s += static_cast<double>(gframe[p]);
              db[static_cast<std::size_t>(o)] += s;
            }
          }
          if (w->requires_grad()) {
            for (std::int64_t o = 0; o < g.cout; ++o) {
              const float* gframe = go + (o * g.od + ot) * Pl;
              for (std::int64_t l = 0; l < Kl; ++l) {
                dw[static_cast<std::size_t>(o * Kl + l)] +=
                    dot_acc(gframe, col.data() + l * Pl, Pl);
              }
            }
          }
          if (input->requires_grad()) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            for (std::int64_t o = 0; o < g.cout; ++o) {
              const float* gframe = go + (o * g.od + ot) * Pl;
              const float* wrow = wptr + o * Kl;
              for (std::int64_t l = 0; l < Kl; ++l) {
                axpy_acc(wrow[l], gframe, dcol.data() + l * Pl, Pl);
              }
            }
            col2im_3d_frame(dcol.data(), g, ot, din.data());
          }
        }
        if (input->requires_grad()) {
          auto& gi = input->ensure_grad();
          float* dst = gi.data() + b * g.cin * g.d * g.h * g.w;
          for (std::size_t i = 0; i < din.size(); ++i) dst[i] += static_cast<float>(din[i]);
        }
      }
      if (w->requires_grad()) w->accumulate_grad(std::span<const double>(dw));
      if (bias->requires_grad()) bias->accumulate_grad(std::span<const double>(db));
    });
  }
  return out;
}

// --- fully connected ---------------------------------------------------------------

TensorPtr fc_forward(const TensorPtr& input, const FCLayer& layer, Tape* tape) {
  if (input->rank() != 2) {
    throw std::invalid_argument("fc: input must be [N x in]");
  }
  const std::int64_t N = input->dim(0);
  const std::int64_t in = input->dim(1);
  const std::int64_t out_f = layer.out_features();
  if (in != layer.in_features()) {
    throw std::invalid_argument("fc: input width " + std::to_string(in) +
                                " does not match layer in=" +
                                std::to_string(layer.in_features()));
  }
  bool rg = input->requires_grad() || layer.weights->requires_grad() ||
            layer.bias->requires_grad();
  auto out = Tensor::zeros({N, out_f}, rg);
  const float* xp = input->data_ptr();
  const float* wp = layer.weights->data_ptr();
  const float* bp = layer.bias->data_ptr();
  float* op = out->data_ptr();
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t o = 0; o < out_f; ++o) {
      op[i * out_f + o] = static_cast<float>(static_cast<double>(bp[o]) +
                                             dot_acc(xp + i * in, wp + o * in, in));
    }
  }

  if (tape && rg) {
    TensorPtr w = layer.weights, bias = layer.bias;
    tape->record(out, {input, w, bias}, [=]() {
      auto gout = out->grad();
      if (gout.empty()) return;
      const float* go = gout.data();
      if (bias->requires_grad()) {
        std::vector<double> db(static_cast<std::size_t>(out_f), 0.0);
        for (std::int64_t i = 0; i < N; ++i) {
          for (std::int64_t o = 0; o < out_f; ++o) {
            db[static_cast<std::size_t>(o)] += static_cast<double>(go[i * out_f + o]);
          }
        }
        bias->accumulate_grad(std::span<const double>(db));
      }
      if (w->requires_grad()) {
        std::vector<double> dw(static_cast<std::size_t>(out_f * in), 0.0);
        for (std::int64_t i = 0; i < N; ++i) {
          for (std::int64_t o = 0; o < out_f; ++o) {
            axpy_acc(go[i * out_f + o], xp + i * in, dw.data() + o * in, in);
          }
        }
        w->accumulate_grad(std::span<const double>(dw));
      }
      if (input->requires_grad()) {
        std::vector<double> dx(static_cast<std::size_t>(N * in), 0.0);
        for (std::int64_t i = 0; i < N; ++i) {
          for (std::int64_t o = 0; o < out_f; ++o) {
            axpy_acc(go[i * out_f + o], wp + o * in, dx.data() + i * in, in);
          }
        }
        input->accumulate_grad(std::span<const double>(dx));
      }
    });
  }
  return out;
}

// --- pooling -------------------------------------------------------------------------

TensorPtr global_avg_pool(const TensorPtr& input, PoolAxes axes, Tape* tape) {
  const std::size_t r = input->rank();
  if (r != 4 && r != 5) {
    throw std::invalid_argument("global_avg_pool: input must be rank 4 or 5");
  }
  std::vector<std::int64_t> reduce_axes;
  const std::int64_t last = static_cast<std::int64_t>(r) - 1;
  if (axes == PoolAxes::kSpatialOnly) {
    reduce_axes = {last - 1, last};
  } else {
    reduce_axes = {last - 2, last - 1, last};
  }
  return reduce_mean(input, reduce_axes, /*keepdims=*/false, tape);
}

TensorPtr avg_pool_spatial(const TensorPtr& input, std::int64_t k, Tape* tape) {
  const std::size_t r = input->rank();
  if (r < 2) throw std::invalid_argument("avg_pool_spatial: input rank too small");
  const std::int64_t h = input->dim(r - 2);
  const std::int64_t w = input->dim(r - 1);
  if (k < 1 || h % k != 0 || w % k != 0) {
    throw std::invalid_argument("avg_pool_spatial: extents must divide by the pool size");
  }
  // Block trick: [..., H, W] -> [..., H/k, k, W/k, k], mean over the two k axes.
  Shape blocked(input->shape().begin(), input->shape().end() - 2);
  blocked.push_back(h / k);
  blocked.push_back(k);
  blocked.push_back(w / k);
  blocked.push_back(k);
  auto v = reshape(input, blocked, tape);
  const std::int64_t br = static_cast<std::int64_t>(v->rank());
  auto pooled = reduce_mean(v, {br - 3, br - 1}, /*keepdims=*/false, tape);
  return pooled;
}

// --- objective -----------------------------------------------------------------------

TensorPtr eq1_loss(const std::vector<TensorPtr>& preds, const std::vector<float>& labels,
                   const std::vector<TensorPtr>& weights, const LossHyperParams& h,
                   Tape* tape) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw std::invalid_argument("eq1_loss: predictions and labels must pair up, non-empty");
  }
  if (!(h.lambda1 >= 0.0) || !(h.lambda2 >= 0.0) || !std::isfinite(h.lambda1) ||
      !std::isfinite(h.lambda2)) {
    throw std::invalid_argument("eq1_loss: hyper-parameters must be finite and >= 0");
  }
  TensorPtr data_term;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i]->rank() != 0) {
      throw std::invalid_argument("eq1_loss: predictions must be rank-0");
    }
    auto diff = sub(preds[i], Tensor::scalar(labels[i]), tape);
    auto sq = mul(diff, diff, tape);
    data_term = data_term ? add(data_term, sq, tape) : sq;
  }
  auto loss = mul(data_term,
                  static_cast<float>(h.lambda1 / static_cast<double>(preds.size())), tape);
  if (h.lambda2 > 0.0) {
    TensorPtr reg;
    for (const auto& w : weights) {
      auto sq = reduce_sum_all(mul(w, w, tape), tape);
      reg = reg ? add(reg, sq, tape) : sq;
    }
    if (reg) {
      loss = add(loss, mul(reg, static_cast<float>(h.lambda2), tape), tape);
    }
  }
  return loss;
}

}  // namespace vqa
