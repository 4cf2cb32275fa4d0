#include "vqa/refcheck.hpp"

#include <cmath>
#include <functional>

#include "vqa/layers.hpp"
#include "vqa/model.hpp"
#include "vqa/tensor.hpp"

// Independent double-precision re-implementations of every forward path,
// used only as the finite-difference baseline. Deliberately naive loops.

namespace vqa {

namespace {

constexpr double kStep = 1e-3;

using DVec = std::vector<double>;

double rel_err(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-2});
  return std::fabs(a - b) / scale;
}

DVec to_double(const TensorPtr& t) {
  return DVec(t->data().begin(), t->data().end());
}

// conv2d on one sample, NCHW, double.
DVec ref_conv2d(const DVec& in, std::int64_t c, std::int64_t h, std::int64_t w,
                const DVec& wt, const DVec& bias, std::int64_t cout, std::int64_t k,
                std::int64_t stride, std::int64_t pad, std::int64_t& oh,
                std::int64_t& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  DVec out(static_cast<std::size_t>(cout * oh * ow), 0.0);
  for (std::int64_t o = 0; o < cout; ++o) {
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (std::int64_t ci = 0; ci < c; ++ci) {
          for (std::int64_t ky = 0; ky < k; ++ky) {
            for (std::int64_t kx = 0; kx < k; ++kx) {
              const std::int64_t iy = oy * stride - pad + ky;
              const std::int64_t ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += in[static_cast<std::size_t>((ci * h + iy) * w + ix)] *
                     wt[static_cast<std::size_t>(((o * c + ci) * k + ky) * k + kx)];
            }
          }
        }
        out[static_cast<std::size_t>((o * oh + oy) * ow + ox)] = acc;
      }
    }
  }
  return out;
}

// conv3d on one sample, NCDHW, stride 1 / pad 1, double.
DVec ref_conv3d(const DVec& in, std::int64_t c, std::int64_t d, std::int64_t h,
                std::int64_t w, const DVec& wt, const DVec& bias, std::int64_t cout,
                std::int64_t kt, std::int64_t kd) {
  DVec out(static_cast<std::size_t>(cout * d * h * w), 0.0);
  for (std::int64_t o = 0; o < cout; ++o) {
    for (std::int64_t ot = 0; ot < d; ++ot) {
      for (std::int64_t oy = 0; oy < h; ++oy) {
        for (std::int64_t ox = 0; ox < w; ++ox) {
          double acc = bias[static_cast<std::size_t>(o)];
          for (std::int64_t ci = 0; ci < c; ++ci) {
            for (std::int64_t tt = 0; tt < kt; ++tt) {
              for (std::int64_t ky = 0; ky < kd; ++ky) {
                for (std::int64_t kx = 0; kx < kd; ++kx) {
                  const std::int64_t it = ot - 1 + tt;
                  const std::int64_t iy = oy - 1 + ky;
                  const std::int64_t ix = ox - 1 + kx;
                  if (it < 0 || it >= d || iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                  acc += in[static_cast<std::size_t>(((ci * d + it) * h + iy) * w + ix)] *
                         wt[static_cast<std::size_t>(
                             (((o * c + ci) * kt + tt) * kd + ky) * kd + kx)];
                }
              }
            }
          }
          out[static_cast<std::size_t>(((o * d + ot) * h + oy) * w + ox)] = acc;
        }
      }
    }
  }
  return out;
}

DVec ref_fc(const DVec& x, std::int64_t n, std::int64_t in, const DVec& wt,
            const DVec& bias, std::int64_t out_f) {
  DVec out(static_cast<std::size_t>(n * out_f), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t o = 0; o < out_f; ++o) {
      double acc = bias[static_cast<std::size_t>(o)];
      for (std::int64_t l = 0; l < in; ++l) {
        acc += x[static_cast<std::size_t>(i * in + l)] *
               wt[static_cast<std::size_t>(o * in + l)];
      }
      out[static_cast<std::size_t>(i * out_f + o)] = acc;
    }
  }
  return out;
}

DVec ref_relu(const DVec& x) {
  DVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

DVec ref_sigmoid(const DVec& x) {
  DVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return out;
}

double ref_dot(const DVec& a, const DVec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/// Central difference of `f` with respect to coordinate `i` of `theta`.
double central_diff(DVec& theta, std::size_t i, const std::function<double(const DVec&)>& f) {
  const double keep = theta[i];
  theta[i] = keep + kStep;
  const double hi = f(theta);
  theta[i] = keep - kStep;
  const double lo = f(theta);
  theta[i] = keep;
  return (hi - lo) / (2.0 * kStep);
}

/// Compares tape gradients against finite differences of `f` for every
/// coordinate block in `blocks`. Each block pairs a tape tensor with the
/// offset of its coordinates inside the flattened reference parameter vector.
struct CoordBlock {
  TensorPtr tensor;
  std::size_t offset;
  std::vector<std::size_t> coords;  // indices within the tensor; empty = all
};

double compare_blocks(DVec& theta, const std::vector<CoordBlock>& blocks,
                      const std::function<double(const DVec&)>& f) {
  double worst = 0.0;
  for (const auto& blk : blocks) {
    auto grad = blk.tensor->grad();
    std::vector<std::size_t> coords = blk.coords;
    if (coords.empty()) {
      coords.resize(static_cast<std::size_t>(blk.tensor->numel()));
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    }
    for (std::size_t i : coords) {
      const double fd = central_diff(theta, blk.offset + i, f);
      const double tape_g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      worst = std::max(worst, rel_err(tape_g, fd));
    }
  }
  return worst;
}

// Concatenate tensors into one flat double parameter vector, remembering the
// offsets so blocks can address their slices.
DVec flatten(const std::vector<TensorPtr>& tensors, std::vector<std::size_t>& offsets) {
  DVec theta;
  offsets.clear();
  for (const auto& t : tensors) {
    offsets.push_back(theta.size());
    auto d = to_double(t);
    theta.insert(theta.end(), d.begin(), d.end());
  }
  return theta;
}

// --- individual cases -------------------------------------------------------------

GradCheckRow check_conv2d() {
  Rng rng(101);
  const std::int64_t c = 2, h = 6, w = 6, cout = 3, k = 3, stride = 2, pad = 1;
  auto input = Tensor::uniform({c, h, w}, -1.0f, 1.0f, rng, true);
  Conv2DLayer layer(cout, c, k, stride, pad, rng);
  const std::int64_t oh = conv_out_extent(h, k, pad, stride);
  const std::int64_t ow = conv_out_extent(w, k, pad, stride);
  auto probe = Tensor::uniform({cout, oh, ow}, 0.25f, 1.0f, rng);

  Tape tape;
  auto out = conv2d_forward(input, layer, &tape);
  auto loss = reduce_sum_all(mul(out, probe, &tape), &tape);
  tape.backward(loss);

  std::vector<std::size_t> offs;
  DVec theta = flatten({input, layer.weights, layer.bias}, offs);
  const DVec probe_d = to_double(probe);
  auto f = [&](const DVec& th) {
    DVec in(th.begin(), th.begin() + c * h * w);
    DVec wt(th.begin() + offs[1], th.begin() + offs[1] + cout * c * k * k);
    DVec bs(th.begin() + offs[2], th.end());
    std::int64_t o1, o2;
    return ref_dot(ref_conv2d(in, c, h, w, wt, bs, cout, k, stride, pad, o1, o2), probe_d);
  };
  const double err = compare_blocks(
      theta,
      {{input, offs[0], {}}, {layer.weights, offs[1], {}}, {layer.bias, offs[2], {}}}, f);
  return {"conv2d", err, 1e-3, err <= 1e-3};
}

GradCheckRow check_conv3d() {
  Rng rng(202);
  const std::int64_t c = 2, d = 3, h = 4, w = 4, cout = 2, kt = 3, kd = 3;
  auto input = Tensor::uniform({c, d, h, w}, -1.0f, 1.0f, rng, true);
  Conv3DLayer layer(cout, c, kt, kd, rng);
  auto probe = Tensor::uniform({cout, d, h, w}, 0.25f, 1.0f, rng);

  Tape tape;
  auto out = conv3d_forward(input, layer, &tape);
  auto loss = reduce_sum_all(mul(out, probe, &tape), &tape);
  tape.backward(loss);

  std::vector<std::size_t> offs;
  DVec theta = flatten({input, layer.weights, layer.bias}, offs);
  const DVec probe_d = to_double(probe);
  auto f = [&](const DVec& th) {
    DVec in(th.begin(), th.begin() + c * d * h * w);
    DVec wt(th.begin() + offs[1], th.begin() + offs[1] + cout * c * kt * kd * kd);
    DVec bs(th.begin() + offs[2], th.end());
    return ref_dot(ref_conv3d(in, c, d, h, w, wt, bs, cout, kt, kd), probe_d);
  };
  const double err = compare_blocks(
      theta,
      {{input, offs[0], {}}, {layer.weights, offs[1], {}}, {layer.bias, offs[2], {}}}, f);
  return {"conv3d", err, 1e-3, err <= 1e-3};
}

GradCheckRow check_fc(bool corrupt) {
  Rng rng(303);
  const std::int64_t n = 3, in = 5, out_f = 4;
  auto input = Tensor::uniform({n, in}, -1.0f, 1.0f, rng, true);
  FCLayer layer(out_f, in, rng);
  auto probe = Tensor::uniform({n, out_f}, 0.25f, 1.0f, rng);

  Tape tape;
  auto out = fc_forward(input, layer, &tape);
  auto loss = reduce_sum_all(mul(out, probe, &tape), &tape);
  tape.backward(loss);
  if (corrupt) {
    // Negative control: break one gradient on purpose.
    layer.weights->ensure_grad()[0] += 0.5f;
  }

  std::vector<std::size_t> offs;
  DVec theta = flatten({input, layer.weights, layer.bias}, offs);
  const DVec probe_d = to_double(probe);
  auto f = [&](const DVec& th) {
    DVec x(th.begin(), th.begin() + n * in);
    DVec wt(th.begin() + offs[1], th.begin() + offs[1] + out_f * in);
    DVec bs(th.begin() + offs[2], th.end());
    return ref_dot(ref_fc(x, n, in, wt, bs, out_f), probe_d);
  };
  const double err = compare_blocks(
      theta,
      {{input, offs[0], {}}, {layer.weights, offs[1], {}}, {layer.bias, offs[2], {}}}, f);
  return {"fc", err, 1e-3, err <= 1e-3};
}

GradCheckRow check_gap() {
  Rng rng(404);
  const std::int64_t c = 2, d = 3, h = 4, w = 4;
  auto input = Tensor::uniform({c, d, h, w}, -1.0f, 1.0f, rng, true);
  auto probe = Tensor::uniform({c, d}, 0.25f, 1.0f, rng);

  Tape tape;
  auto out = global_avg_pool(input, PoolAxes::kSpatialOnly, &tape);
  auto loss = reduce_sum_all(mul(out, probe, &tape), &tape);
  tape.backward(loss);

  std::vector<std::size_t> offs;
  DVec theta = flatten({input}, offs);
  const DVec probe_d = to_double(probe);
  auto f = [&](const DVec& th) {
    double acc = 0.0;
    for (std::int64_t ci = 0; ci < c; ++ci) {
      for (std::int64_t di = 0; di < d; ++di) {
        double m = 0.0;
        for (std::int64_t i = 0; i < h * w; ++i) {
          m += th[static_cast<std::size_t>((ci * d + di) * h * w + i)];
        }
        acc += m / static_cast<double>(h * w) *
               probe_d[static_cast<std::size_t>(ci * d + di)];
      }
    }
    return acc;
  };
  const double err = compare_blocks(theta, {{input, 0, {}}}, f);
  return {"gap", err, 1e-3, err <= 1e-3};
}

GradCheckRow check_activation(const char* name) {
  const bool is_relu = std::string(name) == "relu";
  Rng rng(is_relu ? 505 : 606);
  // Keep inputs away from the ReLU kink so the finite difference is clean.
  auto raw = Tensor::uniform({7, 9}, 0.1f, 1.5f, rng, false);
  std::vector<float> vals(raw->data().begin(), raw->data().end());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i % 2) vals[i] = -vals[i];
  }
  auto input = Tensor::from_data({7, 9}, std::move(vals), true);
  auto probe = Tensor::uniform({7, 9}, 0.25f, 1.0f, rng);

  Tape tape;
  auto out = is_relu ? relu(input, &tape) : sigmoid(input, &tape);
  auto loss = reduce_sum_all(mul(out, probe, &tape), &tape);
  tape.backward(loss);

  std::vector<std::size_t> offs;
  DVec theta = flatten({input}, offs);
  const DVec probe_d = to_double(probe);
  auto f = [&](const DVec& th) {
    return ref_dot(is_relu ? ref_relu(th) : ref_sigmoid(th), probe_d);
  };
  const double err = compare_blocks(theta, {{input, 0, {}}}, f);
  return {name, err, 1e-3, err <= 1e-3};
}

GradCheckRow check_loss() {
  Rng rng(707);
  // Three scalar predictions plus one regularized weight tensor.
  auto p0 = Tensor::scalar(0.3f, true);
  auto p1 = Tensor::scalar(0.9f, true);
  auto p2 = Tensor::scalar(-0.2f, true);
  auto w = Tensor::uniform({3, 4}, -0.5f, 0.5f, rng, true);
  const std::vector<float> labels = {0.5f, 0.25f, 0.75f};
  const LossHyperParams h{0.7, 0.05};

  Tape tape;
  auto loss = eq1_loss({p0, p1, p2}, labels, {w}, h, &tape);
  tape.backward(loss);

  std::vector<std::size_t> offs;
  DVec theta = flatten({p0, p1, p2, w}, offs);
  auto f = [&](const DVec& th) {
    double data = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = th[static_cast<std::size_t>(i)] - labels[static_cast<std::size_t>(i)];
      data += d * d;
    }
    data = h.lambda1 * data / 3.0;
    double reg = 0.0;
    for (std::size_t i = offs[3]; i < th.size(); ++i) reg += th[i] * th[i];
    return data + h.lambda2 * reg;
  };
  const double err = compare_blocks(
      theta, {{p0, offs[0], {}}, {p1, offs[1], {}}, {p2, offs[2], {}}, {w, offs[3], {}}},
      f);
  return {"loss", err, 1e-3, err <= 1e-3};
}

// --- end-to-end ---------------------------------------------------------------------

// Double-precision mirror of the C3D forward pipeline, operating on the
// flattened parameter vector laid out by flatten().
double ref_model_score(const ModelParams& model, const DVec& theta,
                       const std::vector<std::size_t>& offs, const DVec& dist,
                       const DVec& res) {
  const auto& cfg = model.config;
  const std::int64_t d = cfg.frames, hw = cfg.patch;
  const std::int64_t h4 = hw / 4;
  const std::int64_t bc = cfg.branch_channels;

  auto slice = [&](std::size_t i, std::size_t count) {
    return DVec(theta.begin() + static_cast<std::ptrdiff_t>(offs[i]),
                theta.begin() + static_cast<std::ptrdiff_t>(offs[i] + count));
  };
  std::size_t pi = 0;
  auto next_layer = [&](std::size_t w_count, std::size_t b_count) {
    auto wv = slice(pi, w_count);
    auto bv = slice(pi + 1, b_count);
    pi += 2;
    return std::make_pair(std::move(wv), std::move(bv));
  };

  auto run_branch = [&](const DVec& clip) {
    // clip is [1,D,H,W]; process frames independently.
    auto [w1, b1] = next_layer(static_cast<std::size_t>(bc * 1 * 9),
                               static_cast<std::size_t>(bc));
    auto [w2, b2] = next_layer(static_cast<std::size_t>(bc * bc * 9),
                               static_cast<std::size_t>(bc));
    DVec out(static_cast<std::size_t>(d * bc * h4 * h4));
    const std::int64_t h2 = hw / 2;
    for (std::int64_t f = 0; f < d; ++f) {
      DVec frame(clip.begin() + f * hw * hw, clip.begin() + (f + 1) * hw * hw);
      std::int64_t oh, ow;
      auto a = ref_relu(ref_conv2d(frame, 1, hw, hw, w1, b1, bc, 3, 2, 1, oh, ow));
      auto b = ref_relu(ref_conv2d(a, bc, h2, h2, w2, b2, bc, 3, 2, 1, oh, ow));
      std::copy(b.begin(), b.end(), out.begin() + f * bc * h4 * h4);
    }
    return out;  // [D, bc, h4, h4]
  };

  const DVec distF = run_branch(dist);
  const DVec resF = run_branch(res);

  // Concatenate as [2*bc, D, h4, h4].
  const std::int64_t plane = h4 * h4;
  DVec trunk_in(static_cast<std::size_t>(2 * bc * d * plane));
  for (std::int64_t c = 0; c < 2 * bc; ++c) {
    const DVec& src = c < bc ? distF : resF;
    const std::int64_t cc = c % bc;
    for (std::int64_t f = 0; f < d; ++f) {
      for (std::int64_t i = 0; i < plane; ++i) {
        trunk_in[static_cast<std::size_t>((c * d + f) * plane + i)] =
            src[static_cast<std::size_t>((f * bc + cc) * plane + i)];
      }
    }
  }

  DVec x = trunk_in;
  std::int64_t in_ch = 2 * bc;
  for (std::size_t li = 0; li < cfg.trunk_channels.size(); ++li) {
    const std::int64_t out_ch = cfg.trunk_channels[li];
    auto [wv, bv] = next_layer(static_cast<std::size_t>(out_ch * in_ch * 27),
                               static_cast<std::size_t>(out_ch));
    x = ref_conv3d(x, in_ch, d, h4, h4, wv, bv, out_ch, 3, 3);
    if (li + 1 < cfg.trunk_channels.size()) x = ref_relu(x);
    in_ch = out_ch;
  }
  const DVec threshold = ref_sigmoid(x);  // [1, D, h4, h4]

  // 4x4 |residual| pooling, then the mask product and per-frame means.
  DVec frame_mean(static_cast<std::size_t>(d), 0.0);
  for (std::int64_t f = 0; f < d; ++f) {
    double acc = 0.0;
    for (std::int64_t by = 0; by < h4; ++by) {
      for (std::int64_t bx = 0; bx < h4; ++bx) {
        double block = 0.0;
        for (std::int64_t yy = 0; yy < 4; ++yy) {
          for (std::int64_t xx = 0; xx < 4; ++xx) {
            block += std::fabs(
                res[static_cast<std::size_t>((f * hw + by * 4 + yy) * hw + bx * 4 + xx)]);
          }
        }
        block /= 16.0;
        acc += block * threshold[static_cast<std::size_t>((f * h4 + by) * h4 + bx)];
      }
    }
    frame_mean[static_cast<std::size_t>(f)] = acc / static_cast<double>(plane);
  }

  auto [w_fc1, b_fc1] = next_layer(static_cast<std::size_t>(cfg.fc_hidden * d),
                                   static_cast<std::size_t>(cfg.fc_hidden));
  auto [w_fc2, b_fc2] = next_layer(static_cast<std::size_t>(cfg.fc_hidden), 1);
  auto hidden = ref_relu(ref_fc(frame_mean, 1, d, w_fc1, b_fc1, cfg.fc_hidden));
  auto score = ref_fc(hidden, 1, cfg.fc_hidden, w_fc2, b_fc2, 1);
  return score[0];
}

GradCheckRow check_end_to_end() {
  ModelConfig cfg;
  cfg.frames = 4;
  cfg.patch = 16;
  // Seed chosen so no sampled coordinate sits within the h=1e-3 secant of a
  // ReLU kink; the check is exact in the gradient but noisy at kink crossings.
  auto model = build_model(cfg, 901);

  Rng rng(902);
  auto dist = Tensor::uniform({1, cfg.frames, cfg.patch, cfg.patch}, 0.0f, 1.0f, rng);
  auto res = Tensor::uniform({1, cfg.frames, cfg.patch, cfg.patch}, -0.5f, 0.5f, rng);

  Tape tape;
  auto out = forward(*model, dist, res, &tape);
  tape.backward(out.score);

  auto tensors = model->parameters();
  std::vector<std::size_t> offs;
  DVec theta = flatten(tensors, offs);
  const DVec dist_d = to_double(dist);
  const DVec res_d = to_double(res);
  auto f = [&](const DVec& th) { return ref_model_score(*model, th, offs, dist_d, res_d); };

  // A spread of coordinates from every parameter tensor.
  std::vector<CoordBlock> blocks;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::size_t n = static_cast<std::size_t>(tensors[i]->numel());
    std::vector<std::size_t> coords = {0};
    if (n > 2) coords.push_back(n / 2);
    if (n > 1) coords.push_back(n - 1);
    blocks.push_back({tensors[i], offs[i], std::move(coords)});
  }
  const double err = compare_blocks(theta, blocks, f);
  return {"end_to_end", err, 1e-2, err <= 1e-2};
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck(bool corrupt_backward) {
  std::vector<GradCheckRow> rows;
  rows.push_back(check_conv2d());
  rows.push_back(check_conv3d());
  rows.push_back(check_fc(corrupt_backward));
  rows.push_back(check_gap());
  rows.push_back(check_activation("relu"));
  rows.push_back(check_activation("sigmoid"));
  rows.push_back(check_loss());
  rows.push_back(check_end_to_end());
  return rows;
}

}  // namespace vqa
