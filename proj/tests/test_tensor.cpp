#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vqa/tensor.hpp"

using namespace vqa;

TEST_CASE("tensor creation: fills, shapes, flat sizes") {
  auto z = Tensor::full({2, 3}, 0.0f);
  CHECK(z->numel() == 6);
  for (float v : z->data()) CHECK(v == 0.0f);

  auto s = Tensor::scalar(7.0f);
  CHECK(s->rank() == 0);
  CHECK(s->numel() == 1);
  CHECK(s->item() == 7.0f);

  // 1*60*112*112, multiplied out by hand.
  auto big = Tensor::zeros({1, 60, 112, 112});
  CHECK(big->numel() == 752640);

  auto empty = Tensor::zeros({2, 0, 3});
  CHECK(empty->numel() == 0);

  CHECK_THROWS_AS(Tensor::zeros({-1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({1 << 20, 1 << 20, 1 << 20}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f}), std::invalid_argument);
}

TEST_CASE("tensor creation: seeded draws are bit-identical") {
  Rng a(42), b(42), c(43);
  auto ta = Tensor::uniform({4, 5}, -1.0f, 1.0f, a);
  auto tb = Tensor::uniform({4, 5}, -1.0f, 1.0f, b);
  auto tc = Tensor::uniform({4, 5}, -1.0f, 1.0f, c);
  bool same = true, differs = false;
  for (std::int64_t i = 0; i < ta->numel(); ++i) {
    same = same && ta->data()[i] == tb->data()[i];
    differs = differs || ta->data()[i] != tc->data()[i];
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("elementwise: definitions") {
  auto r = relu(Tensor::from_data({3}, {-1.0f, 0.0f, 2.0f}));
  CHECK(r->data()[0] == 0.0f);
  CHECK(r->data()[1] == 0.0f);
  CHECK(r->data()[2] == 2.0f);

  auto m = mul(Tensor::from_data({2}, {2.0f, 3.0f}), Tensor::from_data({2}, {4.0f, 5.0f}));
  CHECK(m->data()[0] == 8.0f);
  CHECK(m->data()[1] == 15.0f);

  CHECK(sigmoid(Tensor::scalar(0.0f))->item() == doctest::Approx(0.5).epsilon(1e-7));

  auto a = add(Tensor::from_data({2}, {1.0f, 2.0f}), Tensor::from_data({2}, {10.0f, 20.0f}));
  CHECK(a->data()[0] == 11.0f);
  CHECK(a->data()[1] == 22.0f);

  auto d = sub(Tensor::from_data({2}, {1.0f, 2.0f}), Tensor::from_data({2}, {10.0f, 20.0f}));
  CHECK(d->data()[0] == -9.0f);
  CHECK(d->data()[1] == -18.0f);

  auto ab = abs(Tensor::from_data({3}, {-1.5f, 0.0f, 2.5f}));
  CHECK(ab->data()[0] == 1.5f);
  CHECK(ab->data()[2] == 2.5f);
}

TEST_CASE("elementwise: shape mismatch rejected, rank-0 broadcast allowed") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);

  auto s = Tensor::scalar(2.0f);
  auto x = Tensor::from_data({2}, {3.0f, 4.0f});
  auto y = mul(x, s);
  CHECK(y->shape() == Shape{2});
  CHECK(y->data()[0] == 6.0f);
  auto y2 = sub(s, x);
  CHECK(y2->data()[0] == -1.0f);
  CHECK(y2->data()[1] == -2.0f);
}

TEST_CASE("sigmoid stays strictly inside (0,1) even when saturated") {
  auto t = sigmoid(Tensor::from_data({4}, {-1000.0f, -40.0f, 40.0f, 1000.0f}));
  for (float v : t->data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("matmul: identity, hand case, naive-loop oracle") {
  auto eye = Tensor::from_data({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  auto m = Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  auto r = matmul(eye, m);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(r->data()[i] == m->data()[i]);

  auto a = Tensor::from_data({1, 2}, {1.0f, 2.0f});
  auto b = Tensor::from_data({2, 1}, {3.0f, 4.0f});
  CHECK(matmul(a, b)->data()[0] == 11.0f);

  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                  std::invalid_argument);

  Rng rng(7);
  auto x = Tensor::uniform({4, 5}, -1.0f, 1.0f, rng);
  auto y = Tensor::uniform({5, 3}, -1.0f, 1.0f, rng);
  auto z = matmul(x, y);
  // Naive triple loop in double.
  for (std::int64_t i = 0; i < 4; ++i) {
    for (std::int64_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::int64_t l = 0; l < 5; ++l) {
        acc += static_cast<double>(x->data()[i * 5 + l]) *
               static_cast<double>(y->data()[l * 3 + j]);
      }
      CHECK(std::fabs(z->data()[i * 3 + j] - acc) <= 1e-6);
    }
  }
}

TEST_CASE("reduce: hand cases and axis handling") {
  auto v = Tensor::from_data({4}, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(reduce_mean_all(v)->item() == doctest::Approx(2.5).epsilon(1e-9));

  auto m = Tensor::from_data({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  auto s = reduce_sum(m, {0});
  CHECK(s->shape() == Shape{2});
  CHECK(s->data()[0] == 4.0f);
  CHECK(s->data()[1] == 6.0f);

  auto k = reduce_sum(m, {0}, /*keepdims=*/true);
  CHECK(k->shape() == Shape{1, 2});

  CHECK_THROWS_AS(reduce_sum(m, {2}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_sum(m, {0, 0}), std::invalid_argument);
}

TEST_CASE("reduce: mean of 1e6 copies of 0.1f stays at 0.1f (64-bit accumulation)") {
  const float v = 0.1f;
  auto t = Tensor::full({1000000}, v);
  const double got = reduce_mean_all(t)->item();
  // Oracle: independent 64-bit sum over the float data.
  double acc = 0.0;
  for (float x : t->data()) acc += static_cast<double>(x);
  const double want = acc / 1e6;
  CHECK(std::fabs(got - want) <= 1e-9);
  CHECK(std::fabs(got - static_cast<double>(v)) <= 1e-9);
}

TEST_CASE("backward: linear and quadratic hand cases") {
  auto x = Tensor::from_data({2, 2}, {1.0f, -2.0f, 3.0f, 0.5f}, true);
  Tape tape;
  auto loss = reduce_sum_all(x, &tape);
  tape.backward(loss);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(x->grad()[i] == 1.0f);

  auto y = Tensor::from_data({2}, {1.0f, 2.0f}, true);
  Tape tape2;
  auto loss2 = reduce_sum_all(mul(y, y, &tape2), &tape2);
  tape2.backward(loss2);
  CHECK(y->grad()[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(y->grad()[1] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("backward: error paths") {
  auto x = Tensor::from_data({2}, {1.0f, 2.0f}, true);
  Tape tape;
  auto y = mul(x, x, &tape);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);  // not rank-0

  auto detached = Tensor::scalar(1.0f, true);
  CHECK_THROWS_AS(tape.backward(detached), std::runtime_error);  // not on tape
}

TEST_CASE("backward: fan-out accumulates branch gradients") {
  auto x = Tensor::from_data({3}, {0.5f, -1.0f, 2.0f}, true);
  Tape tape;
  // f = sum(x*x), g = sum(3*x); both share x.
  auto f = reduce_sum_all(mul(x, x, &tape), &tape);
  auto g = reduce_sum_all(mul(x, Tensor::scalar(3.0f), &tape), &tape);
  auto loss = add(f, g, &tape);
  tape.backward(loss);
  for (std::int64_t i = 0; i < 3; ++i) {
    const double want = 2.0 * x->data()[i] + 3.0;
    CHECK(x->grad()[i] == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("backward: linearity over loss combinations") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = Tensor::uniform({4, 3}, -1.0f, 1.0f, rng, true);
    const float a = 2.0f, b = 0.5f;  // exactly representable

    auto run = [&](bool combined) {
      x->clear_grad();
      Tape tape;
      auto f = reduce_sum_all(mul(x, x, &tape), &tape);
      auto g = reduce_mean_all(sigmoid(x, &tape), &tape);
      TensorPtr loss;
      if (combined) {
        loss = add(mul(f, a, &tape), mul(g, b, &tape), &tape);
        tape.backward(loss);
        return std::vector<float>(x->grad().begin(), x->grad().end());
      }
      tape.backward(f);
      std::vector<float> gf(x->grad().begin(), x->grad().end());
      x->clear_grad();
      Tape tape2;
      auto g2 = reduce_mean_all(sigmoid(x, &tape2), &tape2);
      tape2.backward(g2);
      std::vector<float> gg(x->grad().begin(), x->grad().end());
      for (std::size_t i = 0; i < gf.size(); ++i) gf[i] = a * gf[i] + b * gg[i];
      return gf;
    };

    auto combined = run(true);
    auto separate = run(false);
    for (std::size_t i = 0; i < combined.size(); ++i) {
      CHECK(std::fabs(combined[i] - separate[i]) <= 1e-6);
    }
  }
}

TEST_CASE("gradients of every elementwise op match finite differences") {
  Rng rng(123);
  struct Case {
    const char* name;
    std::function<TensorPtr(const TensorPtr&, const TensorPtr&, Tape*)> op;
    std::function<oracle::DVec(const oracle::DVec&, const oracle::DVec&)> ref;
    bool unary;
  };
  // Inputs drawn in [0.1, 1.2] with alternating sign, keeping clear of the
  // relu/abs kinks at zero.
  auto make_input = [&rng](std::int64_t n) {
    auto raw = Tensor::uniform({n}, 0.1f, 1.2f, rng);
    std::vector<float> vals(raw->data().begin(), raw->data().end());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i % 2) vals[i] = -vals[i];
    }
    return Tensor::from_data({n}, std::move(vals), true);
  };

  std::vector<Case> cases = {
      {"add", [](auto a, auto b, Tape* t) { return add(a, b, t); },
       [](const oracle::DVec& a, const oracle::DVec& b) {
         oracle::DVec o(a.size());
         for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] + b[i];
         return o;
       },
       false},
      {"sub", [](auto a, auto b, Tape* t) { return sub(a, b, t); },
       [](const oracle::DVec& a, const oracle::DVec& b) {
         oracle::DVec o(a.size());
         for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] - b[i];
         return o;
       },
       false},
      {"mul", [](auto a, auto b, Tape* t) { return mul(a, b, t); },
       [](const oracle::DVec& a, const oracle::DVec& b) {
         oracle::DVec o(a.size());
         for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] * b[i];
         return o;
       },
       false},
      {"relu", [](auto a, auto, Tape* t) { return relu(a, t); },
       [](const oracle::DVec& a, const oracle::DVec&) { return oracle::relu(a); }, true},
      {"sigmoid", [](auto a, auto, Tape* t) { return sigmoid(a, t); },
       [](const oracle::DVec& a, const oracle::DVec&) { return oracle::sigmoid(a); }, true},
      {"abs", [](auto a, auto, Tape* t) { return vqa::abs(a, t); },
       [](const oracle::DVec& a, const oracle::DVec&) { return oracle::abs(a); }, true},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    const std::int64_t n = 64;
    auto a = make_input(n);
    auto b = make_input(n);
    auto probe = Tensor::uniform({n}, 0.25f, 1.0f, rng);

    Tape tape;
    auto out = c.op(a, b, &tape);
    auto loss = reduce_sum_all(mul(out, probe, &tape), &tape);
    tape.backward(loss);

    const oracle::DVec probe_d = oracle::to_double(probe);
    oracle::DVec theta = oracle::to_double(a);
    const oracle::DVec b_d = oracle::to_double(b);
    auto f = [&](const oracle::DVec& th) { return oracle::dot(c.ref(th, b_d), probe_d); };
    CHECK(oracle::max_grad_err(a, theta, 0, f) <= 1e-3);

    if (!c.unary) {
      oracle::DVec theta_b = b_d;
      const oracle::DVec a_d = oracle::to_double(a);
      auto fb = [&](const oracle::DVec& th) { return oracle::dot(c.ref(a_d, th), probe_d); };
      CHECK(oracle::max_grad_err(b, theta_b, 0, fb) <= 1e-3);
    }
  }
}

TEST_CASE("gradients of matmul, reductions and layout ops match finite differences") {
  Rng rng(321);

  SUBCASE("matmul") {
    auto a = Tensor::uniform({4, 6}, -1.0f, 1.0f, rng, true);
    auto b = Tensor::uniform({6, 3}, -1.0f, 1.0f, rng, true);
    auto probe = Tensor::uniform({4, 3}, 0.25f, 1.0f, rng);
    Tape tape;
    auto loss = reduce_sum_all(mul(matmul(a, b, &tape), probe, &tape), &tape);
    tape.backward(loss);

    const auto probe_d = oracle::to_double(probe);
    auto eval = [&](const oracle::DVec& av, const oracle::DVec& bv) {
      oracle::DVec out(12, 0.0);
      for (std::int64_t i = 0; i < 4; ++i)
        for (std::int64_t j = 0; j < 3; ++j) {
          double acc = 0.0;
          for (std::int64_t l = 0; l < 6; ++l) acc += av[i * 6 + l] * bv[l * 3 + j];
          out[static_cast<std::size_t>(i * 3 + j)] = acc;
        }
      return oracle::dot(out, probe_d);
    };
    oracle::DVec ta = oracle::to_double(a);
    const oracle::DVec tb = oracle::to_double(b);
    CHECK(oracle::max_grad_err(a, ta, 0, [&](const oracle::DVec& th) {
            return eval(th, tb);
          }) <= 1e-3);
    oracle::DVec tb2 = tb;
    const oracle::DVec ta2 = oracle::to_double(a);
    CHECK(oracle::max_grad_err(b, tb2, 0, [&](const oracle::DVec& th) {
            return eval(ta2, th);
          }) <= 1e-3);
  }

  SUBCASE("reduce mean over one axis") {
    auto a = Tensor::uniform({5, 4}, -1.0f, 1.0f, rng, true);
    auto probe = Tensor::uniform({4}, 0.25f, 1.0f, rng);
    Tape tape;
    auto loss = reduce_sum_all(mul(reduce_mean(a, {0}, false, &tape), probe, &tape), &tape);
    tape.backward(loss);

    const auto probe_d = oracle::to_double(probe);
    oracle::DVec theta = oracle::to_double(a);
    auto f = [&](const oracle::DVec& th) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < 4; ++j) {
        double m = 0.0;
        for (std::int64_t i = 0; i < 5; ++i) m += th[static_cast<std::size_t>(i * 4 + j)];
        acc += m / 5.0 * probe_d[static_cast<std::size_t>(j)];
      }
      return acc;
    };
    CHECK(oracle::max_grad_err(a, theta, 0, f) <= 1e-3);
  }

  SUBCASE("reshape, permute, concat keep gradients aligned") {
    auto a = Tensor::uniform({2, 3, 4}, -1.0f, 1.0f, rng, true);
    auto b = Tensor::uniform({2, 3, 4}, -1.0f, 1.0f, rng, true);
    auto probe = Tensor::uniform({3, 2, 8}, 0.25f, 1.0f, rng);
    Tape tape;
    // permute to [3,2,4], concat along the last axis, reshape flat.
    auto pa = permute(a, {1, 0, 2}, &tape);
    auto pb = permute(b, {1, 0, 2}, &tape);
    auto cat = concat(pa, pb, 2, &tape);
    auto loss = reduce_sum_all(mul(cat, probe, &tape), &tape);
    tape.backward(loss);

    const auto probe_d = oracle::to_double(probe);
    auto eval = [&](const oracle::DVec& av, const oracle::DVec& bv) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < 3; ++j)
        for (std::int64_t i = 0; i < 2; ++i)
          for (std::int64_t k = 0; k < 8; ++k) {
            const double v = k < 4 ? av[static_cast<std::size_t>((i * 3 + j) * 4 + k)]
                                   : bv[static_cast<std::size_t>((i * 3 + j) * 4 + k - 4)];
            acc += v * probe_d[static_cast<std::size_t>((j * 2 + i) * 8 + k)];
          }
      return acc;
    };
    oracle::DVec ta = oracle::to_double(a);
    const oracle::DVec tb = oracle::to_double(b);
    CHECK(oracle::max_grad_err(a, ta, 0, [&](const oracle::DVec& th) {
            return eval(th, tb);
          }) <= 1e-3);
  }
}

TEST_CASE("scalar broadcast gradients: the scalar side collects the sum") {
  auto s = Tensor::scalar(1.5f, true);
  auto x = Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}, true);
  Tape tape;
  auto loss = reduce_sum_all(mul(x, s, &tape), &tape);
  tape.backward(loss);
  CHECK(s->grad()[0] == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(x->grad()[1] == doctest::Approx(1.5).epsilon(1e-6));
}
