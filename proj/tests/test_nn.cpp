#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ccnn/config.hpp"
#include "ccnn/nn.hpp"
#include "ccnn/oracle.hpp"
#include "test_util.hpp"

using namespace ccnn;
using testutil::bitwise_equal;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("conv2d with a 1x1 identity kernel is the identity") {
  const Tensor4<double> x = random_tensor(Dims4{2, 1, 4, 4}, 7);
  Tensor4<double> w(1, 1, 1, 1);
  w.data = {1.0};
  const auto y = conv2d_forward(x, w, {0.0}, Padding::Same);
  CHECK(bitwise_equal(y, x));
}

TEST_CASE("valid 2x2 ones kernel sums the window") {
  Tensor4<double> x(1, 1, 2, 2);
  x.data = {1, 2, 3, 4};
  Tensor4<double> w(1, 1, 2, 2);
  w.data = {1, 1, 1, 1};
  const auto y = conv2d_forward(x, w, {0.0}, Padding::Valid);
  CHECK(y.dims == Dims4{1, 1, 1, 1});
  CHECK(y.data[0] == 10.0);
}

TEST_CASE("conv2d matches the naive oracle on randomized shapes") {
  struct Case {
    Dims4 x;
    int64_t f, k;
    Padding pad;
  };
  const Case cases[] = {
      {{2, 3, 6, 6}, 4, 3, Padding::Same},  {{1, 1, 5, 5}, 2, 5, Padding::Same},
      {{3, 2, 7, 5}, 3, 3, Padding::Same},  {{2, 3, 6, 6}, 4, 3, Padding::Valid},
      {{1, 2, 8, 8}, 5, 5, Padding::Valid}, {{2, 1, 4, 7}, 1, 4, Padding::Valid},
      {{1, 4, 9, 9}, 2, 1, Padding::Same},
  };
  uint64_t seed = 211;
  for (const auto& c : cases) {
    const Tensor4<double> x = random_tensor(c.x, seed++);
    const Tensor4<double> w = random_tensor(Dims4{c.f, c.x.c, c.k, c.k}, seed++);
    std::vector<double> bias;
    Rng rng(seed++);
    for (int64_t i = 0; i < c.f; ++i) bias.push_back(rng.uniform(-0.5, 0.5));
    const auto got = conv2d_forward(x, w, bias, c.pad);
    const auto want = oracle::naive_conv2d(x, w, bias, c.pad);
    CHECK(got.dims == want.dims);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("conv2d rejects mismatched channels and oversized valid kernels") {
  const Tensor4<double> x = random_tensor(Dims4{1, 2, 4, 4}, 5);
  const Tensor4<double> w = random_tensor(Dims4{1, 3, 3, 3}, 6);
  CHECK_THROWS_AS(conv2d_forward(x, w, {0.0}, Padding::Same), ShapeError);
  const Tensor4<double> w2 = random_tensor(Dims4{1, 2, 5, 5}, 7);
  CHECK_THROWS_AS(conv2d_forward(x, w2, {0.0}, Padding::Valid), ShapeError);
  const Tensor4<double> w3 = random_tensor(Dims4{1, 2, 2, 2}, 8);
  CHECK_THROWS_AS(conv2d_forward(x, w3, {0.0}, Padding::Same), ShapeError);  // even same kernel
}

TEST_CASE("conv2d backward: bias grad is the per-channel sum, zero grad gives zeros") {
  const Tensor4<double> x = random_tensor(Dims4{2, 2, 5, 5}, 9);
  const Tensor4<double> w = random_tensor(Dims4{3, 2, 3, 3}, 10);
  Tensor4<double> g = random_tensor(Dims4{2, 3, 5, 5}, 11);
  auto grads = conv2d_backward(x, w, Padding::Same, g);
  for (int64_t f = 0; f < 3; ++f) {
    double sum = 0;
    for (int64_t n = 0; n < 2; ++n)
      for (int64_t i = 0; i < 5; ++i)
        for (int64_t j = 0; j < 5; ++j) sum += g.at(n, f, i, j);
    CHECK(grads.bias[static_cast<size_t>(f)] == doctest::Approx(sum).epsilon(1e-12));
  }
  Tensor4<double> zero(g.dims);
  auto zg = conv2d_backward(x, w, Padding::Same, zero);
  for (double v : zg.x.data) CHECK(v == 0.0);
  for (double v : zg.weights.data) CHECK(v == 0.0);
  for (double v : zg.bias) CHECK(v == 0.0);
}

TEST_CASE("relu") {
  Tensor4<double> x(1, 3, 1, 1);
  x.data = {-1, 0, 2};
  CHECK(relu_forward(x).data == std::vector<double>{0, 0, 2});
  Tensor4<double> g(1, 3, 1, 1);
  g.data = {5, 5, 5};
  CHECK(relu_backward(x, g).data == std::vector<double>{0, 0, 5});
}

TEST_CASE("maxpool 2x2 stride 2 pinned example and tie rule") {
  Tensor4<double> x(1, 1, 2, 2);
  x.data = {1, 2, 3, 4};
  std::vector<int32_t> argmax;
  const auto y = maxpool2d_forward(x, 2, 2, &argmax);
  CHECK(y.dims == Dims4{1, 1, 1, 1});
  CHECK(y.data[0] == 4.0);
  CHECK(argmax[0] == 3);

  Tensor4<double> t(1, 1, 2, 2);
  t.data = {7, 7, 7, 7};  // tie: first index in row-major scan wins
  maxpool2d_forward(t, 2, 2, &argmax);
  CHECK(argmax[0] == 0);
}

TEST_CASE("maxpool window 3 stride 2 overlaps and scatters correctly") {
  const Tensor4<double> x = random_tensor(Dims4{1, 1, 5, 5}, 12);
  std::vector<int32_t> argmax;
  const auto y = maxpool2d_forward(x, 3, 2, &argmax);
  CHECK(y.dims == Dims4{1, 1, 2, 2});
  const Tensor4<double> g = random_tensor(y.dims, 13);
  const auto gx = maxpool2d_backward(x.dims, g, argmax);
  double in_sum = 0, out_sum = 0;
  for (double v : gx.data) in_sum += v;
  for (double v : g.data) out_sum += v;
  CHECK(in_sum == doctest::Approx(out_sum).epsilon(1e-12));
  CHECK_THROWS_AS(maxpool2d_forward(x, 6, 2, nullptr), ShapeError);
}

TEST_CASE("flatten preserves batch and lays out (C,H,W) row-major") {
  const Tensor4<double> x = random_tensor(Dims4{2, 3, 2, 2}, 14);
  const auto y = flatten_forward(x);
  CHECK(y.dims == Dims4{2, 12, 1, 1});
  CHECK(y.data == x.data);
  CHECK(bitwise_equal(flatten_backward(x.dims, y), x));
}

TEST_CASE("dense forward matches manual product") {
  Tensor4<double> x(1, 2, 1, 1);
  x.data = {1, 2};
  Tensor4<double> w(3, 2, 1, 1);
  w.data = {1, 0, 0, 1, 1, 1};
  const auto y = dense_forward(x, w, {10, 20, 30});
  CHECK(y.data == std::vector<double>{11, 22, 33});
  CHECK_THROWS_AS(dense_forward(random_tensor(Dims4{1, 2, 2, 2}, 1), w, {0, 0, 0}), ShapeError);
}

TEST_CASE("uniform logits give loss ln K") {
  Tensor4<double> logits(2, 5, 1, 1);
  for (auto& v : logits.data) v = 0.7;
  const auto res = softmax_cross_entropy(logits, {0, 3});
  CHECK(res.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("softmax is stable under large logit offsets") {
  Tensor4<double> logits(1, 3, 1, 1);
  logits.data = {1000.0, 1001.0, 1002.0};
  const auto p = softmax(logits);
  double sum = 0;
  for (double v : p.data) {
    CHECK(std::isfinite(v));
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rmse of identical tensors is zero with zero grad") {
  const Tensor4<double> x = random_tensor(Dims4{2, 3, 1, 1}, 15);
  const auto res = rmse(x, x);
  CHECK(res.loss == 0.0);
  for (double v : res.grad.data) CHECK(v == 0.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g{0.0, 0.0, 0.0};
  AdamState<double> st;
  adam_step(p.data(), g.data(), 3, st, AdamConfig{}, 1e-3);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam: constant gradient gives the closed-form step every iteration") {
  // with g constant, bias-corrected moments are exactly g and g^2, so each
  // update is alpha * g / (|g| + eps)
  const double g = 0.37, alpha = 1e-2, eps = 1e-8;
  AdamConfig cfg;
  cfg.eps = eps;
  std::vector<double> p{0.0};
  const std::vector<double> gv{g};
  AdamState<double> st;
  double prev = p[0];
  for (int t = 0; t < 200; ++t) {
    adam_step(p.data(), gv.data(), 1, st, cfg, alpha);
    const double step = prev - p[0];
    CHECK(step == doctest::Approx(alpha * g / (g + eps)).epsilon(1e-12));
    CHECK(std::abs(step) <= alpha);
    prev = p[0];
  }
}

TEST_CASE("adam is bitwise deterministic for a fixed seed") {
  auto run = [] {
    Rng rng(77);
    std::vector<double> p(32), g(32);
    for (auto& v : p) v = rng.uniform(-1, 1);
    AdamState<double> st;
    AdamConfig cfg;
    for (int t = 0; t < 50; ++t) {
      for (size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1, 1);
      adam_step(p.data(), g.data(), static_cast<int64_t>(p.size()), st, cfg, 3e-3);
    }
    return p;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);
}

TEST_CASE("lr schedule decays tenfold at each milestone") {
  const std::vector<int64_t> ms{10, 20};
  CHECK(lr_schedule(0, 0.1, ms) == doctest::Approx(0.1));
  CHECK(lr_schedule(9, 0.1, ms) == doctest::Approx(0.1));
  CHECK(lr_schedule(10, 0.1, ms) == doctest::Approx(0.01));
  CHECK(lr_schedule(19, 0.1, ms) == doctest::Approx(0.01));
  CHECK(lr_schedule(20, 0.1, ms) == doctest::Approx(0.001));
  CHECK(lr_schedule(1000, 0.1, ms) == doctest::Approx(0.001));
}

TEST_CASE("count_params pinned examples") {
  // conv C_in=8, F=16, k=3: 1152 weights (no bias in the weight column)
  {
    ModelSpec spec;
    spec.layers = {LayerSpec{.kind = LayerKind::Conv, .filters = 16, .kernel = 3}};
    const auto counts = count_params(spec, InputShape{8, 8, 8, 0});
    CHECK(counts[0].weights == 1152);
    CHECK(counts[0].biases == 16);
  }
  // two-conv chain F=16/C=16: layer2 = 2304 weights; half filters + roll
  // keeps it at 2304
  {
    ModelSpec spec;
    spec.layers = {LayerSpec{.kind = LayerKind::Conv, .filters = 16, .kernel = 3},
                   LayerSpec{.kind = LayerKind::Conv, .filters = 16, .kernel = 3}};
    const auto counts = count_params(spec, InputShape{16, 8, 8, 0});
    CHECK(counts[1].weights == 2304);

    ModelSpec rolled;
    rolled.layers = {LayerSpec{.kind = LayerKind::Slice},
                     LayerSpec{.kind = LayerKind::Conv, .filters = 8, .kernel = 3},
                     LayerSpec{.kind = LayerKind::Roll},
                     LayerSpec{.kind = LayerKind::Conv, .filters = 8, .kernel = 3},
                     LayerSpec{.kind = LayerKind::Roll},
                     LayerSpec{.kind = LayerKind::Stack}};
    const auto rcounts = count_params(rolled, InputShape{16, 8, 8, 0});
    CHECK(rcounts[3].weights == 8 * 32 * 9);  // sees 4x8 channels after the roll
    CHECK(rcounts[3].weights == 2304);
  }
}

TEST_CASE("roll-all quarter filters divide every intermediate conv by 4") {
  for (int64_t f : {8, 16, 32}) {
    ModelSpec base;
    base.layers = {LayerSpec{.kind = LayerKind::Conv, .filters = f, .kernel = 3},
                   LayerSpec{.kind = LayerKind::Conv, .filters = f, .kernel = 3},
                   LayerSpec{.kind = LayerKind::Conv, .filters = f, .kernel = 3}};
    ModelSpec quarter;
    quarter.layers = {LayerSpec{.kind = LayerKind::Slice}};
    for (int i = 0; i < 3; ++i) {
      quarter.layers.push_back(LayerSpec{.kind = LayerKind::Conv, .filters = f / 4, .kernel = 3});
      quarter.layers.push_back(LayerSpec{.kind = LayerKind::Roll});
    }
    quarter.layers.push_back(LayerSpec{.kind = LayerKind::Stack});
    const auto cb = count_params(base, InputShape{f, 12, 12, 0});
    const auto cq = count_params(quarter, InputShape{f, 12, 12, 0});
    // every conv: the roll restores the channel count, so weights drop 4x
    for (int i = 0; i < 3; ++i) {
      int64_t bw = cb[static_cast<size_t>(i)].weights;
      int64_t qw = cq[static_cast<size_t>(1 + 2 * i)].weights;
      CHECK(qw * 4 == bw);
    }
  }
}

TEST_CASE("loss decreases over the first 50 adam steps on a separable toy problem") {
  // two linearly separable 2-d blobs, dense(2) + softmax
  Rng rng(1234);
  const int64_t n = 32;
  Tensor4<double> x(n, 2, 1, 1);
  std::vector<int32_t> labels(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int32_t cls = static_cast<int32_t>(i % 2);
    labels[static_cast<size_t>(i)] = cls;
    x.at(i, 0, 0, 0) = rng.normal() * 0.3 + (cls ? 2.0 : -2.0);
    x.at(i, 1, 0, 0) = rng.normal() * 0.3;
  }
  Tensor4<double> w(2, 2, 1, 1);
  init_uniform_fanin(w.data.data(), 4, 2, rng);
  std::vector<double> b{0.0, 0.0};
  AdamState<double> ws, bs;
  AdamConfig cfg;
  std::vector<double> losses;
  for (int t = 0; t < 50; ++t) {
    const auto out = dense_forward(x, w, b);
    const auto res = softmax_cross_entropy(out, labels);
    losses.push_back(res.loss);
    auto g = dense_backward(x, w, res.grad);
    adam_step(w.data.data(), g.weights.data.data(), 4, ws, cfg, 0.05);
    adam_step(b.data(), g.bias.data(), 2, bs, cfg, 0.05);
  }
  CHECK(losses.back() < losses.front());
  CHECK(losses.back() < 0.1);
}
