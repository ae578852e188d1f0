#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cit/kernels.hpp"
#include "cit/nn.hpp"

using namespace cit;
using namespace cit::nn;

namespace {

template <class F>
void check_grad(F&& fn, Tensor<double>& leaf, double tol = 1e-4, double h = 1e-5) {
  leaf.set_requires_grad(true);
  leaf.drop_grad();
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(fn());
  }
  double* d = leaf.data();
  const double* g = leaf.grad_data();
  for (int64_t i = 0; i < leaf.numel(); ++i) {
    const double orig = d[i];
    d[i] = orig + h;
    const double fp = fn().item();
    d[i] = orig - h;
    const double fm = fn().item();
    d[i] = orig;
    const double numeric = (fp - fm) / (2 * h);
    const double analytic = g ? g[i] : 0.0;
    CHECK(std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)) < tol);
  }
}

bool bits_equal(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<size_t>(a.numel())) == 0;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel") {
  Rng rng(1);
  auto x = Tensor<float>::uniform({1, 1, 5, 5}, rng, -1, 1);
  auto w = Tensor<float>::ones({1, 1, 1, 1});
  auto b = Tensor<float>::zeros({1});
  auto y = conv2d(x, w, b, 1, 0);
  CHECK(bits_equal(x, y));
}

TEST_CASE("conv2d: 3x3 ones kernel on 3x3 ones image, zero pad 1") {
  auto x = Tensor<float>::ones({1, 1, 3, 3});
  auto w = Tensor<float>::ones({1, 1, 3, 3});
  auto b = Tensor<float>::zeros({1});
  auto y = conv2d(x, w, b, 1, 1);
  REQUIRE(y.shape() == Shape{1, 1, 3, 3});
  // corners see 4 taps, edges 6, center 9
  CHECK(y.at({0, 0, 0, 0}) == 4);
  CHECK(y.at({0, 0, 0, 1}) == 6);
  CHECK(y.at({0, 0, 1, 1}) == 9);
  CHECK(y.at({0, 0, 2, 2}) == 4);
}

TEST_CASE("conv2d: stride-4 patchify halves twice") {
  auto x = Tensor<float>::zeros({1, 1, 256, 256});
  auto w = Tensor<float>::zeros({2, 1, 4, 4});
  auto b = Tensor<float>::zeros({2});
  auto y = conv2d(x, w, b, 4, 0);
  CHECK(y.shape() == Shape{1, 2, 64, 64});
  CHECK_THROWS_AS(conv2d(x, Tensor<float>::zeros({2, 3, 4, 4}), b, 4, 0), Error);
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(2);
  auto x = Tensor<double>::uniform({2, 3, 6, 5}, rng, -1, 1);
  auto w = Tensor<double>::uniform({4, 3, 3, 3}, rng, -0.5, 0.5);
  auto b = Tensor<double>::uniform({4}, rng, -0.5, 0.5);
  auto fn = [&]() { return mean(mul(conv2d(x, w, b, 1, 1), conv2d(x, w, b, 1, 1))); };
  check_grad(fn, x);
  check_grad(fn, w);
  check_grad(fn, b);
}

TEST_CASE("pad_reflect_br mirrors rows and columns") {
  auto x = Tensor<float>::from_vector({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = pad_reflect_br(x, 2, 1);
  REQUIRE(y.shape() == Shape{1, 1, 5, 4});
  // row 3 mirrors row 1, row 4 mirrors row 0; col 3 mirrors col 1
  CHECK(y.at({0, 0, 3, 0}) == 4);
  CHECK(y.at({0, 0, 4, 0}) == 1);
  CHECK(y.at({0, 0, 0, 3}) == 2);
  CHECK(y.at({0, 0, 4, 3}) == 2);
  CHECK_THROWS_AS(pad_reflect_br(x, 3, 0), Error);

  Rng rng(3);
  auto xd = Tensor<double>::uniform({1, 2, 4, 4}, rng, -1, 1);
  check_grad([&]() { return mean(mul(pad_reflect_br(xd, 2, 3), pad_reflect_br(xd, 2, 3))); }, xd);
}

TEST_CASE("layer_norm closed forms") {
  auto gamma = Tensor<float>::ones({3});
  auto beta = Tensor<float>::zeros({3});
  auto constant = Tensor<float>::from_vector({1, 3}, {5, 5, 5});
  auto out = layer_norm(constant, gamma, beta);
  for (int i = 0; i < 3; ++i) CHECK(out.data()[i] == doctest::Approx(0.0).epsilon(1e-6));

  auto two = layer_norm(Tensor<float>::from_vector({1, 2}, {1, 3}), Tensor<float>::ones({2}),
                        Tensor<float>::zeros({2}));
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(two.data()[0] == doctest::Approx(-expect).epsilon(1e-6));
  CHECK(two.data()[1] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("layer_norm normalizes each token") {
  Rng rng(4);
  auto x = Tensor<float>::uniform({4, 7, 16}, rng, -3, 3);
  auto out = layer_norm(x, Tensor<float>::ones({16}), Tensor<float>::zeros({16}));
  for (int64_t t = 0; t < 28; ++t) {
    double m = 0, v = 0;
    for (int64_t c = 0; c < 16; ++c) m += out.data()[t * 16 + c];
    m /= 16;
    for (int64_t c = 0; c < 16; ++c) {
      const double d = out.data()[t * 16 + c] - m;
      v += d * d;
    }
    v /= 16;
    CHECK(std::abs(m) < 1e-5);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("layer_norm affine gradients") {
  Rng rng(5);
  auto x = Tensor<double>::uniform({2, 5, 6}, rng, -2, 2);
  auto gamma = Tensor<double>::uniform({6}, rng, 0.5, 1.5);
  auto beta = Tensor<double>::uniform({6}, rng, -0.5, 0.5);
  auto fn = [&]() { return mean(mul(layer_norm(x, gamma, beta), layer_norm(x, gamma, beta))); };
  check_grad(fn, x);
  check_grad(fn, gamma);
  check_grad(fn, beta);
}

TEST_CASE("instance_norm_half: normalized half and identity half") {
  Rng rng(6);
  auto x = Tensor<float>::uniform({2, 6, 8, 8}, rng, -2, 2);
  auto gamma = Tensor<float>::ones({3});
  auto beta = Tensor<float>::zeros({3});
  auto out = instance_norm_half(x, gamma, beta);
  REQUIRE(out.shape() == x.shape());

  // normalized half: per-(sample,channel) map mean ~ 0
  for (int64_t n = 0; n < 2; ++n) {
    for (int64_t c = 0; c < 3; ++c) {
      double m = 0;
      for (int64_t i = 0; i < 64; ++i) m += out.data()[(n * 6 + c) * 64 + i];
      CHECK(std::abs(m / 64) < 1e-4);
    }
  }
  // identity half: bit-equal to the input slice
  for (int64_t n = 0; n < 2; ++n) {
    for (int64_t c = 3; c < 6; ++c) {
      const float* a = x.data() + (n * 6 + c) * 64;
      const float* b = out.data() + (n * 6 + c) * 64;
      CHECK(std::memcmp(a, b, 64 * sizeof(float)) == 0);
    }
  }
  CHECK_THROWS_AS(instance_norm_half(Tensor<float>::zeros({1, 3, 4, 4}), gamma, beta), Error);
}

TEST_CASE("instance_norm_half: constant channel collapses to beta") {
  auto x = Tensor<float>::from_vector({1, 2, 2, 2}, {7, 7, 7, 7, 1, 2, 3, 4});
  auto gamma = Tensor<float>::ones({1});
  auto beta = Tensor<float>::full({1}, 0.25f);
  auto out = instance_norm_half(x, gamma, beta);
  for (int i = 0; i < 4; ++i) CHECK(out.data()[i] == doctest::Approx(0.25).epsilon(1e-4));
  for (int i = 4; i < 8; ++i) CHECK(out.data()[i] == x.data()[i]);
}

TEST_CASE("window partition basics") {
  // 8x8 single window: tokens in row-major order
  Rng rng(7);
  auto x = Tensor<float>::uniform({1, 8, 8, 1}, rng, 0, 1);
  auto tok = window_partition(x, 8, 0);
  REQUIRE(tok.shape() == Shape{1, 64, 1});
  for (int64_t i = 0; i < 64; ++i) CHECK(tok.data()[i] == x.data()[i]);

  auto x2 = Tensor<float>::uniform({1, 16, 16, 3}, rng, 0, 1);
  auto tok2 = window_partition(x2, 8, 0);
  CHECK(tok2.shape() == Shape{4, 64, 3});
}

TEST_CASE("window round trip is bit-exact for both shifts") {
  Rng rng(8);
  for (int64_t shift : {int64_t(0), int64_t(4)}) {
    auto x = Tensor<float>::uniform({2, 16, 24, 5}, rng, -1, 1);
    auto tok = window_partition(x, 8, shift);
    auto back = window_reverse(tok, 8, shift, 2, 16, 24, 5);
    CHECK(bits_equal(x, back));
  }
}

TEST_CASE("attention mask blocks exactly the cross-region pairs") {
  const int64_t h = 8, w = 8, window = 4, shift = 2;
  auto mask = attention_mask<float>(h, w, window, shift);
  REQUIRE(mask.shape() == Shape{4, 16, 16});

  // independent oracle: region id by slice boundaries, compare pairwise
  auto region = [&](int64_t y, int64_t x) {
    const auto side = [&](int64_t v) { return v < h - window ? 0 : (v < h - shift ? 1 : 2); };
    return side(y) * 3 + side(x);
  };
  for (int64_t wi = 0; wi < 4; ++wi) {
    const int64_t wy = wi / 2, wx = wi % 2;
    for (int64_t a = 0; a < 16; ++a) {
      for (int64_t b = 0; b < 16; ++b) {
        const int64_t ya = wy * window + a / window, xa = wx * window + a % window;
        const int64_t yb = wy * window + b / window, xb = wx * window + b % window;
        const float expect = region(ya, xa) == region(yb, xb) ? 0.0f : -100.0f;
        CHECK(mask.at({wi, a, b}) == expect);
      }
    }
  }
}

TEST_CASE("attention: single token reduces to projected V") {
  Rng rng(9);
  WindowAttention<float> attn;
  attn.init(6, 2, 1, true, rng);
  auto tokens = Tensor<float>::uniform({3, 1, 6}, rng, -1, 1);
  auto out = attn.forward(tokens, Tensor<float>());

  // by hand: v = tokens * qkv_w[:, 12:18] + qkv_b[12:18], then proj
  auto v_w = slice(attn.qkv.w, 1, 12, 6);
  auto v_b = slice(attn.qkv.b, 0, 12, 6);
  auto v = add(matmul(tokens, v_w), v_b);
  auto expect = add(matmul(v, attn.proj.w), attn.proj.b);
  REQUIRE(out.shape() == expect.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-5));
  }
}

TEST_CASE("attention: -100 mask suppresses weights below 1e-9") {
  // softmax over [z, z-100]: second weight = 1/(1+e^100)
  auto logits = Tensor<float>::from_vector({1, 2}, {3.0f, 3.0f - 100.0f});
  auto sm = softmax_lastdim(logits);
  CHECK(sm.data()[1] < 1e-9);
  CHECK(sm.data()[0] > 1.0f - 1e-9);
}

TEST_CASE("attention parameter gradients") {
  Rng rng(10);
  WindowAttention<double> attn;
  attn.init(4, 2, 2, true, rng);
  auto grid = Tensor<double>::uniform({1, 4, 4, 4}, rng, -1, 1);
  auto mask = attention_mask<double>(4, 4, 2, 1);
  auto fn = [&]() {
    auto tokens = window_partition(grid, 2, 1);
    auto out = attn.forward(tokens, mask);
    return mean(mul(out, out));
  };
  check_grad(fn, grid);
  check_grad(fn, attn.qkv.w);
  check_grad(fn, attn.proj.w);
  check_grad(fn, attn.rel_bias_table);
}

TEST_CASE("channel attention: constant input stays constant, zeroed conv gives x/2") {
  Rng rng(11);
  ChannelAttention<float> ca;
  ca.init(6, 3, rng);
  auto x = Tensor<float>::ones({1, 6, 4, 4});
  auto y = ca.forward(x);
  for (int64_t c = 0; c < 6; ++c) {
    const float v0 = y.at({0, c, 0, 0});
    for (int64_t i = 0; i < 16; ++i) CHECK(y.data()[c * 16 + i] == doctest::Approx(v0));
  }

  kern::fill(ca.c2.w.data(), ca.c2.w.numel(), 0.0f);
  kern::fill(ca.c2.b.data(), ca.c2.b.numel(), 0.0f);
  auto xr = Tensor<float>::uniform({2, 6, 3, 3}, rng, -2, 2);
  auto half = ca.forward(xr);
  for (int64_t i = 0; i < xr.numel(); ++i) {
    CHECK(half.data()[i] == doctest::Approx(xr.data()[i] * 0.5f).epsilon(1e-6));
  }
}

TEST_CASE("cab and hinb blocks differentiate cleanly") {
  Rng rng(12);
  CABlock<double> cab;
  cab.init(6, 3, rng);
  auto x = Tensor<double>::uniform({1, 6, 4, 4}, rng, -1, 1);
  auto fn = [&]() {
    auto y = cab.forward(x);
    return mean(mul(y, y));
  };
  check_grad(fn, x);
  check_grad(fn, cab.ca.c1.w);

  HinBlock<double> hinb;
  hinb.init(6, rng);
  auto fn2 = [&]() {
    auto y = hinb.forward(x);
    return mean(mul(y, y));
  };
  check_grad(fn2, x);
  check_grad(fn2, hinb.in_gamma);
  check_grad(fn2, hinb.conv1.w);
}

TEST_CASE("pixel shuffle shapes and index map") {
  auto a = Tensor<float>::zeros({1, 16, 1, 1});
  CHECK(pixel_shuffle(a, 4).shape() == Shape{1, 1, 4, 4});

  Rng rng(13);
  auto x = Tensor<float>::uniform({1, 4, 2, 2}, rng, -1, 1);
  auto y = pixel_shuffle(x, 2);
  REQUIRE(y.shape() == Shape{1, 1, 4, 4});
  // oracle: out[yy][xx] = in[(yy%2)*2 + xx%2][yy/2][xx/2]
  for (int64_t yy = 0; yy < 4; ++yy) {
    for (int64_t xx = 0; xx < 4; ++xx) {
      const int64_t c = (yy % 2) * 2 + (xx % 2);
      CHECK(y.at({0, 0, yy, xx}) == x.at({0, c, yy / 2, xx / 2}));
    }
  }
  CHECK_THROWS_AS(pixel_shuffle(Tensor<float>::zeros({1, 3, 2, 2}), 2), Error);
}

TEST_CASE("pixel shuffle is a bijection") {
  Rng rng(14);
  auto x = Tensor<float>::uniform({2, 18, 5, 7}, rng, -1, 1);
  auto back = pixel_unshuffle(pixel_shuffle(x, 3), 3);
  CHECK(bits_equal(x, back));
}

TEST_CASE("activation values") {
  auto r = relu(Tensor<float>::from_vector({2}, {-1, 2}));
  CHECK(r.data()[0] == 0);
  CHECK(r.data()[1] == 2);
  CHECK(sigmoid(Tensor<float>::zeros({1})).data()[0] == doctest::Approx(0.5));

  // softmax shift invariance
  auto z = Tensor<float>::from_vector({1, 3}, {0.3f, 1.1f, -0.4f});
  auto s1 = softmax_lastdim(z);
  auto s2 = softmax_lastdim(add(z, 7.5f));
  for (int i = 0; i < 3; ++i) CHECK(s1.data()[i] == doctest::Approx(s2.data()[i]).epsilon(1e-6));
}
