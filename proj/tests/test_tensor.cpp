#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cit/tensor.hpp"

using namespace cit;

namespace {

// independent central-difference gradient for a scalar function of one leaf
template <class F>
std::vector<double> fd_grad(F&& fn, Tensor<double>& leaf, double h = 1e-5) {
  std::vector<double> g(static_cast<size_t>(leaf.numel()));
  double* d = leaf.data();
  for (int64_t i = 0; i < leaf.numel(); ++i) {
    const double orig = d[i];
    d[i] = orig + h;
    const double fp = fn().item();
    d[i] = orig - h;
    const double fm = fn().item();
    d[i] = orig;
    g[static_cast<size_t>(i)] = (fp - fm) / (2 * h);
  }
  return g;
}

double max_rel_err(const double* analytic, const std::vector<double>& numeric) {
  double worst = 0;
  for (size_t i = 0; i < numeric.size(); ++i) {
    const double a = analytic ? analytic[i] : 0.0;
    const double rel = std::abs(a - numeric[i]) / std::max(1.0, std::abs(numeric[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

// checks tape gradients of fn(leaf) against finite differences
template <class F>
void check_grad(F&& fn, Tensor<double>& leaf, double tol = 1e-6) {
  leaf.set_requires_grad(true);
  leaf.drop_grad();
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    Tensor<double> loss = fn();
    tape.backward(loss);
  }
  auto numeric = fd_grad(fn, leaf);
  CHECK(max_rel_err(leaf.grad_data(), numeric) < tol);
}

}  // namespace

TEST_CASE("elementwise basics") {
  auto a = Tensor<float>::from_vector({2}, {1, 2});
  auto b = Tensor<float>::from_vector({2}, {3, 4});
  auto c = add(a, b);
  CHECK(c.data()[0] == 4);
  CHECK(c.data()[1] == 6);

  auto m = mul(Tensor<float>::from_vector({2}, {2, 3}), 0.0f);
  CHECK(m.data()[0] == 0);
  CHECK(m.data()[1] == 0);
}

TEST_CASE("broadcast matches trailing-dim oracle") {
  // reference: enumerate output indices, map each dim to source index 0 when
  // the source extent is 1
  Rng rng(1);
  auto a = Tensor<double>::uniform({2, 1, 3}, rng, -1, 1);
  auto b = Tensor<double>::uniform({4, 3}, rng, -1, 1);
  auto c = add(a, b);
  REQUIRE(c.shape() == Shape{2, 4, 3});
  for (int64_t i = 0; i < 2; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      for (int64_t k = 0; k < 3; ++k) {
        const double expect = a.at({i, 0, k}) + b.at({j, k});
        CHECK(c.at({i, j, k}) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(add(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({4})), Error);
}

TEST_CASE("division by exact zero is an error") {
  auto a = Tensor<float>::ones({2});
  auto b = Tensor<float>::from_vector({2}, {1, 0});
  CHECK_THROWS_AS(div(a, b), Error);
  CHECK_THROWS_AS(div(a, 0.0f), Error);
}

TEST_CASE("matmul identity and dot product") {
  auto eye = Tensor<float>::from_vector({2, 2}, {1, 0, 0, 1});
  auto m = Tensor<float>::from_vector({2, 2}, {1, 2, 3, 4});
  auto p = matmul(eye, m);
  for (int64_t i = 0; i < 4; ++i) CHECK(p.data()[i] == m.data()[i]);

  auto row = Tensor<float>::from_vector({1, 2}, {1, 2});
  auto col = Tensor<float>::from_vector({2, 1}, {3, 4});
  CHECK(matmul(row, col).data()[0] == 11);
}

TEST_CASE("matmul equals naive triple loop") {
  Rng rng(7);
  auto a = Tensor<double>::uniform({2, 3}, rng, -2, 2);
  auto b = Tensor<double>::uniform({3, 4}, rng, -2, 2);
  auto c = matmul(a, b);
  for (int64_t i = 0; i < 2; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      double acc = 0;
      for (int64_t k = 0; k < 3; ++k) acc += a.at({i, k}) * b.at({k, j});
      CHECK(c.at({i, j}) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(matmul(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2, 4})), Error);
}

TEST_CASE("batched matmul broadcasts leading dims") {
  Rng rng(9);
  auto a = Tensor<double>::uniform({2, 2, 3}, rng, -1, 1);
  auto b = Tensor<double>::uniform({3, 4}, rng, -1, 1);
  auto c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 2, 4});
  for (int64_t n = 0; n < 2; ++n) {
    for (int64_t i = 0; i < 2; ++i) {
      for (int64_t j = 0; j < 4; ++j) {
        double acc = 0;
        for (int64_t k = 0; k < 3; ++k) acc += a.at({n, i, k}) * b.at({k, j});
        CHECK(c.at({n, i, j}) == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("reductions") {
  auto v = Tensor<float>::from_vector({4}, {1, 2, 3, 4});
  CHECK(mean(v).item() == doctest::Approx(2.5));

  auto m = Tensor<float>::from_vector({2, 2}, {1, 2, 3, 4});
  auto s = sum(m, {0});
  REQUIRE(s.shape() == Shape{2});
  CHECK(s.data()[0] == 4);
  CHECK(s.data()[1] == 6);

  CHECK_THROWS_AS(sum(m, {2}), Error);
  CHECK_THROWS_AS(sum(m, {0, 0}), Error);
}

TEST_CASE("max backward routes gradient to argmax only") {
  auto x = Tensor<double>::from_vector({4}, {0.3, 0.9, 0.1, 0.4});
  x.set_requires_grad(true);
  auto fn = [&]() { return reduce_max(x); };
  check_grad(fn, x);
  // direct: gradient is one-hot at the max position
  x.drop_grad();
  Tape<double> tape;
  TapeScope<double> scope(tape);
  tape.backward(reduce_max(x));
  CHECK(x.grad_data()[0] == 0);
  CHECK(x.grad_data()[1] == 1);
  CHECK(x.grad_data()[2] == 0);
  CHECK(x.grad_data()[3] == 0);
}

TEST_CASE("reshape and permute") {
  auto m = Tensor<float>::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
  auto r = reshape(m, {3, 2});
  for (int64_t i = 0; i < 6; ++i) CHECK(r.data()[i] == static_cast<float>(i + 1));
  CHECK_THROWS_AS(reshape(m, {4, 2}), Error);

  auto t = permute(Tensor<float>::from_vector({2, 2}, {1, 2, 3, 4}), {1, 0});
  CHECK(t.data()[0] == 1);
  CHECK(t.data()[1] == 3);
  CHECK(t.data()[2] == 2);
  CHECK(t.data()[3] == 4);
  CHECK_THROWS_AS(permute(m, {0, 0}), Error);
  CHECK_THROWS_AS(permute(m, {0}), Error);
}

TEST_CASE("permute composed with inverse is identity") {
  Rng rng(3);
  auto x = Tensor<double>::uniform({3, 4, 5}, rng, -1, 1);
  std::vector<int> perm = {2, 0, 1};
  std::vector<int> inv(3);
  for (int i = 0; i < 3; ++i) inv[perm[static_cast<size_t>(i)]] = i;
  auto back = permute(permute(x, perm), inv);
  REQUIRE(back.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(back.data()[i] == x.data()[i]);
}

TEST_CASE("backward basics") {
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto x = Tensor<double>::from_vector({3}, {1, 2, 3});
  x.set_requires_grad(true);
  auto loss = sum(x);
  tape.backward(loss);
  for (int i = 0; i < 3; ++i) CHECK(x.grad_data()[i] == 1);

  auto y = Tensor<double>::from_vector({2}, {1, 2});
  y.set_requires_grad(true);
  auto loss2 = sum(mul(y, y));
  tape.backward(loss2);
  CHECK(y.grad_data()[0] == doctest::Approx(2));
  CHECK(y.grad_data()[1] == doctest::Approx(4));
}

TEST_CASE("backward error surface") {
  auto x = Tensor<float>::ones({2});
  CHECK_THROWS_AS(backward(x), Error);  // no active tape
  Tape<float> tape;
  TapeScope<float> scope(tape);
  x.set_requires_grad(true);
  auto vec = add(x, 1.0f);
  CHECK_THROWS_AS(tape.backward(vec), Error);  // not scalar
  auto leaf = Tensor<float>::ones({});
  CHECK_THROWS_AS(tape.backward(leaf), Error);  // scalar but not on the tape
}

TEST_CASE("repeated backward accumulates into leaves") {
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto x = Tensor<double>::from_vector({2}, {3, 5});
  x.set_requires_grad(true);
  auto loss = sum(mul(x, x));
  tape.backward(loss);
  tape.backward(loss);
  CHECK(x.grad_data()[0] == doctest::Approx(12));  // 2 * 2x
  CHECK(x.grad_data()[1] == doctest::Approx(20));
}

TEST_CASE("finite differences across every op") {
  Rng rng(11);
  auto x = Tensor<double>::uniform({2, 3, 4}, rng, 0.2, 1.5);

  check_grad([&]() { return sum(add(x, x)); }, x);
  check_grad([&]() { return sum(mul(x, x)); }, x);
  check_grad([&]() { return sum(div(Tensor<double>::ones({2, 3, 4}), x)); }, x);
  check_grad([&]() { return sum(neg(x)); }, x);
  check_grad([&]() { return sum(sub(x, mul(x, 0.5))); }, x);
  check_grad([&]() { return sum(mul(mean(x, {1}, true), 2.0)); }, x);
  check_grad([&]() { return sum(reshape(x, {6, 4})); }, x);
  check_grad([&]() { return sum(mul(permute(x, {2, 0, 1}), 0.7)); }, x);
  check_grad([&]() { return sum(slice(x, 1, 1, 2)); }, x);
  check_grad([&]() { return sum(relu(sub(x, 0.8))); }, x);
  check_grad([&]() { return sum(leaky_relu(sub(x, 0.8), 0.2)); }, x);
  check_grad([&]() { return sum(sigmoid(x)); }, x);
  check_grad([&]() { return sum(gelu(x)); }, x);
  check_grad([&]() { return sum(cit::exp(mul(x, 0.3))); }, x);
  check_grad([&]() { return sum(cit::log(x)); }, x);
  check_grad([&]() { return sum(cit::sqrt(x)); }, x);
  check_grad([&]() { return sum(cit::abs(sub(x, 0.8))); }, x);
  check_grad([&]() { return sum(mul(softmax_lastdim(x), x)); }, x);
  check_grad([&]() { return sum(roll2d(x, 1, 2, 1, 2)); }, x);

  // concat and gather
  auto y = Tensor<double>::uniform({2, 2, 4}, rng, 0.2, 1.5);
  check_grad([&]() { return sum(mul(concat<double>({slice(x, 1, 0, 2), x}, 1), 0.3)); }, x);
  auto table = Tensor<double>::uniform({5, 3}, rng, -1, 1);
  auto idx = std::make_shared<std::vector<int64_t>>(std::vector<int64_t>{0, 4, 2, 4});
  table.set_requires_grad(true);
  check_grad([&]() { return sum(mul(gather_rows(table, idx), 2.0)); }, table);

  // matmul both sides
  auto a = Tensor<double>::uniform({3, 4}, rng, -1, 1);
  auto b = Tensor<double>::uniform({4, 2}, rng, -1, 1);
  a.set_requires_grad(true);
  check_grad([&]() { return sum(matmul(a, b)); }, a);
  a.set_requires_grad(false);
  b.set_requires_grad(true);
  check_grad([&]() { return sum(matmul(a, b)); }, b);

  // broadcast backward reduces to the leaf shape
  auto small = Tensor<double>::uniform({4}, rng, 0.5, 1.5);
  check_grad([&]() { return sum(mul(x, small)); }, small);
  (void)y;
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(13);
  auto x = Tensor<double>::uniform({5}, rng, 0.1, 1.0);
  x.set_requires_grad(true);

  auto grad_of = [&](auto&& fn) {
    x.drop_grad();
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(fn());
    std::vector<double> g(x.grad_data(), x.grad_data() + x.numel());
    return g;
  };

  auto f = [&]() { return sum(mul(x, x)); };
  auto g = [&]() { return sum(sigmoid(x)); };
  const double ca = 2.5, cb = -1.25;
  auto combo = [&]() { return add(mul(f(), ca), mul(g(), cb)); };

  auto gf = grad_of(f), gg = grad_of(g), gc = grad_of(combo);
  for (size_t i = 0; i < gf.size(); ++i) {
    CHECK(gc[i] == doctest::Approx(ca * gf[i] + cb * gg[i]).epsilon(1e-12));
  }
}

TEST_CASE("tape determinism: same seed, same sequence, identical bits") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    auto x = Tensor<float>::uniform({4, 4}, rng, -1, 1);
    x.set_requires_grad(true);
    Tape<float> tape;
    TapeScope<float> scope(tape);
    auto y = sum(mul(sigmoid(matmul(x, x)), 0.5f));
    tape.backward(y);
    std::vector<float> out(x.grad_data(), x.grad_data() + x.numel());
    out.push_back(y.item());
    return out;
  };
  auto a = run(99), b = run(99);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("broadcast backward leaves grad shaped like the leaf") {
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto big = Tensor<double>::ones({2, 3, 4});
  auto small = Tensor<double>::ones({3, 1});
  small.set_requires_grad(true);
  tape.backward(sum(mul(big, small)));
  REQUIRE(small.has_grad());
  // each (row) element of small multiplies 2*4 elements of big
  CHECK(small.grad_data()[0] == doctest::Approx(8));
  CHECK(small.grad_data()[1] == doctest::Approx(8));
  CHECK(small.grad_data()[2] == doctest::Approx(8));
}

TEST_CASE("finite-check mode raises on non-finite forward values") {
  set_finite_checks(true);
  auto x = Tensor<float>::full({2}, 1e30f);
  CHECK_THROWS_AS(mul(x, x), Error);
  set_finite_checks(false);
  auto y = mul(x, x);  // release semantics: propagate
  CHECK(std::isinf(y.data()[0]));
}

TEST_CASE("custom recorded op participates in backward") {
  Tape<double> tape;
  TapeScope<double> scope(tape);
  auto x = Tensor<double>::from_vector({2}, {2, 3});
  x.set_requires_grad(true);
  // out = x * 3 with a hand-written backward rule
  Tensor<double> out({2});
  for (int i = 0; i < 2; ++i) out.data()[i] = 3 * x.data()[i];
  record_custom(out, {x}, [x, out]() {
    Tensor<double> xx = x;
    xx.ensure_grad();
    for (int i = 0; i < 2; ++i) xx.grad_data()[i] += 3 * out.grad_view().data()[i];
  });
  tape.backward(sum(out));
  CHECK(x.grad_data()[0] == 3);
  CHECK(x.grad_data()[1] == 3);
}
