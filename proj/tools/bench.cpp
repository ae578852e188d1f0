// Benchmarks the OpenMP kernels against the serial reference and reports
// per-kernel speedups plus an end-to-end model forward/backward comparison.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "cit/kernels.hpp"
#include "cit/losses.hpp"
#include "cit/model.hpp"

using namespace cit;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
  fn();  // warm up
  const auto t0 = clock_type::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double>(t1 - t0).count() * 1000.0 / iters;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms   x%.2f\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("kernel benchmark: serial reference vs OpenMP (%d threads)\n",
              kern::thread_count());
  std::printf("%-28s %13s %13s %8s\n", "kernel", "serial", "parallel", "speedup");

  Rng rng(1);

  {
    const int64_t m = 256, k = 256, n = 256;
    auto a = Tensor<float>::uniform({m, k}, rng, -1, 1);
    auto b = Tensor<float>::uniform({k, n}, rng, -1, 1);
    std::vector<float> o(static_cast<size_t>(m * n));
    const int64_t aoff = 0, boff = 0;
    row("matmul 256^3",
        time_ms([&]() { kern::serial::matmul(a.data(), b.data(), o.data(), 1, m, k, n, &aoff, &boff); }, 5),
        time_ms([&]() { kern::par::matmul(a.data(), b.data(), o.data(), 1, m, k, n, &aoff, &boff); }, 5));
  }

  {
    const int64_t n = 2, ci = 32, h = 64, w = 64, co = 32, kk = 3, stride = 1, pad = 1;
    auto x = Tensor<float>::uniform({n, ci, h, w}, rng, -1, 1);
    auto wt = Tensor<float>::uniform({co, ci, kk, kk}, rng, -1, 1);
    auto b = Tensor<float>::uniform({co}, rng, -1, 1);
    std::vector<float> y(static_cast<size_t>(n * co * h * w));
    std::vector<float> gx(static_cast<size_t>(n * ci * h * w));
    std::vector<float> gw(static_cast<size_t>(co * ci * kk * kk));
    std::vector<float> gb(static_cast<size_t>(co));
    row("conv2d 3x3 fwd",
        time_ms([&]() {
          kern::serial::conv2d_fwd(x.data(), wt.data(), b.data(), y.data(), n, ci, h, w, co, kk,
                                   kk, stride, pad, h, w);
        }, 3),
        time_ms([&]() {
          kern::par::conv2d_fwd(x.data(), wt.data(), b.data(), y.data(), n, ci, h, w, co, kk, kk,
                                stride, pad, h, w);
        }, 3));
    row("conv2d 3x3 bwd input",
        time_ms([&]() {
          kern::serial::conv2d_bwd_input(y.data(), wt.data(), gx.data(), n, ci, h, w, co, kk, kk,
                                         stride, pad, h, w);
        }, 3),
        time_ms([&]() {
          kern::par::conv2d_bwd_input(y.data(), wt.data(), gx.data(), n, ci, h, w, co, kk, kk,
                                      stride, pad, h, w);
        }, 3));
    row("conv2d 3x3 bwd weight",
        time_ms([&]() {
          kern::serial::conv2d_bwd_weight(y.data(), x.data(), gw.data(), gb.data(), n, ci, h, w,
                                          co, kk, kk, stride, pad, h, w);
        }, 3),
        time_ms([&]() {
          kern::par::conv2d_bwd_weight(y.data(), x.data(), gw.data(), gb.data(), n, ci, h, w, co,
                                       kk, kk, stride, pad, h, w);
        }, 3));
  }

  {
    const int64_t n = 1 << 20;
    auto a = Tensor<float>::uniform({n}, rng, -1, 1);
    std::vector<float> o(static_cast<size_t>(n));
    row("gelu 1M",
        time_ms([&]() { kern::serial::unary(kern::UnOp::gelu, a.data(), o.data(), n); }, 5),
        time_ms([&]() { kern::par::unary(kern::UnOp::gelu, a.data(), o.data(), n); }, 5));
  }

  {
    const int64_t rows = 4096, cols = 64;
    auto a = Tensor<float>::uniform({rows, cols}, rng, -4, 4);
    std::vector<float> o(static_cast<size_t>(rows * cols));
    row("softmax 4096x64",
        time_ms([&]() { kern::serial::softmax_lastdim(a.data(), o.data(), rows, cols); }, 5),
        time_ms([&]() { kern::par::softmax_lastdim(a.data(), o.data(), rows, cols); }, 5));
  }

  {
    CITModel<float> model;
    model.init(CITConfig::toy(), 5);
    Rng drng(2);
    auto x = Tensor<float>::uniform({4, 3, 64, 64}, drng, 0, 1);
    auto gt = Tensor<float>::uniform({4, 3, 64, 64}, drng, 0, 1);
    losses::LossWeights w;
    auto step = [&]() {
      Tape<float> tape;
      TapeScope<float> scope(tape);
      auto lt = losses::total_loss(model.forward(x, true), gt, x, w);
      model.zero_grads();
      tape.backward(lt.total);
    };
    kern::set_backend(kern::Backend::serial);
    const double s = time_ms(step, 3);
    kern::set_backend(kern::Backend::parallel);
    const double p = time_ms(step, 3);
    row("toy model fwd+bwd", s, p);
  }

  return 0;
}
