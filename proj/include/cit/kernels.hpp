#pragma once

#include <cstdint>
#include <vector>

#include "cit/common.hpp"

// Low-level numeric loops. Every kernel exists in two variants: a plain serial
// reference (`serial::`) and an OpenMP one (`par::`) that splits work across
// independent output elements, so both produce bit-identical results. The
// unprefixed wrappers dispatch on the process-wide backend switch.

namespace cit::kern {

enum class Backend { serial, parallel };

void set_backend(Backend b);
Backend backend();
bool openmp_compiled();
int thread_count();

// work sizes below this run serial regardless of backend
constexpr int64_t kParallelGrain = 4096;

enum class BinOp { add, sub, mul, div };
enum class UnOp { neg, abs_v, sqrt_v, exp_v, log_v, relu, sigmoid, gelu };

namespace serial {

template <class T> void fill(T* o, int64_t n, T v);
template <class T> void copy(const T* x, T* o, int64_t n);
template <class T> void axpy(T* y, const T* x, int64_t n, T a);
template <class T> void binary_same(BinOp op, const T* a, const T* b, T* o, int64_t n);
template <class T>
void binary_bcast(BinOp op, const T* a, const Shape& as, const T* b, const Shape& bs, T* o,
                  const Shape& os);
template <class T> void unary(UnOp op, const T* x, T* o, int64_t n);
template <class T> void leaky_relu(const T* x, T* o, int64_t n, T slope);
template <class T> void scale_shift(const T* x, T* o, int64_t n, T mul, T add);
// batched GEMM: o[i] = a_base[aoff[i]] (m,k) * b_base[boff[i]] (k,n)
template <class T>
void matmul(const T* a, const T* b, T* o, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* aoff, const int64_t* boff);
// o has the keepdims shape of x reduced over `reduce_axis` flags
template <class T>
void reduce_sum(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                const Shape& os);
template <class T>
void reduce_max(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                int64_t* argmax, const Shape& os);
template <class T>
void permute_copy(const T* x, const Shape& xs, const std::vector<int>& perm, T* o);
template <class T> void softmax_lastdim(const T* x, T* o, int64_t rows, int64_t cols);
template <class T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, int64_t n, int64_t ci, int64_t h,
                int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo);
template <class T>
void conv2d_bwd_input(const T* g, const T* w, T* gx, int64_t n, int64_t ci, int64_t h, int64_t wd,
                      int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t ho,
                      int64_t wo);
template <class T>
void conv2d_bwd_weight(const T* g, const T* x, T* gw, T* gb, int64_t n, int64_t ci, int64_t h,
                       int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                       int64_t ho, int64_t wo);

}  // namespace serial

namespace par {

template <class T> void fill(T* o, int64_t n, T v);
template <class T> void copy(const T* x, T* o, int64_t n);
template <class T> void axpy(T* y, const T* x, int64_t n, T a);
template <class T> void binary_same(BinOp op, const T* a, const T* b, T* o, int64_t n);
template <class T>
void binary_bcast(BinOp op, const T* a, const Shape& as, const T* b, const Shape& bs, T* o,
                  const Shape& os);
template <class T> void unary(UnOp op, const T* x, T* o, int64_t n);
template <class T> void leaky_relu(const T* x, T* o, int64_t n, T slope);
template <class T> void scale_shift(const T* x, T* o, int64_t n, T mul, T add);
template <class T>
void matmul(const T* a, const T* b, T* o, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* aoff, const int64_t* boff);
template <class T>
void reduce_sum(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                const Shape& os);
template <class T>
void reduce_max(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                int64_t* argmax, const Shape& os);
template <class T>
void permute_copy(const T* x, const Shape& xs, const std::vector<int>& perm, T* o);
template <class T> void softmax_lastdim(const T* x, T* o, int64_t rows, int64_t cols);
template <class T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, int64_t n, int64_t ci, int64_t h,
                int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo);
template <class T>
void conv2d_bwd_input(const T* g, const T* w, T* gx, int64_t n, int64_t ci, int64_t h, int64_t wd,
                      int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t ho,
                      int64_t wo);
template <class T>
void conv2d_bwd_weight(const T* g, const T* x, T* gw, T* gb, int64_t n, int64_t ci, int64_t h,
                       int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                       int64_t ho, int64_t wo);

}  // namespace par

// dispatching wrappers
template <class T> void fill(T* o, int64_t n, T v);
template <class T> void copy(const T* x, T* o, int64_t n);
template <class T> void axpy(T* y, const T* x, int64_t n, T a);
template <class T> void binary_same(BinOp op, const T* a, const T* b, T* o, int64_t n);
template <class T>
void binary_bcast(BinOp op, const T* a, const Shape& as, const T* b, const Shape& bs, T* o,
                  const Shape& os);
template <class T> void unary(UnOp op, const T* x, T* o, int64_t n);
template <class T> void leaky_relu(const T* x, T* o, int64_t n, T slope);
template <class T> void scale_shift(const T* x, T* o, int64_t n, T mul, T add);
template <class T>
void matmul(const T* a, const T* b, T* o, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* aoff, const int64_t* boff);
template <class T>
void reduce_sum(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                const Shape& os);
template <class T>
void reduce_max(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                int64_t* argmax, const Shape& os);
template <class T>
void permute_copy(const T* x, const Shape& xs, const std::vector<int>& perm, T* o);
template <class T> void softmax_lastdim(const T* x, T* o, int64_t rows, int64_t cols);
template <class T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, int64_t n, int64_t ci, int64_t h,
                int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo);
template <class T>
void conv2d_bwd_input(const T* g, const T* w, T* gx, int64_t n, int64_t ci, int64_t h, int64_t wd,
                      int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t ho,
                      int64_t wo);
template <class T>
void conv2d_bwd_weight(const T* g, const T* x, T* gw, T* gb, int64_t n, int64_t ci, int64_t h,
                       int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                       int64_t ho, int64_t wo);

}  // namespace cit::kern
