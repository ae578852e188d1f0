#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cit/common.hpp"

// Dense row-major tensor with reverse-mode automatic differentiation.
// Tensors are cheap handles onto shared storage. Ops record onto the active
// Tape when any input participates in gradient flow; Tape::backward walks the
// recorded nodes once, in reverse, accumulating gradients into leaves.
// float is the training dtype; double exists for gradient checking.

namespace cit {

template <class T>
struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  std::shared_ptr<std::vector<T>> grad;  // null until first accumulation
  bool requires_grad = false;
  int64_t node = -1;  // index into the active tape, -1 = not an op output
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from_vector(Shape shape, std::vector<T> values);
  static Tensor randn(Shape shape, Rng& rng, T stddev = T(1));
  static Tensor uniform(Shape shape, Rng& rng, T lo, T hi);
  // shares `buf` without copying; numel must match
  static Tensor alias(Shape shape, std::shared_ptr<std::vector<T>> buf);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const { return numel_of(impl_->shape); }
  int64_t dim(int i) const { return impl_->shape[i]; }

  T* data() { return impl_->data->data(); }
  const T* data() const { return impl_->data->data(); }
  std::vector<T>& vec() { return *impl_->data; }
  const std::vector<T>& vec() const { return *impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  int64_t node() const { return impl_->node; }
  void set_node(int64_t n) { impl_->node = n; }
  bool tracked() const { return impl_->requires_grad || impl_->node >= 0; }

  bool has_grad() const { return impl_->grad != nullptr; }
  T* grad_data() { return impl_->grad ? impl_->grad->data() : nullptr; }
  const T* grad_data() const { return impl_->grad ? impl_->grad->data() : nullptr; }
  void ensure_grad();           // materialize zeros
  void zero_grad();             // reset to zeros if materialized
  void drop_grad();             // release buffer
  Tensor grad_view() const;     // tensor aliasing the grad buffer (throws MissingGrad)

  Tensor detach() const;  // shares data, no tape membership
  Tensor clone() const;   // deep copy of data

  T item() const;
  T at(const Shape& index) const;

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

template <class T>
class Tape {
 public:
  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }
  void clear();
  // grad of `loss` w.r.t. every tracked leaf; repeated calls accumulate on leaves
  void backward(const Tensor<T>& loss);
  int64_t record(const Tensor<T>& out, std::vector<Tensor<T>> inputs, std::function<void()> fn);

 private:
  struct Node {
    Tensor<T> out;
    std::vector<Tensor<T>> inputs;
    std::function<void()> fn;
  };
  std::vector<Node> nodes_;
};

template <class T> Tape<T>* active_tape();
template <class T> void set_active_tape(Tape<T>* tape);

template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(active_tape<T>()) { set_active_tape<T>(&tape); }
  ~TapeScope() { set_active_tape<T>(prev_); }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

template <class T>
class NoGradGuard {
 public:
  NoGradGuard() : prev_(active_tape<T>()) { set_active_tape<T>(nullptr); }
  ~NoGradGuard() { set_active_tape<T>(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>* prev_;
};

/// Backward through the active tape. Errors: NotScalar, NoTape.
template <class T> void backward(const Tensor<T>& loss);

/// Record a node with a caller-supplied backward rule (used by layers that
/// implement fused forward kernels, and by the gradcheck mutation test).
template <class T>
void record_custom(const Tensor<T>& out, std::vector<Tensor<T>> inputs,
                   std::function<void()> backward_fn);

/// Accumulate `g` into `t`'s grad buffer, summing over broadcast axes so the
/// gradient shape always equals the leaf shape.
template <class T> void accum_grad(const Tensor<T>& t, const Tensor<T>& g);

Shape broadcast_shape(const Shape& a, const Shape& b);

// elementwise (trailing-dimension broadcasting)
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> add(const Tensor<T>& a, T b);
template <class T> Tensor<T> sub(const Tensor<T>& a, T b);
template <class T> Tensor<T> mul(const Tensor<T>& a, T b);
template <class T> Tensor<T> div(const Tensor<T>& a, T b);
template <class T> Tensor<T> neg(const Tensor<T>& a);

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <class T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <class T> Tensor<T> operator+(const Tensor<T>& a, T b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, T b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, T b) { return mul(a, b); }
template <class T> Tensor<T> operator/(const Tensor<T>& a, T b) { return div(a, b); }
template <class T> Tensor<T> operator*(T a, const Tensor<T>& b) { return mul(b, a); }
template <class T> Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }

// batched matrix product; leading dims broadcast
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// reductions; empty axes = all axes
template <class T> Tensor<T> sum(const Tensor<T>& a, std::vector<int> axes = {}, bool keepdims = false);
template <class T> Tensor<T> mean(const Tensor<T>& a, std::vector<int> axes = {}, bool keepdims = false);
template <class T> Tensor<T> reduce_max(const Tensor<T>& a, std::vector<int> axes = {}, bool keepdims = false);

// data movement
template <class T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <class T> Tensor<T> permute(const Tensor<T>& a, std::vector<int> perm);
template <class T> Tensor<T> slice(const Tensor<T>& a, int axis, int64_t start, int64_t len);
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <class T> Tensor<T> gather_rows(const Tensor<T>& table, std::shared_ptr<std::vector<int64_t>> indices);
template <class T> Tensor<T> roll2d(const Tensor<T>& a, int axis_h, int axis_w, int64_t shift_h, int64_t shift_w);

// pointwise nonlinearities
template <class T> Tensor<T> relu(const Tensor<T>& a);
template <class T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope);
template <class T> Tensor<T> sigmoid(const Tensor<T>& a);
template <class T> Tensor<T> gelu(const Tensor<T>& a);
template <class T> Tensor<T> exp(const Tensor<T>& a);
template <class T> Tensor<T> log(const Tensor<T>& a);
template <class T> Tensor<T> sqrt(const Tensor<T>& a);
template <class T> Tensor<T> abs(const Tensor<T>& a);
template <class T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);
template <class T> Tensor<T> softmax_lastdim(const Tensor<T>& a);

template <class U, class T> Tensor<U> cast(const Tensor<T>& a);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cit
