#include "cit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cit/kernels.hpp"

namespace cit {

namespace {

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!finite_checks()) return;
  const T* d = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(d[i])) {
      fail(ErrorCode::NonFiniteActivation,
           std::string(op) + " produced a non-finite value at index " + std::to_string(i));
    }
  }
}

// strides of `shape` aligned to the trailing dims of `out`, 0 where broadcast
Shape aligned_strides(const Shape& shape, const Shape& out) {
  const int orank = static_cast<int>(out.size());
  const int rank = static_cast<int>(shape.size());
  Shape nat = row_major_strides(shape);
  Shape st(orank, 0);
  for (int i = 0; i < rank; ++i) {
    const int oi = orank - rank + i;
    st[oi] = (shape[i] == 1 && out[oi] != 1) ? 0 : nat[i];
  }
  return st;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

template <class T>
Tensor<T>::Tensor(Shape shape) {
  impl_ = std::make_shared<TensorImpl<T>>();
  const int64_t n = numel_of(shape);
  impl_->shape = std::move(shape);
  impl_->data = std::make_shared<std::vector<T>>(static_cast<size_t>(n), T(0));
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return Tensor<T>(std::move(shape));
}

template <class T>
Tensor<T> Tensor<T>::ones(Shape shape) {
  return full(std::move(shape), T(1));
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  Tensor<T> t(std::move(shape));
  kern::fill(t.data(), t.numel(), value);
  return t;
}

template <class T>
Tensor<T> Tensor<T>::from_vector(Shape shape, std::vector<T> values) {
  if (numel_of(shape) != static_cast<int64_t>(values.size())) {
    fail(ErrorCode::ShapeMismatch, "from_vector: " + shape_str(shape) + " does not hold " +
                                       std::to_string(values.size()) + " values");
  }
  Tensor<T> t;
  t.impl_ = std::make_shared<TensorImpl<T>>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::make_shared<std::vector<T>>(std::move(values));
  return t;
}

template <class T>
Tensor<T> Tensor<T>::randn(Shape shape, Rng& rng, T stddev) {
  Tensor<T> t(std::move(shape));
  T* d = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) d[i] = static_cast<T>(rng.normal()) * stddev;
  return t;
}

template <class T>
Tensor<T> Tensor<T>::uniform(Shape shape, Rng& rng, T lo, T hi) {
  Tensor<T> t(std::move(shape));
  T* d = t.data();
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i)
    d[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
  return t;
}

template <class T>
Tensor<T> Tensor<T>::alias(Shape shape, std::shared_ptr<std::vector<T>> buf) {
  if (numel_of(shape) != static_cast<int64_t>(buf->size())) {
    fail(ErrorCode::ShapeMismatch, "alias: shape does not match buffer size");
  }
  Tensor<T> t;
  t.impl_ = std::make_shared<TensorImpl<T>>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(buf);
  return t;
}

template <class T>
void Tensor<T>::ensure_grad() {
  if (!impl_->grad) {
    impl_->grad = std::make_shared<std::vector<T>>(static_cast<size_t>(numel()), T(0));
  }
}

template <class T>
void Tensor<T>::zero_grad() {
  if (impl_->grad) kern::fill(impl_->grad->data(), numel(), T(0));
}

template <class T>
void Tensor<T>::drop_grad() {
  impl_->grad.reset();
}

template <class T>
Tensor<T> Tensor<T>::grad_view() const {
  if (!impl_->grad) fail(ErrorCode::MissingGrad, "gradient not materialized");
  return alias(impl_->shape, impl_->grad);
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  Tensor<T> t;
  t.impl_ = std::make_shared<TensorImpl<T>>();
  t.impl_->shape = impl_->shape;
  t.impl_->data = impl_->data;
  return t;
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  Tensor<T> t(impl_->shape);
  kern::copy(data(), t.data(), numel());
  return t;
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) fail(ErrorCode::NotScalar, "item() on tensor of shape " + shape_str(shape()));
  return (*impl_->data)[0];
}

template <class T>
T Tensor<T>::at(const Shape& index) const {
  Shape st = row_major_strides(impl_->shape);
  int64_t off = 0;
  for (size_t i = 0; i < index.size(); ++i) off += index[i] * st[i];
  return (*impl_->data)[static_cast<size_t>(off)];
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {
template <class T>
Tape<T>*& tape_slot() {
  static thread_local Tape<T>* slot = nullptr;
  return slot;
}
}  // namespace

template <class T>
Tape<T>* active_tape() {
  return tape_slot<T>();
}

template <class T>
void set_active_tape(Tape<T>* tape) {
  tape_slot<T>() = tape;
}

template <class T>
void Tape<T>::clear() {
  nodes_.clear();
}

template <class T>
int64_t Tape<T>::record(const Tensor<T>& out, std::vector<Tensor<T>> inputs,
                        std::function<void()> fn) {
  nodes_.push_back(Node{out, std::move(inputs), std::move(fn)});
  return static_cast<int64_t>(nodes_.size()) - 1;
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCode::NotScalar, "backward requires a scalar loss");
  }
  const int64_t ln = loss.node();
  if (ln < 0 || ln >= size()) {
    fail(ErrorCode::NoTape, "loss was not recorded on this tape");
  }
  // intermediates are cleared so repeated calls accumulate only into leaves
  for (int64_t i = 0; i <= ln; ++i) nodes_[static_cast<size_t>(i)].out.drop_grad();
  Tensor<T> seed = loss;
  seed.ensure_grad();
  seed.grad_data()[0] = T(1);
  NoGradGuard<T> guard;
  for (int64_t i = ln; i >= 0; --i) {
    Node& node = nodes_[static_cast<size_t>(i)];
    if (node.out.has_grad()) node.fn();
  }
}

template <class T>
void backward(const Tensor<T>& loss) {
  Tape<T>* tape = active_tape<T>();
  if (!tape) fail(ErrorCode::NoTape, "no active tape");
  tape->backward(loss);
}

// ---------------------------------------------------------------------------
// recording helpers
// ---------------------------------------------------------------------------

namespace {

template <class T>
void maybe_record(Tensor<T>& out, std::vector<Tensor<T>> inputs, std::function<void()> fn) {
  Tape<T>* tape = active_tape<T>();
  if (!tape) return;
  bool any = false;
  for (const auto& t : inputs) {
    if (t.defined() && t.tracked()) {
      any = true;
      break;
    }
  }
  if (!any) return;
  out.set_node(tape->record(out, std::move(inputs), std::move(fn)));
}

// untaped: sum g over broadcast axes until it matches `target`
template <class T>
Tensor<T> reduce_to_shape(const Tensor<T>& g, const Shape& target) {
  if (g.shape() == target) return g;
  const int gr = g.rank();
  const int tr = static_cast<int>(target.size());
  Shape padded(static_cast<size_t>(gr), 1);
  for (int i = 0; i < tr; ++i) padded[gr - tr + i] = target[i];
  std::vector<char> mask(static_cast<size_t>(gr), 0);
  bool any = false;
  for (int i = 0; i < gr; ++i) {
    if (padded[i] == 1 && g.shape()[i] != 1) {
      mask[i] = 1;
      any = true;
    } else if (padded[i] != g.shape()[i]) {
      fail(ErrorCode::ShapeMismatch, "cannot reduce gradient " + shape_str(g.shape()) + " to " +
                                         shape_str(target));
    }
  }
  if (!any) return reshape(g, target);
  Tensor<T> out(padded);
  kern::reduce_sum(g.data(), g.shape(), mask, out.data(), padded);
  return reshape(out, target);
}

template <class T>
Tensor<T> expand_to(const Tensor<T>& t, const Shape& target) {
  if (t.shape() == target) return t;
  Tensor<T> zero(target);
  Tensor<T> out(target);
  kern::binary_bcast(kern::BinOp::add, t.data(), t.shape(), zero.data(), zero.shape(), out.data(),
                     target);
  return out;
}

template <class T, class F>
void accum_pointwise(const Tensor<T>& x, const Tensor<T>& gview, F&& f) {
  Tensor<T> xx = x;
  xx.ensure_grad();
  T* gx = xx.grad_data();
  const T* g = gview.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) gx[i] += f(i, g[i]);
}

template <class T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
  std::vector<int> perm(static_cast<size_t>(a.rank()));
  for (int i = 0; i < a.rank(); ++i) perm[static_cast<size_t>(i)] = i;
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute(a, perm);
}

}  // namespace

template <class T>
void accum_grad(const Tensor<T>& t, const Tensor<T>& g) {
  Tensor<T> r = reduce_to_shape(g, t.shape());
  Tensor<T> tt = t;
  tt.ensure_grad();
  kern::axpy(tt.grad_data(), r.data(), tt.numel(), T(1));
}

template <class T>
void record_custom(const Tensor<T>& out, std::vector<Tensor<T>> inputs,
                   std::function<void()> backward_fn) {
  Tensor<T> o = out;
  maybe_record(o, std::move(inputs), std::move(backward_fn));
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const int rank = static_cast<int>(std::max(a.size(), b.size()));
  Shape out(static_cast<size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    const int ai = static_cast<int>(a.size()) - rank + i;
    const int bi = static_cast<int>(b.size()) - rank + i;
    const int64_t da = ai >= 0 ? a[ai] : 1;
    const int64_t db = bi >= 0 ? b[bi] : 1;
    if (da != db && da != 1 && db != 1) {
      fail(ErrorCode::ShapeMismatch,
           "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

namespace {

template <class T>
Tensor<T> binary_forward(kern::BinOp op, const Tensor<T>& a, const Tensor<T>& b) {
  Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor<T> out(os);
  if (a.shape() == b.shape()) {
    kern::binary_same(op, a.data(), b.data(), out.data(), out.numel());
  } else {
    kern::binary_bcast(op, a.data(), a.shape(), b.data(), b.shape(), out.data(), os);
  }
  return out;
}

template <class T>
Tensor<T> scalar_tensor(T v) {
  return Tensor<T>::from_vector({}, {v});
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = binary_forward(kern::BinOp::add, a, b);
  check_finite(out, "add");
  maybe_record(out, {a, b}, [a, b, out]() {
    Tensor<T> g = out.grad_view();
    if (a.tracked()) accum_grad(a, g);
    if (b.tracked()) accum_grad(b, g);
  });
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = binary_forward(kern::BinOp::sub, a, b);
  check_finite(out, "sub");
  maybe_record(out, {a, b}, [a, b, out]() {
    Tensor<T> g = out.grad_view();
    if (a.tracked()) accum_grad(a, g);
    if (b.tracked()) accum_grad(b, neg(g));
  });
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = binary_forward(kern::BinOp::mul, a, b);
  check_finite(out, "mul");
  maybe_record(out, {a, b}, [a, b, out]() {
    Tensor<T> g = out.grad_view();
    if (a.tracked()) accum_grad(a, mul(g, b));
    if (b.tracked()) accum_grad(b, mul(g, a));
  });
  return out;
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  const T* bd = b.data();
  for (int64_t i = 0; i < b.numel(); ++i) {
    if (bd[i] == T(0)) fail(ErrorCode::DivisionByZero, "div: denominator contains exact zero");
  }
  Tensor<T> out = binary_forward(kern::BinOp::div, a, b);
  check_finite(out, "div");
  maybe_record(out, {a, b}, [a, b, out]() {
    Tensor<T> g = out.grad_view();
    if (a.tracked()) accum_grad(a, div(g, b));
    if (b.tracked()) accum_grad(b, neg(div(mul(g, a), mul(b, b))));
  });
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, T b) { return add(a, scalar_tensor(b)); }
template <class T>
Tensor<T> sub(const Tensor<T>& a, T b) { return sub(a, scalar_tensor(b)); }
template <class T>
Tensor<T> mul(const Tensor<T>& a, T b) { return mul(a, scalar_tensor(b)); }
template <class T>
Tensor<T> div(const Tensor<T>& a, T b) { return div(a, scalar_tensor(b)); }

template <class T>
Tensor<T> neg(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::neg, a.data(), out.data(), a.numel());
  maybe_record(out, {a}, [a, out]() {
    accum_pointwise(a, out.grad_view(), [](int64_t, T g) { return -g; });
  });
  return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    fail(ErrorCode::ShapeMismatch, "matmul needs rank >= 2, got " + shape_str(a.shape()) + " x " +
                                       shape_str(b.shape()));
  }
  const int64_t m = a.shape()[a.rank() - 2];
  const int64_t k = a.shape()[a.rank() - 1];
  const int64_t k2 = b.shape()[b.rank() - 2];
  const int64_t n = b.shape()[b.rank() - 1];
  if (k != k2) {
    fail(ErrorCode::ShapeMismatch, "matmul inner dims disagree: " + shape_str(a.shape()) + " x " +
                                       shape_str(b.shape()));
  }
  Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape bshape = broadcast_shape(batch_a, batch_b);
  const int64_t batch = numel_of(bshape);

  Shape out_shape = bshape;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);

  Shape astr = aligned_strides(batch_a, bshape);
  Shape bstr = aligned_strides(batch_b, bshape);
  Shape ostr = row_major_strides(bshape);
  std::vector<int64_t> aoff(static_cast<size_t>(batch)), boff(static_cast<size_t>(batch));
  for (int64_t i = 0; i < batch; ++i) {
    int64_t q = i, oa = 0, ob = 0;
    for (size_t d = 0; d < bshape.size(); ++d) {
      const int64_t idx = q / ostr[d];
      q -= idx * ostr[d];
      oa += idx * astr[d];
      ob += idx * bstr[d];
    }
    aoff[static_cast<size_t>(i)] = oa * m * k;
    boff[static_cast<size_t>(i)] = ob * k * n;
  }
  kern::matmul(a.data(), b.data(), out.data(), batch, m, k, n, aoff.data(), boff.data());
  check_finite(out, "matmul");

  maybe_record(out, {a, b}, [a, b, out]() {
    Tensor<T> g = out.grad_view();
    if (a.tracked()) accum_grad(a, matmul(g, transpose_last2(b)));
    if (b.tracked()) accum_grad(b, matmul(transpose_last2(a), g));
  });
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

namespace {

struct ReduceShapes {
  std::vector<char> mask;
  Shape keep;
  Shape final_shape;
  int64_t count = 1;
};

inline ReduceShapes reduce_shapes(const Shape& xs, std::vector<int>& axes, bool keepdims) {
  const int r = static_cast<int>(xs.size());
  if (axes.empty()) {
    for (int i = 0; i < r; ++i) axes.push_back(i);
  }
  ReduceShapes rs;
  rs.mask.assign(static_cast<size_t>(r), 0);
  for (int ax : axes) {
    if (ax < 0 || ax >= r) {
      fail(ErrorCode::InvalidAxis,
           "axis " + std::to_string(ax) + " out of range for " + shape_str(xs));
    }
    if (rs.mask[static_cast<size_t>(ax)]) {
      fail(ErrorCode::InvalidAxis, "duplicate axis " + std::to_string(ax));
    }
    rs.mask[static_cast<size_t>(ax)] = 1;
  }
  rs.keep = xs;
  for (int i = 0; i < r; ++i) {
    if (rs.mask[static_cast<size_t>(i)]) {
      rs.count *= xs[static_cast<size_t>(i)];
      rs.keep[static_cast<size_t>(i)] = 1;
    }
  }
  if (keepdims) {
    rs.final_shape = rs.keep;
  } else {
    for (int i = 0; i < r; ++i) {
      if (!rs.mask[static_cast<size_t>(i)]) rs.final_shape.push_back(xs[static_cast<size_t>(i)]);
    }
  }
  return rs;
}

}  // namespace

template <class T>
Tensor<T> sum(const Tensor<T>& a, std::vector<int> axes, bool keepdims) {
  ReduceShapes rs = reduce_shapes(a.shape(), axes, keepdims);
  Tensor<T> out(rs.final_shape);
  kern::reduce_sum(a.data(), a.shape(), rs.mask, out.data(), rs.keep);
  check_finite(out, "sum");
  const Shape keep = rs.keep;
  maybe_record(out, {a}, [a, out, keep]() {
    Tensor<T> g = reshape(out.grad_view(), keep);
    accum_grad(a, expand_to(g, a.shape()));
  });
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a, std::vector<int> axes, bool keepdims) {
  ReduceShapes rs = reduce_shapes(a.shape(), axes, keepdims);
  Tensor<T> out(rs.final_shape);
  kern::reduce_sum(a.data(), a.shape(), rs.mask, out.data(), rs.keep);
  const T inv = T(1) / static_cast<T>(rs.count);
  kern::scale_shift(out.data(), out.data(), out.numel(), inv, T(0));
  check_finite(out, "mean");
  const Shape keep = rs.keep;
  maybe_record(out, {a}, [a, out, keep, inv]() {
    Tensor<T> g = reshape(out.grad_view(), keep);
    Tensor<T> ge = expand_to(g, a.shape());
    Tensor<T> scaled(a.shape());
    kern::scale_shift(ge.data(), scaled.data(), ge.numel(), inv, T(0));
    accum_grad(a, scaled);
  });
  return out;
}

template <class T>
Tensor<T> reduce_max(const Tensor<T>& a, std::vector<int> axes, bool keepdims) {
  ReduceShapes rs = reduce_shapes(a.shape(), axes, keepdims);
  Tensor<T> out(rs.final_shape);
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
  kern::reduce_max(a.data(), a.shape(), rs.mask, out.data(), argmax->data(), rs.keep);
  check_finite(out, "max");
  maybe_record(out, {a}, [a, out, argmax]() {
    Tensor<T> aa = a;
    aa.ensure_grad();
    T* gx = aa.grad_data();
    const T* g = out.grad_view().data();
    for (int64_t i = 0; i < out.numel(); ++i) gx[(*argmax)[static_cast<size_t>(i)]] += g[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// data movement
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel_of(shape) != a.numel()) {
    fail(ErrorCode::ShapeMismatch,
         "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
  }
  Tensor<T> out = Tensor<T>::alias(std::move(shape), a.impl()->data);
  maybe_record(out, {a}, [a, out]() { accum_grad(a, reshape(out.grad_view(), a.shape())); });
  return out;
}

template <class T>
Tensor<T> permute(const Tensor<T>& a, std::vector<int> perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) {
    fail(ErrorCode::InvalidPermutation, "permute of rank " + std::to_string(r) + " got " +
                                            std::to_string(perm.size()) + " axes");
  }
  std::vector<char> seen(static_cast<size_t>(r), 0);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<size_t>(p)]) {
      fail(ErrorCode::InvalidPermutation, "invalid axis permutation");
    }
    seen[static_cast<size_t>(p)] = 1;
  }
  Shape os(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) os[static_cast<size_t>(i)] = a.shape()[perm[static_cast<size_t>(i)]];
  Tensor<T> out(os);
  kern::permute_copy(a.data(), a.shape(), perm, out.data());
  maybe_record(out, {a}, [a, out, perm]() {
    std::vector<int> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int>(i);
    accum_grad(a, permute(out.grad_view(), inv));
  });
  return out;
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, int axis, int64_t start, int64_t len) {
  const int r = a.rank();
  if (axis < 0 || axis >= r) fail(ErrorCode::InvalidAxis, "slice axis out of range");
  const int64_t d = a.shape()[static_cast<size_t>(axis)];
  if (start < 0 || len <= 0 || start + len > d) {
    fail(ErrorCode::ShapeMismatch, "slice [" + std::to_string(start) + "," +
                                       std::to_string(start + len) + ") outside extent " +
                                       std::to_string(d));
  }
  Shape os = a.shape();
  os[static_cast<size_t>(axis)] = len;
  Tensor<T> out(os);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.shape()[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= a.shape()[static_cast<size_t>(i)];
  const int64_t src_stride = d * inner;
  const int64_t chunk = len * inner;
  for (int64_t o = 0; o < outer; ++o) {
    kern::copy(a.data() + o * src_stride + start * inner, out.data() + o * chunk, chunk);
  }
  maybe_record(out, {a}, [a, out, axis, start, len, outer, inner, src_stride, chunk]() {
    Tensor<T> aa = a;
    aa.ensure_grad();
    const T* g = out.grad_view().data();
    T* gx = aa.grad_data();
    for (int64_t o = 0; o < outer; ++o) {
      kern::axpy(gx + o * src_stride + start * inner, g + o * chunk, chunk, T(1));
    }
  });
  return out;
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat of zero tensors");
  const int r = parts[0].rank();
  if (axis < 0 || axis >= r) fail(ErrorCode::InvalidAxis, "concat axis out of range");
  Shape os = parts[0].shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) fail(ErrorCode::ShapeMismatch, "concat rank mismatch");
    for (int i = 0; i < r; ++i) {
      if (i != axis && p.shape()[static_cast<size_t>(i)] != os[static_cast<size_t>(i)]) {
        fail(ErrorCode::ShapeMismatch, "concat shapes differ off-axis");
      }
    }
    total += p.shape()[static_cast<size_t>(axis)];
  }
  os[static_cast<size_t>(axis)] = total;
  Tensor<T> out(os);
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= os[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= os[static_cast<size_t>(i)];
  const int64_t out_stride = total * inner;
  int64_t off = 0;
  for (const auto& p : parts) {
    const int64_t pd = p.shape()[static_cast<size_t>(axis)];
    const int64_t chunk = pd * inner;
    for (int64_t o = 0; o < outer; ++o) {
      kern::copy(p.data() + o * chunk, out.data() + o * out_stride + off * inner, chunk);
    }
    off += pd;
  }
  std::vector<Tensor<T>> inputs = parts;
  Tensor<T> out_h = out;
  maybe_record(out_h, inputs, [parts, out, axis]() {
    Tensor<T> g = out.grad_view();
    int64_t off = 0;
    for (const auto& p : parts) {
      const int64_t pd = p.shape()[static_cast<size_t>(axis)];
      if (p.tracked()) accum_grad(p, slice(g, axis, off, pd));
      off += pd;
    }
  });
  return out_h;
}

template <class T>
Tensor<T> gather_rows(const Tensor<T>& table, std::shared_ptr<std::vector<int64_t>> indices) {
  if (table.rank() != 2) fail(ErrorCode::ShapeMismatch, "gather_rows expects a rank-2 table");
  const int64_t rows = table.shape()[0];
  const int64_t cols = table.shape()[1];
  const int64_t n = static_cast<int64_t>(indices->size());
  for (int64_t i = 0; i < n; ++i) {
    const int64_t idx = (*indices)[static_cast<size_t>(i)];
    if (idx < 0 || idx >= rows) fail(ErrorCode::InvalidAxis, "gather_rows index out of range");
  }
  Tensor<T> out({n, cols});
  for (int64_t i = 0; i < n; ++i) {
    kern::copy(table.data() + (*indices)[static_cast<size_t>(i)] * cols, out.data() + i * cols,
               cols);
  }
  maybe_record(out, {table}, [table, out, indices, cols, n]() {
    Tensor<T> tt = table;
    tt.ensure_grad();
    T* gt = tt.grad_data();
    const T* g = out.grad_view().data();
    for (int64_t i = 0; i < n; ++i) {
      const int64_t row = (*indices)[static_cast<size_t>(i)];
      for (int64_t j = 0; j < cols; ++j) gt[row * cols + j] += g[i * cols + j];
    }
  });
  return out;
}

template <class T>
Tensor<T> roll2d(const Tensor<T>& a, int axis_h, int axis_w, int64_t shift_h, int64_t shift_w) {
  if (axis_w != axis_h + 1 || axis_h < 0 || axis_w >= a.rank()) {
    fail(ErrorCode::InvalidAxis, "roll2d expects adjacent axes");
  }
  const int64_t h = a.shape()[static_cast<size_t>(axis_h)];
  const int64_t w = a.shape()[static_cast<size_t>(axis_w)];
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis_h; ++i) outer *= a.shape()[static_cast<size_t>(i)];
  for (int i = axis_w + 1; i < a.rank(); ++i) inner *= a.shape()[static_cast<size_t>(i)];
  const int64_t sh = ((shift_h % h) + h) % h;
  const int64_t sw = ((shift_w % w) + w) % w;
  Tensor<T> out(a.shape());
  for (int64_t o = 0; o < outer; ++o) {
    const T* src_base = a.data() + o * h * w * inner;
    T* dst_base = out.data() + o * h * w * inner;
    for (int64_t i = 0; i < h; ++i) {
      const int64_t si = (i - sh + h) % h;
      for (int64_t j = 0; j < w; ++j) {
        const int64_t sj = (j - sw + w) % w;
        kern::copy(src_base + (si * w + sj) * inner, dst_base + (i * w + j) * inner, inner);
      }
    }
  }
  maybe_record(out, {a}, [a, out, axis_h, axis_w, shift_h, shift_w]() {
    accum_grad(a, roll2d(out.grad_view(), axis_h, axis_w, -shift_h, -shift_w));
  });
  return out;
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::relu, a.data(), out.data(), a.numel());
  maybe_record(out, {a}, [a, out]() {
    const T* x = a.data();
    accum_pointwise(a, out.grad_view(), [x](int64_t i, T g) { return x[i] > T(0) ? g : T(0); });
  });
  return out;
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  Tensor<T> out(a.shape());
  kern::leaky_relu(a.data(), out.data(), a.numel(), slope);
  maybe_record(out, {a}, [a, out, slope]() {
    const T* x = a.data();
    accum_pointwise(a, out.grad_view(),
                    [x, slope](int64_t i, T g) { return x[i] > T(0) ? g : slope * g; });
  });
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::sigmoid, a.data(), out.data(), a.numel());
  check_finite(out, "sigmoid");
  maybe_record(out, {a}, [a, out]() {
    const T* s = out.data();
    accum_pointwise(a, out.grad_view(),
                    [s](int64_t i, T g) { return g * s[i] * (T(1) - s[i]); });
  });
  return out;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::gelu, a.data(), out.data(), a.numel());
  check_finite(out, "gelu");
  maybe_record(out, {a}, [a, out]() {
    const T* x = a.data();
    accum_pointwise(a, out.grad_view(), [x](int64_t i, T g) {
      const T inv_sqrt2 = T(0.70710678118654752440084436210485L);
      const T inv_sqrt2pi = T(0.39894228040143267793994605993438L);
      const T cdf = T(0.5) * (T(1) + std::erf(x[i] * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x[i] * x[i]);
      return g * (cdf + x[i] * pdf);
    });
  });
  return out;
}

template <class T>
Tensor<T> exp(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::exp_v, a.data(), out.data(), a.numel());
  check_finite(out, "exp");
  maybe_record(out, {a}, [a, out]() {
    const T* y = out.data();
    accum_pointwise(a, out.grad_view(), [y](int64_t i, T g) { return g * y[i]; });
  });
  return out;
}

template <class T>
Tensor<T> log(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::log_v, a.data(), out.data(), a.numel());
  check_finite(out, "log");
  maybe_record(out, {a}, [a, out]() {
    const T* x = a.data();
    accum_pointwise(a, out.grad_view(), [x](int64_t i, T g) { return g / x[i]; });
  });
  return out;
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::sqrt_v, a.data(), out.data(), a.numel());
  check_finite(out, "sqrt");
  maybe_record(out, {a}, [a, out]() {
    const T* y = out.data();
    accum_pointwise(a, out.grad_view(), [y](int64_t i, T g) { return g * T(0.5) / y[i]; });
  });
  return out;
}

template <class T>
Tensor<T> abs(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  kern::unary(kern::UnOp::abs_v, a.data(), out.data(), a.numel());
  maybe_record(out, {a}, [a, out]() {
    const T* x = a.data();
    accum_pointwise(a, out.grad_view(), [x](int64_t i, T g) {
      return x[i] > T(0) ? g : (x[i] < T(0) ? -g : T(0));
    });
  });
  return out;
}

template <class T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  Tensor<T> out(a.shape());
  const T* x = a.data();
  T* y = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = std::min(hi, std::max(lo, x[i]));
  maybe_record(out, {a}, [a, out, lo, hi]() {
    const T* xd = a.data();
    accum_pointwise(a, out.grad_view(), [xd, lo, hi](int64_t i, T g) {
      return (xd[i] >= lo && xd[i] <= hi) ? g : T(0);
    });
  });
  return out;
}

template <class T>
Tensor<T> softmax_lastdim(const Tensor<T>& a) {
  if (a.rank() < 1) fail(ErrorCode::ShapeMismatch, "softmax needs rank >= 1");
  const int64_t cols = a.shape()[a.rank() - 1];
  const int64_t rows = a.numel() / cols;
  Tensor<T> out(a.shape());
  kern::softmax_lastdim(a.data(), out.data(), rows, cols);
  check_finite(out, "softmax");
  maybe_record(out, {a}, [a, out]() {
    Tensor<T> g = out.grad_view();
    Tensor<T> gs = mul(g, out);
    Tensor<T> row_sum = sum(gs, {out.rank() - 1}, true);
    accum_grad(a, mul(out, sub(g, row_sum)));
  });
  return out;
}

template <class U, class T>
Tensor<U> cast(const Tensor<T>& a) {
  Tensor<U> out(a.shape());
  const T* x = a.data();
  U* y = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = static_cast<U>(x[i]);
  return out;
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

#define CIT_INST_OPS(T)                                                                       \
  template Tape<T>* active_tape<T>();                                                        \
  template void set_active_tape<T>(Tape<T>*);                                                \
  template void backward<T>(const Tensor<T>&);                                               \
  template void record_custom<T>(const Tensor<T>&, std::vector<Tensor<T>>,                   \
                                 std::function<void()>);                                     \
  template void accum_grad<T>(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add<T>(const Tensor<T>&, T);                                            \
  template Tensor<T> sub<T>(const Tensor<T>&, T);                                            \
  template Tensor<T> mul<T>(const Tensor<T>&, T);                                            \
  template Tensor<T> div<T>(const Tensor<T>&, T);                                            \
  template Tensor<T> neg<T>(const Tensor<T>&);                                               \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> sum<T>(const Tensor<T>&, std::vector<int>, bool);                       \
  template Tensor<T> mean<T>(const Tensor<T>&, std::vector<int>, bool);                      \
  template Tensor<T> reduce_max<T>(const Tensor<T>&, std::vector<int>, bool);                \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                    \
  template Tensor<T> permute<T>(const Tensor<T>&, std::vector<int>);                         \
  template Tensor<T> slice<T>(const Tensor<T>&, int, int64_t, int64_t);                      \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, int);                          \
  template Tensor<T> gather_rows<T>(const Tensor<T>&,                                        \
                                    std::shared_ptr<std::vector<int64_t>>);                  \
  template Tensor<T> roll2d<T>(const Tensor<T>&, int, int, int64_t, int64_t);                \
  template Tensor<T> relu<T>(const Tensor<T>&);                                              \
  template Tensor<T> leaky_relu<T>(const Tensor<T>&, T);                                     \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                           \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                              \
  template Tensor<T> exp<T>(const Tensor<T>&);                                               \
  template Tensor<T> log<T>(const Tensor<T>&);                                               \
  template Tensor<T> sqrt<T>(const Tensor<T>&);                                              \
  template Tensor<T> abs<T>(const Tensor<T>&);                                               \
  template Tensor<T> clamp<T>(const Tensor<T>&, T, T);                                       \
  template Tensor<T> softmax_lastdim<T>(const Tensor<T>&);

CIT_INST_OPS(float)
CIT_INST_OPS(double)

#undef CIT_INST_OPS

template Tensor<double> cast<double, float>(const Tensor<float>&);
template Tensor<float> cast<float, double>(const Tensor<double>&);
template Tensor<float> cast<float, float>(const Tensor<float>&);
template Tensor<double> cast<double, double>(const Tensor<double>&);

}  // namespace cit
