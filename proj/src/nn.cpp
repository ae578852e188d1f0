#include "cit/nn.hpp"

#include <cmath>

#include "cit/kernels.hpp"

namespace cit::nn {

namespace {

template <class T>
void check_finite(const Tensor<T>& t, const char* op) {
  if (!finite_checks()) return;
  const T* d = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(d[i])) {
      fail(ErrorCode::NonFiniteActivation,
           std::string(op) + " produced a non-finite value at index " + std::to_string(i));
    }
  }
}

template <class T>
void kaiming_uniform(Tensor<T>& w, int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  T* d = w.data();
  for (int64_t i = 0; i < w.numel(); ++i) d[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
void trunc_normal(Tensor<T>& w, double sigma, Rng& rng) {
  T* d = w.data();
  for (int64_t i = 0; i < w.numel(); ++i) d[i] = static_cast<T>(rng.trunc_normal(sigma));
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int64_t stride,
                 int64_t pad) {
  if (x.rank() != 4 || w.rank() != 4) {
    fail(ErrorCode::ShapeMismatch,
         "conv2d expects NCHW input and OIHW weight, got " + shape_str(x.shape()) + " and " +
             shape_str(w.shape()));
  }
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t co = w.dim(0), wci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (ci != wci) {
    fail(ErrorCode::ShapeMismatch, "conv2d channel mismatch: input " + std::to_string(ci) +
                                       " vs weight " + std::to_string(wci));
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != co)) {
    fail(ErrorCode::ShapeMismatch, "conv2d bias shape " + shape_str(b.shape()));
  }
  if (h + 2 * pad < kh || wd + 2 * pad < kw) {
    fail(ErrorCode::ShapeMismatch, "conv2d kernel larger than padded input");
  }
  // even kernels are allowed only as a patchify stem (stride == kernel)
  if ((kh % 2 == 0 || kw % 2 == 0) && !(stride == kh && kh == kw)) {
    fail(ErrorCode::Config, "even conv kernels require stride == kernel");
  }
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (wd + 2 * pad - kw) / stride + 1;

  Tensor<T> out({n, co, ho, wo});
  kern::conv2d_fwd(x.data(), w.data(), b.defined() ? b.data() : nullptr, out.data(), n, ci, h, wd,
                   co, kh, kw, stride, pad, ho, wo);
  check_finite(out, "conv2d");

  std::vector<Tensor<T>> inputs = {x, w};
  if (b.defined()) inputs.push_back(b);
  record_custom(out, inputs, [x, w, b, out, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo]() {
    const T* g = out.grad_view().data();
    if (x.tracked()) {
      Tensor<T> xx = x;
      xx.ensure_grad();
      kern::conv2d_bwd_input(g, w.data(), xx.grad_data(), n, ci, h, wd, co, kh, kw, stride, pad,
                             ho, wo);
    }
    if (w.tracked() || (b.defined() && b.tracked())) {
      Tensor<T> ww = w;
      ww.ensure_grad();
      T* gb = nullptr;
      if (b.defined() && b.tracked()) {
        Tensor<T> bb = b;
        bb.ensure_grad();
        gb = bb.grad_data();
      }
      kern::conv2d_bwd_weight(g, x.data(), ww.grad_data(), gb, n, ci, h, wd, co, kh, kw, stride,
                              pad, ho, wo);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// reflect padding
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> pad_reflect_br(const Tensor<T>& x, int64_t pad_bottom, int64_t pad_right) {
  if (x.rank() != 4) fail(ErrorCode::ShapeMismatch, "pad_reflect_br expects NCHW");
  if (pad_bottom == 0 && pad_right == 0) return x;
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (pad_bottom >= h || pad_right >= w) {
    fail(ErrorCode::TooSmall, "reflect pad " + std::to_string(pad_bottom) + "x" +
                                  std::to_string(pad_right) + " needs input larger than the pad");
  }
  const int64_t ho = h + pad_bottom, wo = w + pad_right;
  Tensor<T> out({n, c, ho, wo});
  const T* xd = x.data();
  T* od = out.data();
  for (int64_t m = 0; m < n * c; ++m) {
    const T* xp = xd + m * h * w;
    T* op = od + m * ho * wo;
    for (int64_t i = 0; i < ho; ++i) {
      const int64_t si = i < h ? i : 2 * h - 2 - i;
      for (int64_t j = 0; j < wo; ++j) {
        const int64_t sj = j < w ? j : 2 * w - 2 - j;
        op[i * wo + j] = xp[si * w + sj];
      }
    }
  }
  record_custom(out, {x}, [x, out, n, c, h, w, ho, wo]() {
    Tensor<T> xx = x;
    xx.ensure_grad();
    T* gx = xx.grad_data();
    const T* g = out.grad_view().data();
    for (int64_t m = 0; m < n * c; ++m) {
      T* gxp = gx + m * h * w;
      const T* gp = g + m * ho * wo;
      for (int64_t i = 0; i < ho; ++i) {
        const int64_t si = i < h ? i : 2 * h - 2 - i;
        for (int64_t j = 0; j < wo; ++j) {
          const int64_t sj = j < w ? j : 2 * w - 2 - j;
          gxp[si * w + sj] += gp[i * wo + j];
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// normalizations
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const int last = x.rank() - 1;
  const int64_t c = x.shape()[static_cast<size_t>(last)];
  if (gamma.numel() != c || beta.numel() != c) {
    fail(ErrorCode::ShapeMismatch, "layer_norm affine params must have extent " +
                                       std::to_string(c));
  }
  Tensor<T> mu = mean(x, {last}, true);
  Tensor<T> xc = sub(x, mu);
  Tensor<T> var = mean(mul(xc, xc), {last}, true);
  Tensor<T> xhat = div(xc, sqrt(add(var, eps)));
  return add(mul(xhat, gamma), beta);
}

template <class T>
Tensor<T> instance_norm_half(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                             T eps) {
  if (x.rank() != 4) fail(ErrorCode::ShapeMismatch, "instance_norm_half expects NCHW");
  const int64_t c = x.dim(1);
  if (c % 2 != 0) {
    fail(ErrorCode::OddChannels, "instance_norm_half needs an even channel count, got " +
                                     std::to_string(c));
  }
  const int64_t half = c / 2;
  if (gamma.numel() != half || beta.numel() != half) {
    fail(ErrorCode::ShapeMismatch, "instance_norm_half affine params must have extent " +
                                       std::to_string(half));
  }
  Tensor<T> lo = slice(x, 1, 0, half);
  Tensor<T> hi = slice(x, 1, half, half);
  Tensor<T> mu = mean(lo, {2, 3}, true);
  Tensor<T> xc = sub(lo, mu);
  Tensor<T> var = mean(mul(xc, xc), {2, 3}, true);
  Tensor<T> xhat = div(xc, sqrt(add(var, eps)));
  Tensor<T> g = reshape(gamma, {half, 1, 1});
  Tensor<T> b = reshape(beta, {half, 1, 1});
  Tensor<T> normed = add(mul(xhat, g), b);
  return concat<T>({normed, hi}, 1);
}

// ---------------------------------------------------------------------------
// window machinery
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> window_partition(const Tensor<T>& x, int64_t window, int64_t shift) {
  if (x.rank() != 4) fail(ErrorCode::ShapeMismatch, "window_partition expects NHWC");
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (h % window != 0 || w % window != 0) {
    fail(ErrorCode::ShapeMismatch, "spatial dims " + std::to_string(h) + "x" + std::to_string(w) +
                                       " not divisible by window " + std::to_string(window));
  }
  if (shift != 0 && shift != window / 2) {
    fail(ErrorCode::Config, "window shift must be 0 or window/2");
  }
  Tensor<T> t = x;
  if (shift > 0) t = roll2d(t, 1, 2, -shift, -shift);
  const int64_t nh = h / window, nw = w / window;
  t = reshape(t, {n, nh, window, nw, window, c});
  t = permute(t, {0, 1, 3, 2, 4, 5});
  return reshape(t, {n * nh * nw, window * window, c});
}

template <class T>
Tensor<T> window_reverse(const Tensor<T>& tokens, int64_t window, int64_t shift, int64_t n,
                         int64_t h, int64_t w, int64_t c) {
  const int64_t nh = h / window, nw = w / window;
  Tensor<T> t = reshape(tokens, {n, nh, nw, window, window, c});
  t = permute(t, {0, 1, 3, 2, 4, 5});
  t = reshape(t, {n, h, w, c});
  if (shift > 0) t = roll2d(t, 1, 2, shift, shift);
  return t;
}

template <class T>
Tensor<T> attention_mask(int64_t h, int64_t w, int64_t window, int64_t shift) {
  // region ids over the pre-shift grid, Swin-style slice boundaries
  std::vector<int> ids(static_cast<size_t>(h * w), 0);
  auto bounds = [&](int64_t extent) {
    return std::vector<std::pair<int64_t, int64_t>>{
        {0, extent - window}, {extent - window, extent - shift}, {extent - shift, extent}};
  };
  int cnt = 0;
  for (const auto& [h0, h1] : bounds(h)) {
    for (const auto& [w0, w1] : bounds(w)) {
      for (int64_t i = h0; i < h1; ++i) {
        for (int64_t j = w0; j < w1; ++j) ids[static_cast<size_t>(i * w + j)] = cnt;
      }
      ++cnt;
    }
  }
  const int64_t nh = h / window, nw = w / window;
  const int64_t tok = window * window;
  Tensor<T> mask({nh * nw, tok, tok});
  T* md = mask.data();
  for (int64_t wi = 0; wi < nh * nw; ++wi) {
    const int64_t wh = wi / nw, ww = wi % nw;
    std::vector<int> wid(static_cast<size_t>(tok));
    for (int64_t i = 0; i < window; ++i) {
      for (int64_t j = 0; j < window; ++j) {
        wid[static_cast<size_t>(i * window + j)] =
            ids[static_cast<size_t>((wh * window + i) * w + (ww * window + j))];
      }
    }
    for (int64_t a = 0; a < tok; ++a) {
      for (int64_t b = 0; b < tok; ++b) {
        md[(wi * tok + a) * tok + b] =
            wid[static_cast<size_t>(a)] == wid[static_cast<size_t>(b)] ? T(0) : T(-100);
      }
    }
  }
  return mask;
}

std::shared_ptr<std::vector<int64_t>> relative_position_index(int64_t window) {
  const int64_t tok = window * window;
  auto idx = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(tok * tok));
  for (int64_t a = 0; a < tok; ++a) {
    const int64_t ah = a / window, aw = a % window;
    for (int64_t b = 0; b < tok; ++b) {
      const int64_t bh = b / window, bw = b % window;
      const int64_t dh = ah - bh + window - 1;
      const int64_t dw = aw - bw + window - 1;
      (*idx)[static_cast<size_t>(a * tok + b)] = dh * (2 * window - 1) + dw;
    }
  }
  return idx;
}

// ---------------------------------------------------------------------------
// pixel shuffle
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int64_t r) {
  if (x.rank() != 4) fail(ErrorCode::ShapeMismatch, "pixel_shuffle expects NCHW");
  const int64_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c_in % (r * r) != 0) {
    fail(ErrorCode::ShapeMismatch, "pixel_shuffle channels " + std::to_string(c_in) +
                                       " not divisible by r^2=" + std::to_string(r * r));
  }
  const int64_t c = c_in / (r * r);
  Tensor<T> t = reshape(x, {n, c, r, r, h, w});
  t = permute(t, {0, 1, 4, 2, 5, 3});
  return reshape(t, {n, c, h * r, w * r});
}

template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int64_t r) {
  if (x.rank() != 4) fail(ErrorCode::ShapeMismatch, "pixel_unshuffle expects NCHW");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % r != 0 || w % r != 0) {
    fail(ErrorCode::ShapeMismatch, "pixel_unshuffle spatial dims not divisible by r");
  }
  Tensor<T> t = reshape(x, {n, c, h / r, r, w / r, r});
  t = permute(t, {0, 1, 3, 5, 2, 4});
  return reshape(t, {n, c * r * r, h / r, w / r});
}

template <class T>
Tensor<T> nchw_to_nhwc(const Tensor<T>& x) {
  return permute(x, {0, 2, 3, 1});
}

template <class T>
Tensor<T> nhwc_to_nchw(const Tensor<T>& x) {
  return permute(x, {0, 3, 1, 2});
}

// ---------------------------------------------------------------------------
// layer structs
// ---------------------------------------------------------------------------

template <class T>
void Conv2d<T>::init(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride_, int64_t pad_,
                     Rng& rng) {
  stride = stride_;
  pad = pad_;
  w = Tensor<T>({out_ch, in_ch, k, k});
  b = Tensor<T>({out_ch});
  const int64_t fan_in = in_ch * k * k;
  kaiming_uniform(w, fan_in, rng);
  kaiming_uniform(b, fan_in, rng);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
}

template <class T>
void Conv2d<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

template <class T>
void Linear<T>::init(int64_t in_dim, int64_t out_dim, Rng& rng) {
  w = Tensor<T>({in_dim, out_dim});
  b = Tensor<T>({out_dim});
  trunc_normal(w, 0.02, rng);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
}

template <class T>
void Linear<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".w", w);
  fn(prefix + ".b", b);
}

template <class T>
void LayerNorm<T>::init(int64_t channels) {
  gamma = Tensor<T>::ones({channels});
  beta = Tensor<T>::zeros({channels});
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
}

template <class T>
void LayerNorm<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

template <class T>
void WindowAttention<T>::init(int64_t channels, int64_t head_count, int64_t window_size,
                              bool rel_bias, Rng& rng) {
  if (channels % head_count != 0) {
    fail(ErrorCode::ShapeMismatch, "channels " + std::to_string(channels) +
                                       " not divisible by heads " + std::to_string(head_count));
  }
  heads = head_count;
  window = window_size;
  use_rel_bias = rel_bias;
  qkv.init(channels, 3 * channels, rng);
  proj.init(channels, channels, rng);
  const int64_t span = 2 * window - 1;
  rel_bias_table = Tensor<T>::zeros({span * span, heads});
  rel_bias_table.set_requires_grad(true);
  rel_index = relative_position_index(window);
}

template <class T>
Tensor<T> WindowAttention<T>::forward(const Tensor<T>& tokens, const Tensor<T>& mask) const {
  const int64_t bw = tokens.dim(0);  // batch x windows
  const int64_t tok = tokens.dim(1);
  const int64_t c = tokens.dim(2);
  const int64_t hd = c / heads;

  Tensor<T> qkv_out = qkv.forward(tokens);  // (bw, tok, 3C)
  Tensor<T> split = permute(reshape(qkv_out, {bw, tok, 3, heads, hd}), {2, 0, 3, 1, 4});
  Tensor<T> q = reshape(slice(split, 0, 0, 1), {bw, heads, tok, hd});
  Tensor<T> k = reshape(slice(split, 0, 1, 1), {bw, heads, tok, hd});
  Tensor<T> v = reshape(slice(split, 0, 2, 1), {bw, heads, tok, hd});

  q = mul(q, static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd))));
  Tensor<T> attn = matmul(q, permute(k, {0, 1, 3, 2}));  // (bw, heads, tok, tok)

  if (use_rel_bias) {
    Tensor<T> rows = gather_rows(rel_bias_table, rel_index);          // (tok*tok, heads)
    Tensor<T> bias = permute(reshape(rows, {tok, tok, heads}), {2, 0, 1});
    attn = add(attn, bias);  // broadcast over bw
  }
  if (mask.defined()) {
    const int64_t nw = mask.dim(0);
    const int64_t batch = bw / nw;
    attn = reshape(attn, {batch, nw, heads, tok, tok});
    attn = add(attn, reshape(mask, {nw, 1, tok, tok}));
    attn = reshape(attn, {bw, heads, tok, tok});
  }
  attn = softmax_lastdim(attn);

  Tensor<T> out = matmul(attn, v);                        // (bw, heads, tok, hd)
  out = reshape(permute(out, {0, 2, 1, 3}), {bw, tok, c});
  return proj.forward(out);
}

template <class T>
void WindowAttention<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  qkv.visit(prefix + ".qkv", fn);
  proj.visit(prefix + ".proj", fn);
  if (use_rel_bias) fn(prefix + ".rel_bias_table", rel_bias_table);
}

template <class T>
void Mlp<T>::init(int64_t channels, int64_t hidden, Rng& rng) {
  fc1.init(channels, hidden, rng);
  fc2.init(hidden, channels, rng);
}

template <class T>
void Mlp<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  fc1.visit(prefix + ".fc1", fn);
  fc2.visit(prefix + ".fc2", fn);
}

template <class T>
void ChannelAttention<T>::init(int64_t channels, int64_t squeeze, Rng& rng) {
  if (squeeze < 1) fail(ErrorCode::Config, "squeeze factor must be >= 1");
  const int64_t mid = std::max<int64_t>(1, channels / squeeze);
  c1.init(channels, mid, 1, 1, 0, rng);
  c2.init(mid, channels, 1, 1, 0, rng);
}

template <class T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x) const {
  Tensor<T> pooled = mean(x, {2, 3}, true);  // global statistics
  Tensor<T> gate = sigmoid(c2.forward(relu(c1.forward(pooled))));
  return mul(x, gate);
}

template <class T>
void ChannelAttention<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  c1.visit(prefix + ".c1", fn);
  c2.visit(prefix + ".c2", fn);
}

template <class T>
void CABlock<T>::init(int64_t channels, int64_t squeeze, Rng& rng) {
  const int64_t mid = std::max<int64_t>(1, channels / squeeze);
  conv1.init(channels, mid, 3, 1, 1, rng);
  conv2.init(mid, channels, 3, 1, 1, rng);
  ca.init(channels, squeeze, rng);
}

template <class T>
Tensor<T> CABlock<T>::forward(const Tensor<T>& x) const {
  return ca.forward(conv2.forward(gelu(conv1.forward(x))));
}

template <class T>
void CABlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  conv1.visit(prefix + ".conv1", fn);
  conv2.visit(prefix + ".conv2", fn);
  ca.visit(prefix + ".ca", fn);
}

template <class T>
void HinBlock<T>::init(int64_t channels, Rng& rng) {
  if (channels % 2 != 0) {
    fail(ErrorCode::OddChannels, "half-instance norm needs even channels");
  }
  conv1.init(channels, channels, 3, 1, 1, rng);
  conv2.init(channels, channels, 3, 1, 1, rng);
  shortcut.init(channels, channels, 1, 1, 0, rng);
  in_gamma = Tensor<T>::ones({channels / 2});
  in_beta = Tensor<T>::zeros({channels / 2});
  in_gamma.set_requires_grad(true);
  in_beta.set_requires_grad(true);
}

template <class T>
Tensor<T> HinBlock<T>::forward(const Tensor<T>& x) const {
  Tensor<T> t = conv1.forward(x);
  t = instance_norm_half(t, in_gamma, in_beta);
  t = leaky_relu(t, T(0.2));
  t = conv2.forward(t);
  t = leaky_relu(t, T(0.2));
  return add(t, shortcut.forward(x));
}

template <class T>
void HinBlock<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  conv1.visit(prefix + ".conv1", fn);
  conv2.visit(prefix + ".conv2", fn);
  shortcut.visit(prefix + ".shortcut", fn);
  fn(prefix + ".in_gamma", in_gamma);
  fn(prefix + ".in_beta", in_beta);
}

template <class T>
void Scam<T>::init(int64_t channels, Rng& rng) {
  c1.init(channels, channels, 1, 1, 0, rng);
  c2.init(channels, channels, 1, 1, 0, rng);
  // gate starts near identity (sigmoid(2) ~ 0.88) and learns to modulate
  kern::fill(c2.b.data(), c2.b.numel(), T(2));
}

template <class T>
Tensor<T> Scam<T>::forward(const Tensor<T>& x) const {
  Tensor<T> gate = sigmoid(c2.forward(relu(c1.forward(x))));
  return mul(x, gate);
}

template <class T>
void Scam<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  c1.visit(prefix + ".c1", fn);
  c2.visit(prefix + ".c2", fn);
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define CIT_INST_NN(T)                                                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int64_t, \
                               int64_t);                                                      \
  template Tensor<T> pad_reflect_br<T>(const Tensor<T>&, int64_t, int64_t);                  \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> instance_norm_half<T>(const Tensor<T>&, const Tensor<T>&,               \
                                           const Tensor<T>&, T);                             \
  template Tensor<T> window_partition<T>(const Tensor<T>&, int64_t, int64_t);                \
  template Tensor<T> window_reverse<T>(const Tensor<T>&, int64_t, int64_t, int64_t, int64_t, \
                                       int64_t, int64_t);                                    \
  template Tensor<T> attention_mask<T>(int64_t, int64_t, int64_t, int64_t);                  \
  template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, int64_t);                            \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, int64_t);                          \
  template Tensor<T> nchw_to_nhwc<T>(const Tensor<T>&);                                      \
  template Tensor<T> nhwc_to_nchw<T>(const Tensor<T>&);                                      \
  template struct Conv2d<T>;                                                                 \
  template struct Linear<T>;                                                                 \
  template struct LayerNorm<T>;                                                              \
  template struct WindowAttention<T>;                                                        \
  template struct Mlp<T>;                                                                    \
  template struct ChannelAttention<T>;                                                       \
  template struct CABlock<T>;                                                                \
  template struct HinBlock<T>;                                                               \
  template struct Scam<T>;

CIT_INST_NN(float)
CIT_INST_NN(double)

#undef CIT_INST_NN

}  // namespace cit::nn
