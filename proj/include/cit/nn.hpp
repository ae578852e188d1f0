#pragma once

#include <functional>
#include <memory>
#include <string>

#include "cit/tensor.hpp"

// Building blocks of the model graph: convolutions, normalizations, windowed
// multi-head attention, channel attention, half-instance normalization and
// pixel-shuffle upsampling. Layers are parameter structs plus forward
// functions; everything differentiates through the tape.

namespace cit::nn {

template <class T>
using ParamVisitor = std::function<void(const std::string&, Tensor<T>&)>;

/// Cross-correlation + bias on NCHW, zero padding, square stride.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int64_t stride,
                 int64_t pad);

/// Reflect-pad bottom/right on NCHW; pad must be < extent.
template <class T>
Tensor<T> pad_reflect_br(const Tensor<T>& x, int64_t pad_bottom, int64_t pad_right);

/// Per-token normalization over the trailing channel dim, then affine.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

/// Instance-normalizes channels [0,C/2) per (sample,channel) over H,W with a
/// learnable affine; channels [C/2,C) pass through untouched.
template <class T>
Tensor<T> instance_norm_half(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                             T eps = T(1e-5));

/// NHWC -> (N*nW, window^2, C) tokens; cyclic shift by (-shift,-shift) first.
template <class T>
Tensor<T> window_partition(const Tensor<T>& x, int64_t window, int64_t shift);

/// Exact inverse of window_partition (including the un-shift).
template <class T>
Tensor<T> window_reverse(const Tensor<T>& tokens, int64_t window, int64_t shift, int64_t n,
                         int64_t h, int64_t w, int64_t c);

/// Shifted-window connectivity mask (nW, T, T): 0 on same-region pairs, -100
/// on cross-region pairs.
template <class T>
Tensor<T> attention_mask(int64_t h, int64_t w, int64_t window, int64_t shift);

/// Relative-coordinate lookup into the ((2W-1)^2, heads) bias table; length W^4.
std::shared_ptr<std::vector<int64_t>> relative_position_index(int64_t window);

/// Depth-to-space: (N, C*r^2, H, W) -> (N, C, rH, rW).
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int64_t r);

/// Space-to-depth inverse of pixel_shuffle.
template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int64_t r);

template <class T> Tensor<T> nchw_to_nhwc(const Tensor<T>& x);
template <class T> Tensor<T> nhwc_to_nchw(const Tensor<T>& x);

template <class T>
struct Conv2d {
  Tensor<T> w;  // (out, in, kh, kw)
  Tensor<T> b;  // (out)
  int64_t stride = 1;
  int64_t pad = 0;

  void init(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t pad, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad); }
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <class T>
struct Linear {
  Tensor<T> w;  // (in, out)
  Tensor<T> b;  // (out)

  void init(int64_t in_dim, int64_t out_dim, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const { return add(matmul(x, w), b); }
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <class T>
struct LayerNorm {
  Tensor<T> gamma, beta;  // (C)

  void init(int64_t channels);
  Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

/// softmax((q k^T)/sqrt(d) + rel_bias + mask) v per head, then output projection.
template <class T>
struct WindowAttention {
  Linear<T> qkv;   // C -> 3C
  Linear<T> proj;  // C -> C
  Tensor<T> rel_bias_table;  // ((2W-1)^2, heads)
  std::shared_ptr<std::vector<int64_t>> rel_index;
  int64_t heads = 1;
  int64_t window = 8;
  bool use_rel_bias = true;

  void init(int64_t channels, int64_t head_count, int64_t window_size, bool rel_bias, Rng& rng);
  // mask: undefined tensor for shift 0, (nW,T,T) additive logits otherwise
  Tensor<T> forward(const Tensor<T>& tokens, const Tensor<T>& mask) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

template <class T>
struct Mlp {
  Linear<T> fc1, fc2;

  void init(int64_t channels, int64_t hidden, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const { return fc2.forward(gelu(fc1.forward(x))); }
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

/// Squeeze-excite gate: GAP -> 1x1 (C->C/squeeze) -> ReLU -> 1x1 -> sigmoid -> rescale.
template <class T>
struct ChannelAttention {
  Conv2d<T> c1, c2;

  void init(int64_t channels, int64_t squeeze, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

/// Channel attention block: 3x3 compress, GELU, 3x3 expand, channel attention.
template <class T>
struct CABlock {
  Conv2d<T> conv1, conv2;
  ChannelAttention<T> ca;

  void init(int64_t channels, int64_t squeeze, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

/// Half-instance-norm block: conv3x3 -> HIN -> lrelu -> conv3x3 -> lrelu, plus
/// a 1x1 shortcut added to the output.
template <class T>
struct HinBlock {
  Conv2d<T> conv1, conv2, shortcut;
  Tensor<T> in_gamma, in_beta;  // (C/2)

  void init(int64_t channels, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

/// Self-calibrated attention: two 1x1 convs and a sigmoid, gating per pixel.
template <class T>
struct Scam {
  Conv2d<T> c1, c2;

  void init(int64_t channels, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

}  // namespace cit::nn
