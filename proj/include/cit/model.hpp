#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cit/nn.hpp"

// The full exposure-correction graph: stride-4 stem with a self-calibrated
// attention gate, N residual groups of M windowed-attention blocks with
// channel-attention and half-instance-norm injections, a global residual, and
// a pixel-shuffle reconstruction head. Input and output are (N,3,H,W) in [0,1].

namespace cit {

struct CITConfig {
  int64_t rcitg_count = 6;  // N
  int64_t citb_count = 6;   // M, even so plain/shifted attention alternate
  int64_t window = 8;
  int64_t channels = 180;
  int64_t heads = 6;
  double alpha = 0.01;     // channel-attention branch weight
  double beta = 0.01;      // half-instance-norm branch weight
  int64_t squeeze = 3;
  double mlp_ratio = 2.0;
  int64_t upscale = 4;     // fixed: stride-4 stem, x4 reconstruction
  bool use_scam = true;
  bool use_cab = true;
  bool use_hinb = true;
  bool use_rel_bias = true;

  void validate() const;
  static CITConfig paper();  // N=6 M=6 W=8 C=180 heads=6 alpha=beta=0.01 squeeze=3
  static CITConfig toy();    // desk-scale config for tests and quick runs
};

template <class T>
struct CITBlock {
  nn::LayerNorm<T> ln1, ln2;
  nn::WindowAttention<T> attn;
  nn::CABlock<T> cab;
  nn::HinBlock<T> hinb;
  nn::Mlp<T> mlp;

  void init(const CITConfig& cfg, Rng& rng);
  // x is NHWC; mask is consumed only when shift > 0
  Tensor<T> forward(const Tensor<T>& x, int64_t shift, const CITConfig& cfg,
                    const Tensor<T>& mask) const;
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
};

template <class T>
struct RCITG {
  std::vector<CITBlock<T>> blocks;
  nn::Conv2d<T> conv;  // 3x3 tail before the group residual

  void init(const CITConfig& cfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const CITConfig& cfg, const Tensor<T>& mask) const;
  void visit(const std::string& prefix, const nn::ParamVisitor<T>& fn);
};

template <class T>
struct CITModel {
  CITConfig cfg;
  nn::Conv2d<T> stem;       // 3 -> C, 4x4, stride 4
  nn::Scam<T> scam;
  std::vector<RCITG<T>> groups;
  nn::Conv2d<T> conv_body;  // 3x3 C -> C after the groups
  nn::Conv2d<T> rec1;       // 3x3 C -> C
  nn::Conv2d<T> rec2;       // 3x3 C -> 3*16, feeds pixel_shuffle(4)
  nn::Conv2d<T> rec3;       // 3x3 3 -> 3

  void init(const CITConfig& config, uint64_t seed);
  /// (N,3,H,W) -> (N,3,H,W); reflect-pads up to a multiple of 4*window and
  /// crops back. Inference clamps to [0,1]; training leaves outputs free.
  Tensor<T> forward(const Tensor<T>& img, bool training) const;
  void visit_params(const nn::ParamVisitor<T>& fn);
  std::vector<std::pair<std::string, Tensor<T>>> named_params();
  int64_t param_count();
  std::string describe();
  void zero_grads();
};

extern template struct CITBlock<float>;
extern template struct CITBlock<double>;
extern template struct RCITG<float>;
extern template struct RCITG<double>;
extern template struct CITModel<float>;
extern template struct CITModel<double>;

}  // namespace cit
