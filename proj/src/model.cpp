#include "cit/model.hpp"

#include <sstream>

#include "cit/kernels.hpp"

namespace cit {

void CITConfig::validate() const {
  if (channels % heads != 0) {
    fail(ErrorCode::Config, "channels " + std::to_string(channels) + " not divisible by heads " +
                                std::to_string(heads));
  }
  if (citb_count % 2 != 0) {
    fail(ErrorCode::Config, "block count per group must be even, got " +
                                std::to_string(citb_count));
  }
  if (channels % 2 != 0) {
    fail(ErrorCode::Config, "channels must be even for half-instance norm");
  }
  if (alpha < 0 || beta < 0) fail(ErrorCode::Config, "alpha and beta must be >= 0");
  if (window < 1 || rcitg_count < 1 || heads < 1) fail(ErrorCode::Config, "invalid config");
  if (upscale != 4) fail(ErrorCode::Config, "upscale is fixed at 4");
}

CITConfig CITConfig::paper() { return CITConfig{}; }

CITConfig CITConfig::toy() {
  CITConfig c;
  c.rcitg_count = 1;
  c.citb_count = 2;
  c.window = 4;
  c.channels = 16;
  c.heads = 2;
  c.alpha = 0.2;
  c.beta = 0.2;
  return c;
}

// ---------------------------------------------------------------------------
// CITBlock
// ---------------------------------------------------------------------------

template <class T>
void CITBlock<T>::init(const CITConfig& cfg, Rng& rng) {
  ln1.init(cfg.channels);
  ln2.init(cfg.channels);
  attn.init(cfg.channels, cfg.heads, cfg.window, cfg.use_rel_bias, rng);
  cab.init(cfg.channels, cfg.squeeze, rng);
  hinb.init(cfg.channels, rng);
  const int64_t hidden = static_cast<int64_t>(cfg.channels * cfg.mlp_ratio);
  mlp.init(cfg.channels, hidden, rng);
}

template <class T>
Tensor<T> CITBlock<T>::forward(const Tensor<T>& x, int64_t shift, const CITConfig& cfg,
                               const Tensor<T>& mask) const {
  const int64_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);

  Tensor<T> normed = ln1.forward(x);

  Tensor<T> win = nn::window_partition(normed, cfg.window, shift);
  Tensor<T> att = attn.forward(win, shift > 0 ? mask : Tensor<T>());
  Tensor<T> att_sp = nn::window_reverse(att, cfg.window, shift, n, h, w, c);

  // skipping a branch whose constant weight is exactly zero is an identity,
  // gradients included
  Tensor<T> xk = add(att_sp, x);
  if (cfg.use_cab && cfg.alpha != 0.0) {
    Tensor<T> cab_out = nn::nchw_to_nhwc(cab.forward(nn::nhwc_to_nchw(normed)));
    xk = add(xk, mul(cab_out, static_cast<T>(cfg.alpha)));
  }

  Tensor<T> y = add(mlp.forward(ln2.forward(xk)), xk);
  if (cfg.use_hinb && cfg.beta != 0.0) {
    Tensor<T> hin_out = nn::nchw_to_nhwc(hinb.forward(nn::nhwc_to_nchw(normed)));
    y = add(y, mul(hin_out, static_cast<T>(cfg.beta)));
  }
  return y;
}

template <class T>
void CITBlock<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  ln1.visit(prefix + ".ln1", fn);
  attn.visit(prefix + ".attn", fn);
  cab.visit(prefix + ".cab", fn);
  ln2.visit(prefix + ".ln2", fn);
  mlp.visit(prefix + ".mlp", fn);
  hinb.visit(prefix + ".hinb", fn);
}

// ---------------------------------------------------------------------------
// RCITG
// ---------------------------------------------------------------------------

template <class T>
void RCITG<T>::init(const CITConfig& cfg, Rng& rng) {
  blocks.resize(static_cast<size_t>(cfg.citb_count));
  for (auto& b : blocks) b.init(cfg, rng);
  conv.init(cfg.channels, cfg.channels, 3, 1, 1, rng);
}

template <class T>
Tensor<T> RCITG<T>::forward(const Tensor<T>& x, const CITConfig& cfg, const Tensor<T>& mask) const {
  Tensor<T> t = x;
  for (size_t j = 0; j < blocks.size(); ++j) {
    const int64_t shift = (j % 2 == 1) ? cfg.window / 2 : 0;
    t = blocks[j].forward(t, shift, cfg, mask);
  }
  t = nn::nchw_to_nhwc(conv.forward(nn::nhwc_to_nchw(t)));
  return add(t, x);
}

template <class T>
void RCITG<T>::visit(const std::string& prefix, const nn::ParamVisitor<T>& fn) {
  for (size_t j = 0; j < blocks.size(); ++j) {
    blocks[j].visit(prefix + ".citb" + std::to_string(j), fn);
  }
  conv.visit(prefix + ".conv", fn);
}

// ---------------------------------------------------------------------------
// CITModel
// ---------------------------------------------------------------------------

template <class T>
void CITModel<T>::init(const CITConfig& config, uint64_t seed) {
  config.validate();
  cfg = config;
  Rng rng(seed);
  stem.init(3, cfg.channels, 4, 4, 0, rng);
  scam.init(cfg.channels, rng);
  groups.resize(static_cast<size_t>(cfg.rcitg_count));
  for (auto& g : groups) g.init(cfg, rng);
  conv_body.init(cfg.channels, cfg.channels, 3, 1, 1, rng);
  rec1.init(cfg.channels, cfg.channels, 3, 1, 1, rng);
  rec2.init(cfg.channels, 3 * 16, 3, 1, 1, rng);
  rec3.init(3, 3, 3, 1, 1, rng);
  // start the output at mid-gray so optimization spends no steps on DC level
  kern::fill(rec3.b.data(), rec3.b.numel(), T(0.5));
}

template <class T>
Tensor<T> CITModel<T>::forward(const Tensor<T>& img, bool training) const {
  if (img.rank() != 4 || img.dim(1) != 3) {
    fail(ErrorCode::ShapeMismatch, "forward expects (N,3,H,W), got " + shape_str(img.shape()));
  }
  const int64_t h = img.dim(2), w = img.dim(3);
  const int64_t unit = 4 * cfg.window;
  const int64_t hp = (h + unit - 1) / unit * unit;
  const int64_t wp = (w + unit - 1) / unit * unit;

  Tensor<T> x = img;
  if (hp != h || wp != w) x = nn::pad_reflect_br(x, hp - h, wp - w);

  Tensor<T> f = stem.forward(x);
  if (cfg.use_scam) f = scam.forward(f);
  Tensor<T> f0 = f;

  Tensor<T> mask =
      nn::attention_mask<T>(hp / 4, wp / 4, cfg.window, cfg.window / 2);

  Tensor<T> t = nn::nchw_to_nhwc(f0);
  for (const auto& g : groups) t = g.forward(t, cfg, mask);
  Tensor<T> glf = conv_body.forward(nn::nhwc_to_nchw(t));

  Tensor<T> y = add(f0, glf);
  y = rec1.forward(y);
  y = leaky_relu(y, T(0.2));
  y = rec2.forward(y);
  y = nn::pixel_shuffle(y, 4);
  y = rec3.forward(y);

  if (hp != h || wp != w) {
    y = slice(y, 2, 0, h);
    y = slice(y, 3, 0, w);
  }
  if (!training) y = clamp(y, T(0), T(1));
  return y;
}

template <class T>
void CITModel<T>::visit_params(const nn::ParamVisitor<T>& fn) {
  stem.visit("stem", fn);
  scam.visit("scam", fn);
  for (size_t i = 0; i < groups.size(); ++i) {
    groups[i].visit("rcitg" + std::to_string(i), fn);
  }
  conv_body.visit("conv_body", fn);
  rec1.visit("rec1", fn);
  rec2.visit("rec2", fn);
  rec3.visit("rec3", fn);
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> CITModel<T>::named_params() {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  visit_params([&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, t); });
  return out;
}

template <class T>
int64_t CITModel<T>::param_count() {
  int64_t total = 0;
  visit_params([&](const std::string&, Tensor<T>& t) { total += t.numel(); });
  return total;
}

template <class T>
std::string CITModel<T>::describe() {
  std::ostringstream os;
  os << "layer                                              shape            params\n";
  int64_t total = 0;
  visit_params([&](const std::string& name, Tensor<T>& t) {
    std::string n = name;
    if (n.size() < 50) n.resize(50, ' ');
    std::string s = shape_str(t.shape());
    if (s.size() < 16) s.resize(16, ' ');
    os << n << " " << s << " " << t.numel() << "\n";
    total += t.numel();
  });
  os << "total parameters: " << total << "\n";
  return os.str();
}

template <class T>
void CITModel<T>::zero_grads() {
  visit_params([](const std::string&, Tensor<T>& t) { t.zero_grad(); });
}

template struct CITBlock<float>;
template struct CITBlock<double>;
template struct RCITG<float>;
template struct RCITG<double>;
template struct CITModel<float>;
template struct CITModel<double>;

}  // namespace cit
