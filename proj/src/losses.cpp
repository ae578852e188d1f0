#include "cit/losses.hpp"

namespace cit::losses {

namespace {

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::ShapeMismatch, std::string(who) + ": " + shape_str(a.shape()) + " vs " +
                                       shape_str(b.shape()));
  }
}

// (N,3,H,W) -> (N, H/4, W/4) means of channel-mean intensity over 4x4 regions
template <class T>
Tensor<T> region_means(const Tensor<T>& img) {
  const int64_t n = img.dim(0), h = img.dim(2), w = img.dim(3);
  const int64_t hc = h / 4 * 4, wc = w / 4 * 4;
  Tensor<T> x = img;
  if (hc != h) x = slice(x, 2, 0, hc);
  if (wc != w) x = slice(x, 3, 0, wc);
  Tensor<T> intensity = mean(x, {1}, false);  // (N,H,W)
  Tensor<T> t = reshape(intensity, {n, hc / 4, 4, wc / 4, 4});
  return mean(t, {2, 4}, false);
}

}  // namespace

template <class T>
Tensor<T> l_rec(const Tensor<T>& we, const Tensor<T>& gt) {
  check_same_shape(we, gt, "l_rec");
  return mean(abs(sub(we, gt)));
}

template <class T>
Tensor<T> l_col(const Tensor<T>& we) {
  if (we.rank() != 4 || we.dim(1) != 3) {
    fail(ErrorCode::ShapeMismatch, "l_col expects (N,3,H,W), got " + shape_str(we.shape()));
  }
  Tensor<T> mu = mean(we, {2, 3}, false);  // (N,3)
  Tensor<T> r = slice(mu, 1, 0, 1);
  Tensor<T> g = slice(mu, 1, 1, 1);
  Tensor<T> b = slice(mu, 1, 2, 1);
  Tensor<T> rg = sub(r, g), rb = sub(r, b), gb = sub(g, b);
  Tensor<T> per_sample = add(add(mul(rg, rg), mul(rb, rb)), mul(gb, gb));  // (N,1)
  return mean(per_sample);
}

template <class T>
Tensor<T> l_spa(const Tensor<T>& we, const Tensor<T>& ie, SpaVariant variant) {
  check_same_shape(we, ie, "l_spa");
  if (we.rank() != 4 || we.dim(1) != 3) {
    fail(ErrorCode::ShapeMismatch, "l_spa expects (N,3,H,W), got " + shape_str(we.shape()));
  }
  Tensor<T> a = region_means(we);  // (N,h4,w4)
  Tensor<T> b = region_means(ie);
  if (variant == SpaVariant::region) {
    Tensor<T> d = sub(a, b);
    return mean(mul(d, d));
  }
  // neighbor form: match the contrast between adjacent regions instead of the
  // region means themselves; each adjacent pair counted once
  const int64_t h4 = a.dim(1), w4 = a.dim(2);
  auto pair_term = [](const Tensor<T>& x, const Tensor<T>& y, int axis, int64_t len) {
    Tensor<T> d0 = sub(slice(x, axis, 1, len - 1), slice(x, axis, 0, len - 1));
    Tensor<T> d1 = sub(slice(y, axis, 1, len - 1), slice(y, axis, 0, len - 1));
    Tensor<T> d = sub(abs(d0), abs(d1));
    return mean(mul(d, d));
  };
  Tensor<T> vert = pair_term(a, b, 1, h4);
  Tensor<T> horiz = pair_term(a, b, 2, w4);
  return mul(add(vert, horiz), T(0.5));
}

template <class T>
LossTerms<T> total_loss(const Tensor<T>& we, const Tensor<T>& gt, const Tensor<T>& ie,
                        const LossWeights& w) {
  if (w.lambda_col < 0 || w.lambda_spa < 0) {
    fail(ErrorCode::Config, "loss weights must be >= 0");
  }
  LossTerms<T> terms;
  terms.rec = l_rec(we, gt);
  terms.total = terms.rec;
  if (w.use_col && w.lambda_col > 0) {
    terms.col = l_col(we);
    terms.total = add(terms.total, mul(terms.col, static_cast<T>(w.lambda_col)));
  }
  if (w.use_spa && w.lambda_spa > 0) {
    terms.spa = l_spa(we, ie, w.spa_variant);
    terms.total = add(terms.total, mul(terms.spa, static_cast<T>(w.lambda_spa)));
  }
  return terms;
}

#define CIT_INST_LOSSES(T)                                                              \
  template Tensor<T> l_rec<T>(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> l_col<T>(const Tensor<T>&);                                        \
  template Tensor<T> l_spa<T>(const Tensor<T>&, const Tensor<T>&, SpaVariant);          \
  template LossTerms<T> total_loss<T>(const Tensor<T>&, const Tensor<T>&,               \
                                      const Tensor<T>&, const LossWeights&);

CIT_INST_LOSSES(float)
CIT_INST_LOSSES(double)

#undef CIT_INST_LOSSES

}  // namespace cit::losses
