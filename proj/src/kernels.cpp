#include "cit/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cit::kern {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

inline bool use_par(int64_t work) {
  return backend() == Backend::parallel && openmp_compiled() && work >= kParallelGrain;
}

template <class T>
inline T bin_apply(BinOp op, T a, T b) {
  switch (op) {
    case BinOp::add: return a + b;
    case BinOp::sub: return a - b;
    case BinOp::mul: return a * b;
    case BinOp::div: return a / b;
  }
  return T(0);
}

template <class T>
inline T un_apply(UnOp op, T x) {
  switch (op) {
    case UnOp::neg: return -x;
    case UnOp::abs_v: return x < T(0) ? -x : x;
    case UnOp::sqrt_v: return std::sqrt(x);
    case UnOp::exp_v: return std::exp(x);
    case UnOp::log_v: return std::log(x);
    case UnOp::relu: return x > T(0) ? x : T(0);
    case UnOp::sigmoid: return T(1) / (T(1) + std::exp(-x));
    case UnOp::gelu: {
      const T inv_sqrt2 = T(0.70710678118654752440084436210485L);
      return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
    }
  }
  return T(0);
}

// strides into `shape` aligned to the trailing dims of `out`, 0 where broadcast
inline Shape bcast_strides(const Shape& shape, const Shape& out) {
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

struct Bcast2 {
  Shape oshape, ostr, astr, bstr;
  Bcast2(const Shape& as, const Shape& bs, const Shape& os)
      : oshape(os), ostr(row_major_strides(os)), astr(bcast_strides(as, os)),
        bstr(bcast_strides(bs, os)) {}
  inline void offsets(int64_t lin, int64_t& oa, int64_t& ob) const {
    oa = 0;
    ob = 0;
    int64_t q = lin;
    for (size_t i = 0; i < oshape.size(); ++i) {
      const int64_t idx = q / ostr[i];
      q -= idx * ostr[i];
      oa += idx * astr[i];
      ob += idx * bstr[i];
    }
  }
};

struct ReducePlan {
  Shape xstr;
  Shape oshape, ostr;
  std::vector<int> red_dims;
  Shape red_extents;
  int64_t red_count = 1;
  std::vector<int64_t> red_offsets;  // memoized; red_count is bounded by tensor size
  ReducePlan(const Shape& xs, const std::vector<char>& reduce_axis, const Shape& os)
      : xstr(row_major_strides(xs)), oshape(os), ostr(row_major_strides(os)) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (reduce_axis[i]) {
        red_dims.push_back(static_cast<int>(i));
        red_extents.push_back(xs[i]);
        red_count *= xs[i];
      }
    }
    red_offsets.resize(static_cast<size_t>(red_count));
    for (int64_t r = 0; r < red_count; ++r) {
      int64_t off = 0;
      int64_t q = r;
      for (int i = static_cast<int>(red_dims.size()) - 1; i >= 0; --i) {
        const int64_t e = red_extents[static_cast<size_t>(i)];
        off += (q % e) * xstr[static_cast<size_t>(red_dims[static_cast<size_t>(i)])];
        q /= e;
      }
      red_offsets[static_cast<size_t>(r)] = off;
    }
  }
  inline int64_t base_offset(int64_t out_lin) const {
    int64_t off = 0;
    int64_t q = out_lin;
    for (size_t i = 0; i < oshape.size(); ++i) {
      const int64_t idx = q / ostr[i];
      q -= idx * ostr[i];
      off += idx * xstr[i];  // reduced dims have out idx 0
    }
    return off;
  }
  inline int64_t red_offset(int64_t red_lin) const {
    return red_offsets[static_cast<size_t>(red_lin)];
  }
};

struct PermutePlan {
  Shape oshape, ostr;
  Shape in_stride_for_out;  // xstride[perm[i]]
  PermutePlan(const Shape& xs, const std::vector<int>& perm) {
    Shape xstr = row_major_strides(xs);
    oshape.resize(perm.size());
    in_stride_for_out.resize(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) {
      oshape[i] = xs[perm[i]];
      in_stride_for_out[i] = xstr[perm[i]];
    }
    ostr = row_major_strides(oshape);
  }
  inline int64_t src_offset(int64_t lin) const {
    int64_t off = 0;
    int64_t q = lin;
    for (size_t i = 0; i < oshape.size(); ++i) {
      const int64_t idx = q / ostr[i];
      q -= idx * ostr[i];
      off += idx * in_stride_for_out[i];
    }
    return off;
  }
};

template <class T>
inline void softmax_row(const T* x, T* o, int64_t cols) {
  T mx = x[0];
  for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  T sum = T(0);
  for (int64_t j = 0; j < cols; ++j) {
    o[j] = std::exp(x[j] - mx);
    sum += o[j];
  }
  const T inv = T(1) / sum;
  for (int64_t j = 0; j < cols; ++j) o[j] *= inv;
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference implementations
// ---------------------------------------------------------------------------

namespace serial {

template <class T>
void fill(T* o, int64_t n, T v) {
  for (int64_t i = 0; i < n; ++i) o[i] = v;
}

template <class T>
void copy(const T* x, T* o, int64_t n) {
  for (int64_t i = 0; i < n; ++i) o[i] = x[i];
}

template <class T>
void axpy(T* y, const T* x, int64_t n, T a) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void binary_same(BinOp op, const T* a, const T* b, T* o, int64_t n) {
  for (int64_t i = 0; i < n; ++i) o[i] = bin_apply(op, a[i], b[i]);
}

template <class T>
void binary_bcast(BinOp op, const T* a, const Shape& as, const T* b, const Shape& bs, T* o,
                  const Shape& os) {
  Bcast2 plan(as, bs, os);
  const int64_t n = numel_of(os);
  for (int64_t i = 0; i < n; ++i) {
    int64_t oa, ob;
    plan.offsets(i, oa, ob);
    o[i] = bin_apply(op, a[oa], b[ob]);
  }
}

template <class T>
void unary(UnOp op, const T* x, T* o, int64_t n) {
  for (int64_t i = 0; i < n; ++i) o[i] = un_apply(op, x[i]);
}

template <class T>
void leaky_relu(const T* x, T* o, int64_t n, T slope) {
  for (int64_t i = 0; i < n; ++i) o[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void scale_shift(const T* x, T* o, int64_t n, T mul, T add) {
  for (int64_t i = 0; i < n; ++i) o[i] = x[i] * mul + add;
}

template <class T>
void matmul(const T* a, const T* b, T* o, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* aoff, const int64_t* boff) {
  for (int64_t bi = 0; bi < batch; ++bi) {
    const T* ab = a + aoff[bi];
    const T* bb = b + boff[bi];
    T* ob = o + bi * m * n;
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (int64_t p = 0; p < k; ++p) acc += ab[i * k + p] * bb[p * n + j];
        ob[i * n + j] = acc;
      }
    }
  }
}

template <class T>
void reduce_sum(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                const Shape& os) {
  ReducePlan plan(xs, reduce_axis, os);
  const int64_t on = numel_of(os);
  for (int64_t i = 0; i < on; ++i) {
    const int64_t base = plan.base_offset(i);
    T acc = T(0);
    for (int64_t r = 0; r < plan.red_count; ++r) acc += x[base + plan.red_offset(r)];
    o[i] = acc;
  }
}

template <class T>
void reduce_max(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                int64_t* argmax, const Shape& os) {
  ReducePlan plan(xs, reduce_axis, os);
  const int64_t on = numel_of(os);
  for (int64_t i = 0; i < on; ++i) {
    const int64_t base = plan.base_offset(i);
    T best = x[base];
    int64_t best_at = base;
    for (int64_t r = 1; r < plan.red_count; ++r) {
      const int64_t off = base + plan.red_offset(r);
      if (x[off] > best) {
        best = x[off];
        best_at = off;
      }
    }
    o[i] = best;
    argmax[i] = best_at;
  }
}

template <class T>
void permute_copy(const T* x, const Shape& xs, const std::vector<int>& perm, T* o) {
  PermutePlan plan(xs, perm);
  const int64_t n = numel_of(xs);
  for (int64_t i = 0; i < n; ++i) o[i] = x[plan.src_offset(i)];
}

template <class T>
void softmax_lastdim(const T* x, T* o, int64_t rows, int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, o + r * cols, cols);
}

template <class T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, int64_t n, int64_t ci, int64_t h,
                int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo) {
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t c = 0; c < co; ++c) {
      const T* xn = x + ni * ci * h * wd;
      T* yp = y + ((ni * co + c) * ho) * wo;
      for (int64_t oh = 0; oh < ho; ++oh) {
        for (int64_t ow = 0; ow < wo; ++ow) {
          T acc = b ? b[c] : T(0);
          const int64_t h0 = oh * stride - pad;
          const int64_t w0 = ow * stride - pad;
          for (int64_t ic = 0; ic < ci; ++ic) {
            const T* xc = xn + ic * h * wd;
            const T* wc = w + ((c * ci + ic) * kh) * kw;
            for (int64_t r = 0; r < kh; ++r) {
              const int64_t ih = h0 + r;
              if (ih < 0 || ih >= h) continue;
              for (int64_t s = 0; s < kw; ++s) {
                const int64_t iw = w0 + s;
                if (iw < 0 || iw >= wd) continue;
                acc += xc[ih * wd + iw] * wc[r * kw + s];
              }
            }
          }
          yp[oh * wo + ow] = acc;
        }
      }
    }
  }
}

template <class T>
void conv2d_bwd_input(const T* g, const T* w, T* gx, int64_t n, int64_t ci, int64_t h, int64_t wd,
                      int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t ho,
                      int64_t wo) {
  // gather form: each input position collects from the outputs it fed
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ic = 0; ic < ci; ++ic) {
      T* gxp = gx + ((ni * ci + ic) * h) * wd;
      for (int64_t ih = 0; ih < h; ++ih) {
        for (int64_t iw = 0; iw < wd; ++iw) {
          T acc = T(0);
          for (int64_t c = 0; c < co; ++c) {
            const T* gp = g + ((ni * co + c) * ho) * wo;
            const T* wc = w + ((c * ci + ic) * kh) * kw;
            for (int64_t r = 0; r < kh; ++r) {
              const int64_t num = ih + pad - r;
              if (num < 0 || num % stride != 0) continue;
              const int64_t oh = num / stride;
              if (oh >= ho) continue;
              for (int64_t s = 0; s < kw; ++s) {
                const int64_t numw = iw + pad - s;
                if (numw < 0 || numw % stride != 0) continue;
                const int64_t ow = numw / stride;
                if (ow >= wo) continue;
                acc += gp[oh * wo + ow] * wc[r * kw + s];
              }
            }
          }
          gxp[ih * wd + iw] += acc;
        }
      }
    }
  }
}

template <class T>
void conv2d_bwd_weight(const T* g, const T* x, T* gw, T* gb, int64_t n, int64_t ci, int64_t h,
                       int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                       int64_t ho, int64_t wo) {
  for (int64_t c = 0; c < co; ++c) {
    if (gb) {
      T acc = T(0);
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* gp = g + ((ni * co + c) * ho) * wo;
        for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
      }
      gb[c] += acc;
    }
    for (int64_t ic = 0; ic < ci; ++ic) {
      for (int64_t r = 0; r < kh; ++r) {
        for (int64_t s = 0; s < kw; ++s) {
          T acc = T(0);
          for (int64_t ni = 0; ni < n; ++ni) {
            const T* gp = g + ((ni * co + c) * ho) * wo;
            const T* xc = x + ((ni * ci + ic) * h) * wd;
            for (int64_t oh = 0; oh < ho; ++oh) {
              const int64_t ih = oh * stride - pad + r;
              if (ih < 0 || ih >= h) continue;
              for (int64_t ow = 0; ow < wo; ++ow) {
                const int64_t iw = ow * stride - pad + s;
                if (iw < 0 || iw >= wd) continue;
                acc += gp[oh * wo + ow] * xc[ih * wd + iw];
              }
            }
          }
          gw[((c * ci + ic) * kh + r) * kw + s] += acc;
        }
      }
    }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations: parallel over independent output elements so the
// per-element accumulation order matches the serial reference bit for bit.
// ---------------------------------------------------------------------------

namespace par {

template <class T>
void fill(T* o, int64_t n, T v) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) o[i] = v;
}

template <class T>
void copy(const T* x, T* o, int64_t n) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) o[i] = x[i];
}

template <class T>
void axpy(T* y, const T* x, int64_t n, T a) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void binary_same(BinOp op, const T* a, const T* b, T* o, int64_t n) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) o[i] = bin_apply(op, a[i], b[i]);
}

template <class T>
void binary_bcast(BinOp op, const T* a, const Shape& as, const T* b, const Shape& bs, T* o,
                  const Shape& os) {
  Bcast2 plan(as, bs, os);
  const int64_t n = numel_of(os);
  // index math runs once per row of the trailing dim, not once per element
  const int64_t cols = os.empty() ? 1 : os.back();
  const int64_t rows = cols > 0 ? n / cols : 0;
  const int64_t sa = plan.astr.empty() ? 0 : plan.astr.back();
  const int64_t sb = plan.bstr.empty() ? 0 : plan.bstr.back();
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t row = 0; row < rows; ++row) {
    int64_t oa, ob;
    plan.offsets(row * cols, oa, ob);
    T* orow = o + row * cols;
    const T* ap = a + oa;
    const T* bp = b + ob;
    for (int64_t j = 0; j < cols; ++j) {
      orow[j] = bin_apply(op, ap[j * sa], bp[j * sb]);
    }
  }
}

template <class T>
void unary(UnOp op, const T* x, T* o, int64_t n) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) o[i] = un_apply(op, x[i]);
}

template <class T>
void leaky_relu(const T* x, T* o, int64_t n, T slope) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) o[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void scale_shift(const T* x, T* o, int64_t n, T mul, T add) {
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) o[i] = x[i] * mul + add;
}

template <class T>
void matmul(const T* a, const T* b, T* o, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* aoff, const int64_t* boff) {
  const int64_t rows = batch * m;
#pragma omp parallel for if (rows * n * k >= kParallelGrain)
  for (int64_t row = 0; row < rows; ++row) {
    const int64_t bi = row / m;
    const int64_t i = row % m;
    const T* ab = a + aoff[bi] + i * k;
    const T* bb = b + boff[bi];
    T* ob = o + bi * m * n + i * n;
    for (int64_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (int64_t p = 0; p < k; ++p) acc += ab[p] * bb[p * n + j];
      ob[j] = acc;
    }
  }
}

template <class T>
void reduce_sum(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                const Shape& os) {
  ReducePlan plan(xs, reduce_axis, os);
  const int64_t on = numel_of(os);
#pragma omp parallel for if (on >= 64 && on * plan.red_count >= kParallelGrain)
  for (int64_t i = 0; i < on; ++i) {
    const int64_t base = plan.base_offset(i);
    T acc = T(0);
    for (int64_t r = 0; r < plan.red_count; ++r) acc += x[base + plan.red_offset(r)];
    o[i] = acc;
  }
}

template <class T>
void reduce_max(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                int64_t* argmax, const Shape& os) {
  ReducePlan plan(xs, reduce_axis, os);
  const int64_t on = numel_of(os);
#pragma omp parallel for if (on >= 64 && on * plan.red_count >= kParallelGrain)
  for (int64_t i = 0; i < on; ++i) {
    const int64_t base = plan.base_offset(i);
    T best = x[base];
    int64_t best_at = base;
    for (int64_t r = 1; r < plan.red_count; ++r) {
      const int64_t off = base + plan.red_offset(r);
      if (x[off] > best) {
        best = x[off];
        best_at = off;
      }
    }
    o[i] = best;
    argmax[i] = best_at;
  }
}

template <class T>
void permute_copy(const T* x, const Shape& xs, const std::vector<int>& perm, T* o) {
  PermutePlan plan(xs, perm);
  const int64_t n = numel_of(xs);
  const int64_t cols = plan.oshape.empty() ? 1 : plan.oshape.back();
  const int64_t rows = cols > 0 ? n / cols : 0;
  const int64_t step = plan.in_stride_for_out.empty() ? 1 : plan.in_stride_for_out.back();
#pragma omp parallel for if (n >= kParallelGrain)
  for (int64_t row = 0; row < rows; ++row) {
    const T* src = x + plan.src_offset(row * cols);
    T* dst = o + row * cols;
    for (int64_t j = 0; j < cols; ++j) dst[j] = src[j * step];
  }
}

template <class T>
void softmax_lastdim(const T* x, T* o, int64_t rows, int64_t cols) {
#pragma omp parallel for if (rows >= 16 && rows * cols >= kParallelGrain)
  for (int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, o + r * cols, cols);
}

template <class T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, int64_t n, int64_t ci, int64_t h,
                int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo) {
  const int64_t maps = n * co;
#pragma omp parallel for if (maps * ho * wo * ci * kh * kw >= kParallelGrain)
  for (int64_t map = 0; map < maps; ++map) {
    const int64_t ni = map / co;
    const int64_t c = map % co;
    const T* xn = x + ni * ci * h * wd;
    T* yp = y + map * ho * wo;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow) {
        T acc = b ? b[c] : T(0);
        const int64_t h0 = oh * stride - pad;
        const int64_t w0 = ow * stride - pad;
        if (h0 >= 0 && h0 + kh <= h && w0 >= 0 && w0 + kw <= wd) {
          // interior: no per-tap bounds checks
          for (int64_t ic = 0; ic < ci; ++ic) {
            const T* xc = xn + ic * h * wd + h0 * wd + w0;
            const T* wc = w + ((c * ci + ic) * kh) * kw;
            for (int64_t r = 0; r < kh; ++r) {
              const T* xr = xc + r * wd;
              const T* wr = wc + r * kw;
              for (int64_t s = 0; s < kw; ++s) acc += xr[s] * wr[s];
            }
          }
        } else {
          for (int64_t ic = 0; ic < ci; ++ic) {
            const T* xc = xn + ic * h * wd;
            const T* wc = w + ((c * ci + ic) * kh) * kw;
            for (int64_t r = 0; r < kh; ++r) {
              const int64_t ih = h0 + r;
              if (ih < 0 || ih >= h) continue;
              for (int64_t s = 0; s < kw; ++s) {
                const int64_t iw = w0 + s;
                if (iw < 0 || iw >= wd) continue;
                acc += xc[ih * wd + iw] * wc[r * kw + s];
              }
            }
          }
        }
        yp[oh * wo + ow] = acc;
      }
    }
  }
}

template <class T>
void conv2d_bwd_input(const T* g, const T* w, T* gx, int64_t n, int64_t ci, int64_t h, int64_t wd,
                      int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t ho,
                      int64_t wo) {
  const int64_t maps = n * ci;
  if (stride == 1) {
#pragma omp parallel for if (maps * h * wd * co >= kParallelGrain)
    for (int64_t map = 0; map < maps; ++map) {
      const int64_t ni = map / ci;
      const int64_t ic = map % ci;
      T* gxp = gx + map * h * wd;
      for (int64_t ih = 0; ih < h; ++ih) {
        const int64_t r_lo = std::max<int64_t>(0, ih + pad - ho + 1);
        const int64_t r_hi = std::min(kh, ih + pad + 1);
        for (int64_t iw = 0; iw < wd; ++iw) {
          const int64_t s_lo = std::max<int64_t>(0, iw + pad - wo + 1);
          const int64_t s_hi = std::min(kw, iw + pad + 1);
          T acc = T(0);
          for (int64_t c = 0; c < co; ++c) {
            const T* gp = g + ((ni * co + c) * ho + ih + pad) * wo + iw + pad;
            const T* wc = w + ((c * ci + ic) * kh) * kw;
            for (int64_t r = r_lo; r < r_hi; ++r) {
              const T* gr = gp - r * wo;
              const T* wr = wc + r * kw;
              for (int64_t s = s_lo; s < s_hi; ++s) acc += gr[-s] * wr[s];
            }
          }
          gxp[ih * wd + iw] += acc;
        }
      }
    }
    return;
  }
#pragma omp parallel for if (maps * h * wd * co >= kParallelGrain)
  for (int64_t map = 0; map < maps; ++map) {
    const int64_t ni = map / ci;
    const int64_t ic = map % ci;
    T* gxp = gx + map * h * wd;
    for (int64_t ih = 0; ih < h; ++ih) {
      // valid taps satisfy r = ih + pad - oh*stride, so r steps by stride
      const int64_t r0 = (ih + pad) % stride;
      for (int64_t iw = 0; iw < wd; ++iw) {
        const int64_t s0 = (iw + pad) % stride;
        T acc = T(0);
        for (int64_t c = 0; c < co; ++c) {
          const T* gp = g + ((ni * co + c) * ho) * wo;
          const T* wc = w + ((c * ci + ic) * kh) * kw;
          for (int64_t r = r0; r < kh; r += stride) {
            const int64_t oh = (ih + pad - r) / stride;
            if (oh < 0 || oh >= ho) continue;
            const T* gr = gp + oh * wo;
            const T* wr = wc + r * kw;
            for (int64_t s = s0; s < kw; s += stride) {
              const int64_t ow = (iw + pad - s) / stride;
              if (ow < 0 || ow >= wo) continue;
              acc += gr[ow] * wr[s];
            }
          }
        }
        gxp[ih * wd + iw] += acc;
      }
    }
  }
}

template <class T>
void conv2d_bwd_weight(const T* g, const T* x, T* gw, T* gb, int64_t n, int64_t ci, int64_t h,
                       int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                       int64_t ho, int64_t wo) {
#pragma omp parallel for if (co > 1 && co* ci* kh* kw* n* ho* wo >= kParallelGrain)
  for (int64_t c = 0; c < co; ++c) {
    if (gb) {
      T acc = T(0);
      for (int64_t ni = 0; ni < n; ++ni) {
        const T* gp = g + ((ni * co + c) * ho) * wo;
        for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
      }
      gb[c] += acc;
    }
    for (int64_t ic = 0; ic < ci; ++ic) {
      for (int64_t r = 0; r < kh; ++r) {
        // precomputed output range keeping ih = oh*stride - pad + r inside [0,h)
        const int64_t oh_lo = std::max<int64_t>(0, (pad - r + stride - 1) / stride);
        const int64_t h_num = h - 1 - r + pad;
        const int64_t oh_hi = h_num < 0 ? 0 : std::min(ho, h_num / stride + 1);
        for (int64_t s = 0; s < kw; ++s) {
          const int64_t ow_lo = std::max<int64_t>(0, (pad - s + stride - 1) / stride);
          const int64_t w_num = wd - 1 - s + pad;
          const int64_t ow_hi = w_num < 0 ? 0 : std::min(wo, w_num / stride + 1);
          T acc = T(0);
          for (int64_t ni = 0; ni < n; ++ni) {
            const T* gp = g + ((ni * co + c) * ho) * wo;
            const T* xc = x + ((ni * ci + ic) * h) * wd;
            for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
              const T* gr = gp + oh * wo;
              const T* xr = xc + (oh * stride - pad + r) * wd - pad + s;
              for (int64_t ow = ow_lo; ow < ow_hi; ++ow) {
                acc += gr[ow] * xr[ow * stride];
              }
            }
          }
          gw[((c * ci + ic) * kh + r) * kw + s] += acc;
        }
      }
    }
  }
}

}  // namespace par

// ---------------------------------------------------------------------------
// dispatchers
// ---------------------------------------------------------------------------

#define CIT_DISPATCH(call_serial, call_par, work)            \
  do {                                                       \
    if (use_par(work)) {                                     \
      call_par;                                              \
    } else {                                                 \
      call_serial;                                           \
    }                                                        \
  } while (0)

template <class T>
void fill(T* o, int64_t n, T v) {
  CIT_DISPATCH(serial::fill(o, n, v), par::fill(o, n, v), n);
}

template <class T>
void copy(const T* x, T* o, int64_t n) {
  CIT_DISPATCH(serial::copy(x, o, n), par::copy(x, o, n), n);
}

template <class T>
void axpy(T* y, const T* x, int64_t n, T a) {
  CIT_DISPATCH(serial::axpy(y, x, n, a), par::axpy(y, x, n, a), n);
}

template <class T>
void binary_same(BinOp op, const T* a, const T* b, T* o, int64_t n) {
  CIT_DISPATCH(serial::binary_same(op, a, b, o, n), par::binary_same(op, a, b, o, n), n);
}

template <class T>
void binary_bcast(BinOp op, const T* a, const Shape& as, const T* b, const Shape& bs, T* o,
                  const Shape& os) {
  CIT_DISPATCH(serial::binary_bcast(op, a, as, b, bs, o, os),
               par::binary_bcast(op, a, as, b, bs, o, os), numel_of(os));
}

template <class T>
void unary(UnOp op, const T* x, T* o, int64_t n) {
  CIT_DISPATCH(serial::unary(op, x, o, n), par::unary(op, x, o, n), n);
}

template <class T>
void leaky_relu(const T* x, T* o, int64_t n, T slope) {
  CIT_DISPATCH(serial::leaky_relu(x, o, n, slope), par::leaky_relu(x, o, n, slope), n);
}

template <class T>
void scale_shift(const T* x, T* o, int64_t n, T mul, T add) {
  CIT_DISPATCH(serial::scale_shift(x, o, n, mul, add), par::scale_shift(x, o, n, mul, add), n);
}

template <class T>
void matmul(const T* a, const T* b, T* o, int64_t batch, int64_t m, int64_t k, int64_t n,
            const int64_t* aoff, const int64_t* boff) {
  CIT_DISPATCH(serial::matmul(a, b, o, batch, m, k, n, aoff, boff),
               par::matmul(a, b, o, batch, m, k, n, aoff, boff), batch * m * k * n);
}

template <class T>
void reduce_sum(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                const Shape& os) {
  CIT_DISPATCH(serial::reduce_sum(x, xs, reduce_axis, o, os),
               par::reduce_sum(x, xs, reduce_axis, o, os), numel_of(xs));
}

template <class T>
void reduce_max(const T* x, const Shape& xs, const std::vector<char>& reduce_axis, T* o,
                int64_t* argmax, const Shape& os) {
  CIT_DISPATCH(serial::reduce_max(x, xs, reduce_axis, o, argmax, os),
               par::reduce_max(x, xs, reduce_axis, o, argmax, os), numel_of(xs));
}

template <class T>
void permute_copy(const T* x, const Shape& xs, const std::vector<int>& perm, T* o) {
  CIT_DISPATCH(serial::permute_copy(x, xs, perm, o), par::permute_copy(x, xs, perm, o),
               numel_of(xs));
}

template <class T>
void softmax_lastdim(const T* x, T* o, int64_t rows, int64_t cols) {
  CIT_DISPATCH(serial::softmax_lastdim(x, o, rows, cols), par::softmax_lastdim(x, o, rows, cols),
               rows * cols);
}

template <class T>
void conv2d_fwd(const T* x, const T* w, const T* b, T* y, int64_t n, int64_t ci, int64_t h,
                int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                int64_t ho, int64_t wo) {
  CIT_DISPATCH(serial::conv2d_fwd(x, w, b, y, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo),
               par::conv2d_fwd(x, w, b, y, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo),
               n * co * ho * wo * ci * kh * kw);
}

template <class T>
void conv2d_bwd_input(const T* g, const T* w, T* gx, int64_t n, int64_t ci, int64_t h, int64_t wd,
                      int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad, int64_t ho,
                      int64_t wo) {
  CIT_DISPATCH(serial::conv2d_bwd_input(g, w, gx, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo),
               par::conv2d_bwd_input(g, w, gx, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo),
               n * ci * h * wd * co);
}

template <class T>
void conv2d_bwd_weight(const T* g, const T* x, T* gw, T* gb, int64_t n, int64_t ci, int64_t h,
                       int64_t wd, int64_t co, int64_t kh, int64_t kw, int64_t stride, int64_t pad,
                       int64_t ho, int64_t wo) {
  CIT_DISPATCH(
      serial::conv2d_bwd_weight(g, x, gw, gb, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo),
      par::conv2d_bwd_weight(g, x, gw, gb, n, ci, h, wd, co, kh, kw, stride, pad, ho, wo),
      co * ci * kh * kw * n * ho * wo);
}

#undef CIT_DISPATCH

// explicit instantiations for the two supported scalar types
#define CIT_INST_KERNELS(T)                                                                        \
  template void serial::fill<T>(T*, int64_t, T);                                                   \
  template void serial::copy<T>(const T*, T*, int64_t);                                            \
  template void serial::axpy<T>(T*, const T*, int64_t, T);                                         \
  template void serial::binary_same<T>(BinOp, const T*, const T*, T*, int64_t);                    \
  template void serial::binary_bcast<T>(BinOp, const T*, const Shape&, const T*, const Shape&,     \
                                        T*, const Shape&);                                         \
  template void serial::unary<T>(UnOp, const T*, T*, int64_t);                                     \
  template void serial::leaky_relu<T>(const T*, T*, int64_t, T);                                   \
  template void serial::scale_shift<T>(const T*, T*, int64_t, T, T);                               \
  template void serial::matmul<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, int64_t,      \
                                  const int64_t*, const int64_t*);                                 \
  template void serial::reduce_sum<T>(const T*, const Shape&, const std::vector<char>&, T*,        \
                                      const Shape&);                                               \
  template void serial::reduce_max<T>(const T*, const Shape&, const std::vector<char>&, T*,        \
                                      int64_t*, const Shape&);                                     \
  template void serial::permute_copy<T>(const T*, const Shape&, const std::vector<int>&, T*);      \
  template void serial::softmax_lastdim<T>(const T*, T*, int64_t, int64_t);                        \
  template void serial::conv2d_fwd<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t, \
                                      int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,        \
                                      int64_t, int64_t);                                           \
  template void serial::conv2d_bwd_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,     \
                                            int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,  \
                                            int64_t, int64_t);                                     \
  template void serial::conv2d_bwd_weight<T>(const T*, const T*, T*, T*, int64_t, int64_t,         \
                                             int64_t, int64_t, int64_t, int64_t, int64_t,          \
                                             int64_t, int64_t, int64_t, int64_t);                  \
  template void par::fill<T>(T*, int64_t, T);                                                      \
  template void par::copy<T>(const T*, T*, int64_t);                                               \
  template void par::axpy<T>(T*, const T*, int64_t, T);                                            \
  template void par::binary_same<T>(BinOp, const T*, const T*, T*, int64_t);                       \
  template void par::binary_bcast<T>(BinOp, const T*, const Shape&, const T*, const Shape&, T*,    \
                                     const Shape&);                                                \
  template void par::unary<T>(UnOp, const T*, T*, int64_t);                                        \
  template void par::leaky_relu<T>(const T*, T*, int64_t, T);                                      \
  template void par::scale_shift<T>(const T*, T*, int64_t, T, T);                                  \
  template void par::matmul<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, int64_t,         \
                               const int64_t*, const int64_t*);                                    \
  template void par::reduce_sum<T>(const T*, const Shape&, const std::vector<char>&, T*,           \
                                   const Shape&);                                                  \
  template void par::reduce_max<T>(const T*, const Shape&, const std::vector<char>&, T*,           \
                                   int64_t*, const Shape&);                                        \
  template void par::permute_copy<T>(const T*, const Shape&, const std::vector<int>&, T*);         \
  template void par::softmax_lastdim<T>(const T*, T*, int64_t, int64_t);                           \
  template void par::conv2d_fwd<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t,    \
                                   int64_t, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,  \
                                   int64_t);                                                       \
  template void par::conv2d_bwd_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,        \
                                         int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,     \
                                         int64_t, int64_t);                                        \
  template void par::conv2d_bwd_weight<T>(const T*, const T*, T*, T*, int64_t, int64_t, int64_t,   \
                                          int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,    \
                                          int64_t, int64_t);                                       \
  template void fill<T>(T*, int64_t, T);                                                           \
  template void copy<T>(const T*, T*, int64_t);                                                    \
  template void axpy<T>(T*, const T*, int64_t, T);                                                 \
  template void binary_same<T>(BinOp, const T*, const T*, T*, int64_t);                            \
  template void binary_bcast<T>(BinOp, const T*, const Shape&, const T*, const Shape&, T*,         \
                                const Shape&);                                                     \
  template void unary<T>(UnOp, const T*, T*, int64_t);                                             \
  template void leaky_relu<T>(const T*, T*, int64_t, T);                                           \
  template void scale_shift<T>(const T*, T*, int64_t, T, T);                                       \
  template void matmul<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, int64_t,              \
                          const int64_t*, const int64_t*);                                         \
  template void reduce_sum<T>(const T*, const Shape&, const std::vector<char>&, T*, const Shape&); \
  template void reduce_max<T>(const T*, const Shape&, const std::vector<char>&, T*, int64_t*,      \
                              const Shape&);                                                       \
  template void permute_copy<T>(const T*, const Shape&, const std::vector<int>&, T*);              \
  template void softmax_lastdim<T>(const T*, T*, int64_t, int64_t);                                \
  template void conv2d_fwd<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t,         \
                              int64_t, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,       \
                              int64_t);                                                            \
  template void conv2d_bwd_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, int64_t,    \
                                    int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,          \
                                    int64_t);                                                      \
  template void conv2d_bwd_weight<T>(const T*, const T*, T*, T*, int64_t, int64_t, int64_t,        \
                                     int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,         \
                                     int64_t, int64_t);

CIT_INST_KERNELS(float)
CIT_INST_KERNELS(double)

#undef CIT_INST_KERNELS

}  // namespace cit::kern
