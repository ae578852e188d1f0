#include "cit/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace cit::metrics {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_taps() {
  std::vector<double> g(kWin);
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[static_cast<size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// separable valid-region Gaussian filter; in (h,w) -> out (h-10, w-10)
void filter_valid(const std::vector<double>& in, int64_t h, int64_t w, const std::vector<double>& g,
                  std::vector<double>& out) {
  const int64_t wo = w - kWin + 1;
  const int64_t ho = h - kWin + 1;
  std::vector<double> tmp(static_cast<size_t>(h * wo));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[static_cast<size_t>(k)] * in[static_cast<size_t>(y * w + x + k)];
      tmp[static_cast<size_t>(y * wo + x)] = acc;
    }
  }
  out.assign(static_cast<size_t>(ho * wo), 0.0);
  for (int64_t y = 0; y < ho; ++y) {
    for (int64_t x = 0; x < wo; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[static_cast<size_t>(k)] * tmp[static_cast<size_t>((y + k) * wo + x)];
      out[static_cast<size_t>(y * wo + x)] = acc;
    }
  }
}

double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int64_t h,
                  int64_t w) {
  static const std::vector<double> g = gaussian_taps();
  const double c1 = kK1 * kK1;  // peak = 1
  const double c2 = kK2 * kK2;

  const int64_t n = h * w;
  std::vector<double> xx(static_cast<size_t>(n)), yy(static_cast<size_t>(n)),
      xy(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    xx[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
    yy[static_cast<size_t>(i)] = y[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
    xy[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] * y[static_cast<size_t>(i)];
  }
  std::vector<double> mx, my, mxx, myy, mxy;
  filter_valid(x, h, w, g, mx);
  filter_valid(y, h, w, g, my);
  filter_valid(xx, h, w, g, mxx);
  filter_valid(yy, h, w, g, myy);
  filter_valid(xy, h, w, g, mxy);

  double acc = 0.0;
  for (size_t i = 0; i < mx.size(); ++i) {
    const double mu_x = mx[i], mu_y = my[i];
    const double var_x = mxx[i] - mu_x * mu_x;
    const double var_y = myy[i] - mu_y * mu_y;
    const double cov = mxy[i] - mu_x * mu_y;
    const double num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
    const double den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mx.size());
}

void check_dims(const ImageRGB& a, const ImageRGB& b) {
  if (a.height != b.height || a.width != b.width) {
    fail(ErrorCode::ShapeMismatch, "image dims differ: " + std::to_string(a.height) + "x" +
                                       std::to_string(a.width) + " vs " +
                                       std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

}  // namespace

double psnr(const ImageRGB& a, const ImageRGB& b, double peak) {
  check_dims(a, b);
  double se = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImageRGB& a, const ImageRGB& b, SsimMode mode) {
  check_dims(a, b);
  if (a.height < kWin || a.width < kWin) {
    fail(ErrorCode::TooSmall, "ssim needs at least " + std::to_string(kWin) + "x" +
                                  std::to_string(kWin) + " pixels");
  }
  const int64_t h = a.height, w = a.width;
  const int64_t n = h * w;
  if (mode == SsimMode::luma) {
    std::vector<double> ya(static_cast<size_t>(n)), yb(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      const size_t p = static_cast<size_t>(i) * 3;
      ya[static_cast<size_t>(i)] =
          0.299 * a.pixels[p] + 0.587 * a.pixels[p + 1] + 0.114 * a.pixels[p + 2];
      yb[static_cast<size_t>(i)] =
          0.299 * b.pixels[p] + 0.587 * b.pixels[p + 1] + 0.114 * b.pixels[p + 2];
    }
    return ssim_plane(ya, yb, h, w);
  }
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pa(static_cast<size_t>(n)), pb(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      pa[static_cast<size_t>(i)] = a.pixels[static_cast<size_t>(i) * 3 + static_cast<size_t>(c)];
      pb[static_cast<size_t>(i)] = b.pixels[static_cast<size_t>(i) * 3 + static_cast<size_t>(c)];
    }
    acc += ssim_plane(pa, pb, h, w);
  }
  return acc / 3.0;
}

MetricReport evaluate_pairs(const std::vector<ImageRGB>& outputs,
                            const std::vector<ImageRGB>& references,
                            const std::vector<std::string>& names, SsimMode mode) {
  if (outputs.size() != references.size() || outputs.size() != names.size()) {
    fail(ErrorCode::ShapeMismatch, "evaluate_pairs: mismatched list lengths");
  }
  MetricReport rep;
  double psum = 0.0, ssum = 0.0;
  for (size_t i = 0; i < outputs.size(); ++i) {
    PairMetrics pm;
    pm.name = names[i];
    pm.psnr_db = psnr(outputs[i], references[i]);
    pm.ssim = ssim(outputs[i], references[i], mode);
    psum += pm.psnr_db;
    ssum += pm.ssim;
    rep.per_image.push_back(pm);
  }
  const double count = static_cast<double>(outputs.size());
  rep.mean_psnr_db = outputs.empty() ? 0.0 : psum / count;
  rep.mean_ssim = outputs.empty() ? 0.0 : ssum / count;
  return rep;
}

std::string report_text(const MetricReport& report) {
  std::ostringstream os;
  for (const auto& pm : report.per_image) {
    os << pm.name << "  psnr=" << pm.psnr_db << "dB  ssim=" << pm.ssim << "\n";
  }
  os << "mean  psnr=" << report.mean_psnr_db << "dB  ssim=" << report.mean_ssim << " ("
     << report.per_image.size() << " images)\n";
  return os.str();
}

void write_report_csv(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << "path,psnr,ssim\n";
  for (const auto& pm : report.per_image) {
    out << pm.name << "," << pm.psnr_db << "," << pm.ssim << "\n";
  }
}

}  // namespace cit::metrics
