#pragma once

#include <string>
#include <vector>

#include "cit/image.hpp"

// Full-reference quality metrics: PSNR and single-scale SSIM (11x11 Gaussian
// window, sigma 1.5, K1=0.01, K2=0.03, peak 1.0, valid windows only).

namespace cit::metrics {

enum class SsimMode {
  rgb_mean,  // SSIM per RGB channel, averaged
  luma,      // SSIM on BT.601 luma
};

/// 10*log10(peak^2 / MSE) over all pixels and channels; +inf for identical images.
double psnr(const ImageRGB& a, const ImageRGB& b, double peak = 1.0);

double ssim(const ImageRGB& a, const ImageRGB& b, SsimMode mode = SsimMode::rgb_mean);

struct PairMetrics {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<PairMetrics> per_image;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
};

MetricReport evaluate_pairs(const std::vector<ImageRGB>& outputs,
                            const std::vector<ImageRGB>& references,
                            const std::vector<std::string>& names,
                            SsimMode mode = SsimMode::rgb_mean);

std::string report_text(const MetricReport& report);

/// One row per image: path,psnr,ssim with a header line.
void write_report_csv(const MetricReport& report, const std::string& path);

}  // namespace cit::metrics
