#include "cit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace cit::data {

namespace fs = std::filesystem;

ImageRGB apply_exposure(const ImageRGB& gt, double ev, double gamma) {
  ImageRGB out(gt.height, gt.width);
  const double gain = std::pow(2.0, ev);
  for (size_t i = 0; i < gt.pixels.size(); ++i) {
    const double v = std::pow(static_cast<double>(gt.pixels[i]), gamma) * gain;
    out.pixels[i] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
  }
  return out;
}

std::pair<ImageRGB, ImageRGB> synth_exposure_pair(const ImageRGB& gt, double ev,
                                                  const ExposurePairSpec& spec, uint64_t salt) {
  if (!std::isfinite(ev)) fail(ErrorCode::Config, "non-finite EV offset");
  if (spec.gamma_lo <= 0 || spec.gamma_hi < spec.gamma_lo) {
    fail(ErrorCode::Config, "gamma jitter range must be positive and ordered");
  }
  Rng rng(mix_seed(spec.seed, salt));
  const double gamma = rng.uniform(spec.gamma_lo, spec.gamma_hi);
  return {apply_exposure(gt, ev, gamma), gt};
}

ImageRGB make_procedural(int64_t h, int64_t w, uint64_t seed, double detail) {
  detail = std::min(1.0, std::max(0.0, detail));
  Rng rng(seed);
  ImageRGB img(h, w);
  // base: smooth two-corner luminance gradient with mild chroma, roughly
  // gray-balanced the way the color loss assumes natural images are
  const double chroma = 0.04 + 0.08 * detail;
  float c0[3], c1[3];
  const double l0 = rng.uniform(0.25, 0.75), l1 = rng.uniform(0.25, 0.75);
  for (int c = 0; c < 3; ++c) {
    c0[c] = static_cast<float>(l0 + rng.uniform(-chroma, chroma));
    c1[c] = static_cast<float>(l1 + rng.uniform(-chroma, chroma));
  }
  const bool horizontal = rng.uniform() < 0.5;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const float t = horizontal ? static_cast<float>(x) / static_cast<float>(w - 1)
                                 : static_cast<float>(y) / static_cast<float>(h - 1);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = c0[c] * (1 - t) + c1[c] * t;
    }
  }
  // soft blobs; radius floor grows as detail shrinks
  const double r_min = 0.08 + 0.14 * (1.0 - detail);
  const int blobs = 2 + static_cast<int>(rng.uniform_int(3));
  for (int bi = 0; bi < blobs; ++bi) {
    const double cx = rng.uniform(0.1, 0.9) * static_cast<double>(w);
    const double cy = rng.uniform(0.1, 0.9) * static_cast<double>(h);
    const double r = rng.uniform(r_min, r_min + 0.17) * static_cast<double>(std::min(h, w));
    float col[3];
    const double bl = rng.uniform(0.15, 0.85);
    for (int c = 0; c < 3; ++c) {
      col[c] = static_cast<float>(
          std::min(0.95, std::max(0.05, bl + rng.uniform(-2.0 * chroma, 2.0 * chroma))));
    }
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double a = std::exp(-d2 / (2.0 * r * r));
        for (int c = 0; c < 3; ++c) {
          img.at(y, x, c) = static_cast<float>(img.at(y, x, c) * (1 - a) + col[c] * a);
        }
      }
    }
  }
  // sinusoid texture keeps it from being trivially flat
  const double amp = 0.01 + 0.03 * detail;
  const double f_hi = 1.0 + 3.0 * detail;
  const double fx = rng.uniform(1.0, f_hi), fy = rng.uniform(1.0, f_hi);
  const double phase = rng.uniform(0.0, 6.28318);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const double s = amp * std::sin(6.28318 * (fx * x / w + fy * y / h) + phase);
      for (int c = 0; c < 3; ++c) {
        const float v = img.at(y, x, c) + static_cast<float>(s);
        img.at(y, x, c) = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      }
    }
  }
  return img;
}

PairedImages make_procedural_pairs(int64_t count, int64_t h, int64_t w,
                                   const ExposurePairSpec& spec, double detail) {
  PairedImages out;
  uint64_t salt = 0;
  for (int64_t i = 0; i < count; ++i) {
    ImageRGB gt =
        make_procedural(h, w, mix_seed(spec.seed, 1000 + static_cast<uint64_t>(i)), detail);
    const double ev = spec.ev_offsets[static_cast<size_t>(i) % spec.ev_offsets.size()];
    auto [ie, gt2] = synth_exposure_pair(gt, ev, spec, salt++);
    char name[64];
    std::snprintf(name, sizeof(name), "proc_%03d_ev%+.1f", static_cast<int>(i), ev);
    out.inputs.push_back(std::move(ie));
    out.gts.push_back(std::move(gt2));
    out.names.push_back(name);
  }
  return out;
}

PairedImages load_pair_tree(const std::string& dir) {
  const fs::path in_dir = fs::path(dir) / "input";
  const fs::path gt_dir = fs::path(dir) / "gt";
  if (!fs::is_directory(in_dir) || !fs::is_directory(gt_dir)) {
    fail(ErrorCode::IoError, dir + " does not contain input/ and gt/ subdirectories");
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") {
      names.push_back(e.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) fail(ErrorCode::IoError, "no .ppm files under " + in_dir.string());
  PairedImages out;
  for (const auto& n : names) {
    const fs::path gt_path = gt_dir / n;
    if (!fs::exists(gt_path)) {
      fail(ErrorCode::IoError, "missing ground truth for " + n);
    }
    out.inputs.push_back(load_image((in_dir / n).string()));
    out.gts.push_back(load_image(gt_path.string()));
    out.names.push_back(n);
  }
  return out;
}

void write_pair_tree(const std::string& dir, const std::vector<ImageRGB>& gts,
                     const std::vector<std::string>& stems, const ExposurePairSpec& spec) {
  if (gts.size() != stems.size()) fail(ErrorCode::Config, "write_pair_tree: list size mismatch");
  const fs::path in_dir = fs::path(dir) / "input";
  const fs::path gt_dir = fs::path(dir) / "gt";
  fs::create_directories(in_dir);
  fs::create_directories(gt_dir);
  uint64_t salt = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    for (double ev : spec.ev_offsets) {
      auto [ie, gt] = synth_exposure_pair(gts[i], ev, spec, salt++);
      char suffix[32];
      std::snprintf(suffix, sizeof(suffix), "_ev%+.1f.ppm", ev);
      const std::string name = stems[i] + suffix;
      save_image(ie, (in_dir / name).string());
      save_image(gt, (gt_dir / name).string());
    }
  }
}

PatchSampler::PatchSampler(const PairedImages* pairs, int64_t crop, int64_t batch, uint64_t seed)
    : pairs_(pairs), crop_(crop), batch_(batch), seed_(seed) {
  if (pairs_ == nullptr || pairs_->size() == 0) {
    fail(ErrorCode::Config, "sampler needs a non-empty pair list");
  }
  if (batch_ < 1) fail(ErrorCode::Config, "batch must be >= 1");
  for (const auto& img : pairs_->inputs) {
    if (crop_ > img.height || crop_ > img.width) {
      fail(ErrorCode::CropTooLarge, "crop " + std::to_string(crop_) + " exceeds image " +
                                        std::to_string(img.height) + "x" +
                                        std::to_string(img.width));
    }
  }
}

int64_t PatchSampler::steps_per_epoch() const {
  const int64_t n = static_cast<int64_t>(pairs_->size());
  return (n + batch_ - 1) / batch_;
}

std::pair<Tensor<float>, Tensor<float>> PatchSampler::batch_at(uint64_t step) const {
  Rng rng(mix_seed(seed_, step));
  Tensor<float> in({batch_, 3, crop_, crop_});
  Tensor<float> gt({batch_, 3, crop_, crop_});
  float* ind = in.data();
  float* gtd = gt.data();
  const int64_t plane = crop_ * crop_;
  for (int64_t b = 0; b < batch_; ++b) {
    const int64_t pick = rng.uniform_int(static_cast<int64_t>(pairs_->size()));
    const ImageRGB& ii = pairs_->inputs[static_cast<size_t>(pick)];
    const ImageRGB& gg = pairs_->gts[static_cast<size_t>(pick)];
    const int64_t y0 = ii.height == crop_ ? 0 : rng.uniform_int(ii.height - crop_ + 1);
    const int64_t x0 = ii.width == crop_ ? 0 : rng.uniform_int(ii.width - crop_ + 1);
    for (int64_t y = 0; y < crop_; ++y) {
      for (int64_t x = 0; x < crop_; ++x) {
        for (int c = 0; c < 3; ++c) {
          const int64_t off = (b * 3 + c) * plane + y * crop_ + x;
          ind[off] = ii.at(y0 + y, x0 + x, c);
          gtd[off] = gg.at(y0 + y, x0 + x, c);
        }
      }
    }
  }
  return {in, gt};
}

}  // namespace cit::data
