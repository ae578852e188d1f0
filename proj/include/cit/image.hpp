#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cit/tensor.hpp"

namespace cit {

/// H x W x 3 image, float RGB in [0,1], row-major.
struct ImageRGB {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<float> pixels;  // height*width*3

  ImageRGB() = default;
  ImageRGB(int64_t h, int64_t w)
      : height(h), width(w), pixels(static_cast<size_t>(h * w * 3), 0.0f) {}

  float& at(int64_t y, int64_t x, int c) {
    return pixels[static_cast<size_t>((y * width + x) * 3 + c)];
  }
  float at(int64_t y, int64_t x, int c) const {
    return pixels[static_cast<size_t>((y * width + x) * 3 + c)];
  }
};

/// Reads an 8-bit PPM (P6 binary or P3 ascii, maxval 255) into [0,1] floats.
ImageRGB load_image(const std::string& path);

/// Writes binary PPM (P6); floats are clamped and rounded to nearest 8-bit.
void save_image(const ImageRGB& img, const std::string& path);

Tensor<float> image_to_chw(const ImageRGB& img);          // (3,H,W)
ImageRGB chw_to_image(const Tensor<float>& chw);          // clamps to [0,1]
Tensor<float> stack_images(const std::vector<ImageRGB>& imgs);  // (N,3,H,W)

}  // namespace cit
