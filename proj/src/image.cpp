#include "cit/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace cit {

namespace {

// skips whitespace and '#' comment lines between PPM header tokens
int next_header_int(std::istream& in, const std::string& path) {
  while (true) {
    int c = in.peek();
    if (c == EOF) fail(ErrorCode::UnsupportedFormat, "truncated header in " + path);
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    break;
  }
  int v = -1;
  in >> v;
  if (!in || v < 0) fail(ErrorCode::UnsupportedFormat, "bad header value in " + path);
  return v;
}

}  // namespace

ImageRGB load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '6' && m1 != '3')) {
    fail(ErrorCode::UnsupportedFormat, path + " is not an 8-bit PPM (P6/P3)");
  }
  const bool binary = m1 == '6';
  const int w = next_header_int(in, path);
  const int h = next_header_int(in, path);
  const int maxval = next_header_int(in, path);
  if (maxval != 255) {
    fail(ErrorCode::UnsupportedFormat, path + " has maxval " + std::to_string(maxval) +
                                           ", only 8-bit supported");
  }
  if (w < 1 || h < 1) fail(ErrorCode::UnsupportedFormat, "degenerate image " + path);

  ImageRGB img(h, w);
  const int64_t count = static_cast<int64_t>(h) * w * 3;
  if (binary) {
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<size_t>(count));
    in.read(reinterpret_cast<char*>(raw.data()), count);
    if (in.gcount() != count) fail(ErrorCode::IoError, "truncated pixel data in " + path);
    for (int64_t i = 0; i < count; ++i) {
      img.pixels[static_cast<size_t>(i)] = static_cast<float>(raw[static_cast<size_t>(i)]) / 255.0f;
    }
  } else {
    for (int64_t i = 0; i < count; ++i) {
      int v = -1;
      in >> v;
      if (!in || v < 0 || v > 255) fail(ErrorCode::IoError, "bad P3 sample in " + path);
      img.pixels[static_cast<size_t>(i)] = static_cast<float>(v) / 255.0f;
    }
  }
  return img;
}

void save_image(const ImageRGB& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    float v = img.pixels[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path);
}

Tensor<float> image_to_chw(const ImageRGB& img) {
  Tensor<float> t({3, img.height, img.width});
  float* d = t.data();
  const int64_t hw = img.height * img.width;
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        d[c * hw + y * img.width + x] = img.at(y, x, c);
      }
    }
  }
  return t;
}

ImageRGB chw_to_image(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    fail(ErrorCode::ShapeMismatch, "chw_to_image expects (3,H,W), got " + shape_str(chw.shape()));
  }
  const int64_t h = chw.dim(1), w = chw.dim(2);
  ImageRGB img(h, w);
  const float* d = chw.data();
  const int64_t hw = h * w;
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = d[c * hw + y * w + x];
        img.at(y, x, c) = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      }
    }
  }
  return img;
}

Tensor<float> stack_images(const std::vector<ImageRGB>& imgs) {
  if (imgs.empty()) fail(ErrorCode::ShapeMismatch, "stack_images on empty list");
  const int64_t h = imgs[0].height, w = imgs[0].width;
  Tensor<float> t({static_cast<int64_t>(imgs.size()), 3, h, w});
  const int64_t plane = 3 * h * w;
  for (size_t i = 0; i < imgs.size(); ++i) {
    if (imgs[i].height != h || imgs[i].width != w) {
      fail(ErrorCode::ShapeMismatch, "stack_images needs identical dims");
    }
    Tensor<float> one = image_to_chw(imgs[i]);
    std::copy(one.data(), one.data() + plane, t.data() + static_cast<int64_t>(i) * plane);
  }
  return t;
}

}  // namespace cit
