#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include <fstream>

#include "cit/data.hpp"

using namespace cit;
using namespace cit::data;

TEST_CASE("ppm byte mapping and round trip") {
  ImageRGB img(2, 2);
  img.at(0, 0, 0) = 0.0f;
  img.at(0, 0, 1) = 1.0f;
  img.at(0, 0, 2) = 128.0f / 255.0f;
  img.at(1, 1, 0) = 0.37f;

  const std::string path = "/tmp/cit_test_img.ppm";
  save_image(img, path);
  ImageRGB back = load_image(path);
  REQUIRE(back.height == 2);
  REQUIRE(back.width == 2);
  CHECK(back.at(0, 0, 0) == 0.0f);
  CHECK(back.at(0, 0, 1) == 1.0f);
  CHECK(back.at(0, 0, 2) == doctest::Approx(128.0 / 255.0).epsilon(1e-7));

  // second round trip is exact: already quantized to 8 bits
  save_image(back, path);
  ImageRGB again = load_image(path);
  CHECK(std::memcmp(again.pixels.data(), back.pixels.data(),
                    back.pixels.size() * sizeof(float)) == 0);

  CHECK_THROWS_AS(load_image("/tmp/definitely_missing_42.ppm"), Error);
}

TEST_CASE("unsupported raster contents are rejected") {
  const std::string path = "/tmp/cit_test_bad.ppm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n2 2\n255\n";
    out.write("\0\0\0\0", 4);
  }
  CHECK_THROWS_AS(load_image(path), Error);
}

TEST_CASE("exposure tone map closed forms") {
  ImageRGB gt(1, 1);
  gt.at(0, 0, 0) = 0.6f;
  gt.at(0, 0, 1) = 0.6f;
  gt.at(0, 0, 2) = 0.6f;

  auto identity = apply_exposure(gt, 0.0, 1.0);
  CHECK(identity.at(0, 0, 0) == doctest::Approx(0.6).epsilon(1e-7));

  auto over = apply_exposure(gt, 1.0, 1.0);
  CHECK(over.at(0, 0, 0) == 1.0f);  // 1.2 clips

  auto under = apply_exposure(gt, -1.0, 1.0);
  CHECK(under.at(0, 0, 0) == doctest::Approx(0.3).epsilon(1e-7));
}

TEST_CASE("synth pairs stay in range and are reproducible") {
  ExposurePairSpec spec;
  spec.seed = 42;
  ImageRGB gt = make_procedural(32, 32, 7);
  auto [ie1, gt1] = synth_exposure_pair(gt, 1.5, spec, 3);
  auto [ie2, gt2] = synth_exposure_pair(gt, 1.5, spec, 3);
  CHECK(std::memcmp(ie1.pixels.data(), ie2.pixels.data(),
                    ie1.pixels.size() * sizeof(float)) == 0);
  for (float v : ie1.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // gt passes through untouched
  CHECK(std::memcmp(gt1.pixels.data(), gt.pixels.data(), gt.pixels.size() * sizeof(float)) == 0);

  // different salt draws a different gamma
  auto [ie3, gt3] = synth_exposure_pair(gt, 1.5, spec, 4);
  bool same = std::memcmp(ie1.pixels.data(), ie3.pixels.data(),
                          ie1.pixels.size() * sizeof(float)) == 0;
  CHECK_FALSE(same);
  (void)gt3;
}

TEST_CASE("uncorrupted pair is the identity pair") {
  ExposurePairSpec spec;
  spec.gamma_lo = 1.0;
  spec.gamma_hi = 1.0;
  ImageRGB gt = make_procedural(16, 16, 9);
  auto [ie, gt2] = synth_exposure_pair(gt, 0.0, spec);
  CHECK(std::memcmp(ie.pixels.data(), gt.pixels.data(), gt.pixels.size() * sizeof(float)) == 0);
  (void)gt2;
}

TEST_CASE("crop then tone-map equals tone-map then crop") {
  ImageRGB gt = make_procedural(24, 24, 11);
  auto crop = [](const ImageRGB& src, int64_t oy, int64_t ox, int64_t size) {
    ImageRGB out(size, size);
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y + oy, x + ox, c);
    return out;
  };
  auto mapped_then_cropped = crop(apply_exposure(gt, -1.0, 1.05), 4, 6, 12);
  auto cropped_then_mapped = apply_exposure(crop(gt, 4, 6, 12), -1.0, 1.05);
  CHECK(std::memcmp(mapped_then_cropped.pixels.data(), cropped_then_mapped.pixels.data(),
                    mapped_then_cropped.pixels.size() * sizeof(float)) == 0);
}

TEST_CASE("patch sampler shapes, determinism, range") {
  ExposurePairSpec spec;
  spec.seed = 5;
  auto pairs = make_procedural_pairs(3, 32, 32, spec);
  PatchSampler sampler(&pairs, 16, 4, 99);
  auto [in1, gt1] = sampler.batch_at(12);
  REQUIRE(in1.shape() == Shape{4, 3, 16, 16});
  REQUIRE(gt1.shape() == Shape{4, 3, 16, 16});
  for (int64_t i = 0; i < in1.numel(); ++i) {
    CHECK(in1.data()[i] >= 0.0f);
    CHECK(in1.data()[i] <= 1.0f);
  }

  PatchSampler sampler2(&pairs, 16, 4, 99);
  auto [in2, gt2] = sampler2.batch_at(12);
  CHECK(std::memcmp(in1.data(), in2.data(), sizeof(float) * in1.numel()) == 0);
  CHECK(std::memcmp(gt1.data(), gt2.data(), sizeof(float) * gt1.numel()) == 0);

  auto [in3, gt3] = sampler.batch_at(13);
  bool same = std::memcmp(in1.data(), in3.data(), sizeof(float) * in1.numel()) == 0;
  CHECK_FALSE(same);
  (void)gt3;

  CHECK_THROWS_AS(PatchSampler(&pairs, 64, 4, 0), Error);
}

TEST_CASE("pair tree round trip with ev suffixes") {
  const std::string dir = "/tmp/cit_test_tree";
  std::filesystem::remove_all(dir);
  ExposurePairSpec spec;
  spec.seed = 3;
  spec.ev_offsets = {-1.0, 0.0, 1.5};
  std::vector<ImageRGB> gts = {make_procedural(16, 16, 1), make_procedural(16, 16, 2)};
  write_pair_tree(dir, gts, {"a", "b"}, spec);

  CHECK(std::filesystem::exists(dir + "/input/a_ev-1.0.ppm"));
  CHECK(std::filesystem::exists(dir + "/input/a_ev+0.0.ppm"));
  CHECK(std::filesystem::exists(dir + "/input/b_ev+1.5.ppm"));
  CHECK(std::filesystem::exists(dir + "/gt/b_ev+1.5.ppm"));

  auto pairs = load_pair_tree(dir);
  CHECK(pairs.size() == 6);
  CHECK(pairs.inputs[0].height == 16);
  for (const auto& n : pairs.names) CHECK(n.find("_ev") != std::string::npos);
}
