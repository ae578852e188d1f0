#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cit/image.hpp"

// Synthetic exposure-error pair generation and patch/batch sampling. Ground
// truths come from a user directory or from procedural generators; incorrectly
// exposed inputs are rendered as clamp(gt^gamma * 2^ev, 0, 1).

namespace cit::data {

struct ExposurePairSpec {
  std::vector<double> ev_offsets = {-1.5, -1.0, 0.0, 1.0, 1.5};
  double gamma_lo = 0.9;
  double gamma_hi = 1.1;
  uint64_t seed = 0;
};

/// Deterministic tone map: clamp(gt^gamma * 2^ev, 0, 1).
ImageRGB apply_exposure(const ImageRGB& gt, double ev, double gamma);

/// Renders one (input, ground-truth) pair; gamma is drawn from the jitter
/// range using (spec.seed, salt) so pairs are reproducible individually.
std::pair<ImageRGB, ImageRGB> synth_exposure_pair(const ImageRGB& gt, double ev,
                                                  const ExposurePairSpec& spec,
                                                  uint64_t salt = 0);

/// Procedural ground truth (gradients, blobs, sinusoid textures). `detail`
/// in [0,1] scales blob sharpness and texture amplitude; 0 is smoothest.
ImageRGB make_procedural(int64_t h, int64_t w, uint64_t seed, double detail = 1.0);

struct PairedImages {
  std::vector<ImageRGB> inputs;
  std::vector<ImageRGB> gts;
  std::vector<std::string> names;
  size_t size() const { return inputs.size(); }
};

/// Builds count procedural GTs and renders them across the spec's EV offsets.
PairedImages make_procedural_pairs(int64_t count, int64_t h, int64_t w,
                                   const ExposurePairSpec& spec, double detail = 1.0);

/// Reads a pair tree written by synth-data: dir/input/*.ppm and dir/gt/*.ppm
/// matched by filename.
PairedImages load_pair_tree(const std::string& dir);

/// Writes the mirrored input/ and gt/ trees, filenames suffixed _ev{+/-x.x}.
void write_pair_tree(const std::string& dir, const std::vector<ImageRGB>& gts,
                     const std::vector<std::string>& stems, const ExposurePairSpec& spec);

/// Aligned random crops from (input, gt) at identical coordinates. Batches are
/// a pure function of (seed, step), so resumed runs see identical data.
class PatchSampler {
 public:
  PatchSampler(const PairedImages* pairs, int64_t crop, int64_t batch, uint64_t seed);
  std::pair<Tensor<float>, Tensor<float>> batch_at(uint64_t step) const;
  int64_t steps_per_epoch() const;

 private:
  const PairedImages* pairs_;
  int64_t crop_;
  int64_t batch_;
  uint64_t seed_;
};

}  // namespace cit::data
