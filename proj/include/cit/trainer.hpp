#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cit/data.hpp"
#include "cit/losses.hpp"
#include "cit/model.hpp"

// Adam optimization loop, bit-exact checkpointing, and the finite-difference
// gradient oracle used to verify every backward rule.

namespace cit::train {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t batch = 32;
  int64_t epochs = 15;
  int64_t max_steps = 0;  // 0 = epochs decide; otherwise an absolute cap
  int64_t crop = 256;
  uint64_t seed = 0;
  losses::LossWeights weights;
  int64_t checkpoint_interval = 0;  // steps between checkpoints; 0 = final only
  bool clip_grad = false;
  double clip_norm = 1.0;

  void validate() const;
};

template <class T>
struct AdamState {
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments;  // name -> (m, v)
  int64_t t = 0;
};

/// Bias-corrected Adam update over named parameters. Parameters without a
/// materialized gradient are treated as zero-gradient unless require_grads is
/// set, in which case MissingGrad is raised.
template <class T>
void adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state,
               const TrainConfig& cfg, bool require_grads = false);

// --- checkpointing (little-endian, bit-exact round trip) ---

struct CheckpointData {
  int64_t step = 0;
  std::string config_text;
  std::map<std::string, Tensor<float>> tensors;
};

void save_checkpoint(const std::string& path, CITModel<float>& model,
                     const AdamState<float>* opt, int64_t step, const std::string& config_text);
CheckpointData load_checkpoint(const std::string& path);
void restore_model(CITModel<float>& model, const CheckpointData& ck);
void restore_adam(AdamState<float>& opt, const CheckpointData& ck);

// --- training loop ---

struct TrainResult {
  struct Row {
    int64_t step;
    double total, rec, col, spa;
  };
  std::vector<Row> log;
  int64_t final_step = 0;
  double final_total = 0.0;
};

/// Runs the optimization loop. When out_dir is non-empty, writes
/// out_dir/loss_log.csv (`step,loss_total,loss_rec,loss_col,loss_spa`) and
/// ckpt_<step>.ckpt / ckpt_final.ckpt. resume_from continues bit-exactly.
TrainResult train(CITModel<float>& model, const data::PairedImages& pairs, const TrainConfig& cfg,
                  const std::string& out_dir = "", const std::string& resume_from = "");

std::string config_text(const CITConfig& mc, const TrainConfig& tc);

// --- gradient checking ---

struct GradGroupReport {
  std::string name;
  double max_rel_err = 0.0;
  int64_t samples = 0;
};

struct GradCheckReport {
  std::vector<GradGroupReport> groups;
  double worst = 0.0;
  bool passed(double tol) const { return worst < tol; }
  std::string text(double tol) const;
};

/// Central finite differences (step h) against tape gradients for a scalar
/// function of the given leaves; rel-err = |analytic-numeric| / max(1,|numeric|).
GradCheckReport gradcheck_fn(const std::function<Tensor<double>()>& fn,
                             const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                             int64_t samples_per_leaf, double h, uint64_t seed);

/// The pinned gradient-oracle config: C=8, N=1, M=2, heads=2, W=4, 16x16 input.
CITConfig gradcheck_config();

/// Full-model check (float64): every parameter group against the training
/// objective on a random batch.
GradCheckReport gradcheck_model(uint64_t seed, int64_t samples_per_group);

/// Loss-only check (float64): gradients w.r.t. the predicted image.
GradCheckReport gradcheck_losses(uint64_t seed, int64_t samples);

}  // namespace cit::train
