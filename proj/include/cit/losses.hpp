#pragma once

#include "cit/tensor.hpp"

// Training objective: L = L_rec + lambda_col * L_col + lambda_spa * L_spa.
// L_rec is mean absolute error against ground truth, L_col penalizes pairwise
// differences of channel means (gray-world assumption), L_spa matches 4x4
// local region means against the input image.

namespace cit::losses {

enum class SpaVariant {
  region,    // squared difference of per-region means, as-is
  neighbor,  // squared difference of adjacent-region mean contrasts
};

struct LossWeights {
  double lambda_col = 0.5;
  double lambda_spa = 0.5;
  bool use_col = true;
  bool use_spa = true;
  SpaVariant spa_variant = SpaVariant::region;
};

template <class T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> rec, col, spa;  // undefined when the term is disabled
};

/// Mean absolute difference over all elements.
template <class T>
Tensor<T> l_rec(const Tensor<T>& we, const Tensor<T>& gt);

/// Sum over channel pairs {(r,g),(r,b),(g,b)} of squared mean differences,
/// averaged over the batch.
template <class T>
Tensor<T> l_col(const Tensor<T>& we);

/// Mean squared difference of 4x4 region intensity means between output and
/// input; trailing rows/cols that do not fill a region are cropped.
template <class T>
Tensor<T> l_spa(const Tensor<T>& we, const Tensor<T>& ie,
                SpaVariant variant = SpaVariant::region);

template <class T>
LossTerms<T> total_loss(const Tensor<T>& we, const Tensor<T>& gt, const Tensor<T>& ie,
                        const LossWeights& w);

}  // namespace cit::losses
