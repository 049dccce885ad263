#pragma once

#include "dcan/kernels.hpp"
#include "dcan/matrix.hpp"

namespace dcan {

// Label-only weight matrices of the trace form
//   L̂ = Tr(G_s K_s) + Tr(G_t K_t) − 2·Tr(G_ts K_st)
// with G_s = L̃_s⁻¹ L_s L̃_s⁻¹, G_t = L̃_t⁻¹ L_t L̃_t⁻¹, G_ts = L̃_t⁻¹ L_ts L̃_s⁻¹
// and L̃ = L + λI. They do not depend on the features, so the feature gradient
// treats them as constants.
struct CmmdWeights {
  Matrix g_s;   // n_s × n_s
  Matrix g_t;   // n_t × n_t
  Matrix g_ts;  // n_t × n_s
};

// Label rows must be one-hot; the weights follow in closed form from the class
// counts.
CmmdWeights cmmd_weights(const Matrix& ys, const Matrix& yt, double reg_lambda);

// Trace form evaluated on precomputed feature Gram matrices K_s (n_s×n_s),
// K_t (n_t×n_t) and K_st (n_s×n_t). Kernel-agnostic.
double cmmd_from_grams(const CmmdWeights& w, const Matrix& k_s, const Matrix& k_t,
                       const Matrix& k_st);

struct CmmdResult {
  double value = 0.0;
  Matrix grad_zs;
  Matrix grad_zt;
  Matrix g_s;
  Matrix g_t;
  Matrix g_ts;
};

// Empirical CMMD between two labeled feature batches and its gradient with
// respect to both feature matrices. Batch sizes may differ. An empty batch on
// either side yields value 0 and zero gradients.
CmmdResult cmmd_loss(const LabeledBatch& source, const LabeledBatch& target,
                     const KernelSpec& spec);

}  // namespace dcan
