#pragma once

#include <optional>

#include "maskd/modules.hpp"
#include "maskd/ops.hpp"

namespace maskd {

// Stabiliser added to per-mask spatial sums in the region-normalised losses;
// trained sigmoid masks can approach zero everywhere.
inline constexpr double kMaskDenomEps = 1e-6;

// M = sigmoid(E * F) with F flattened to (C, H*W); differentiable w.r.t.
// both the tokens and the feature.
MaskSet compute_masks(const ReceptiveTokens& tokens, const Tensor& feature_flat,
                      MaskOrigin origin = MaskOrigin::teacher);

// F_hat = sum_i w_i (M_i ⊙ F); w defaults to all-ones when absent.
Tensor masked_feature(const MaskSet& masks, const Tensor& feature_flat,
                      const std::optional<Tensor>& weights = std::nullopt);

// Overlap similarity 2·Σab / (Σa² + Σb²) of two equal-length vectors.
// Rejects the degenerate all-zero pair.
Tensor dice(const Tensor& a, const Tensor& b);

// Mean pairwise dice over all token pairs, diagonal included:
// (1/T²) Σ_i Σ_j dice(M_i, M_j). Identical masks give exactly 1; the
// diagonal alone contributes 1/T.
Tensor diversity_loss(const MaskSet& masks);

// task + mu * div.
Tensor token_loss(const Tensor& task, const Tensor& div, double mu);

// w = softmax(head(gap(relu(conv3(F))))): positive, sums to 1.
Tensor mask_weights(const WeightingNet& net, const Tensor& feature);

// (1/(H·W·C)) ‖F_t − phi(F_s)‖².
Tensor mimic_loss(const Tensor& teacher_feature, const Tensor& student_feature,
                  const Projector& phi);

// (1/K) Σ_i [1/(C·(Σ_j M_ij + eps))] ‖M_i ⊙ F_t − M_i ⊙ phi(F_s)‖².
Tensor region_loss(const MaskSet& masks, const Tensor& teacher_feature,
                   const Tensor& student_feature, const Projector& phi);

// Σ_i [w_i/(C·(Σ_j M_ij + eps))] ‖M_i ⊙ F_t − M_i ⊙ phi(F_s)‖².
Tensor weighted_maskd_loss(const MaskSet& masks, const Tensor& weights,
                           const Tensor& teacher_feature, const Tensor& student_feature,
                           const Projector& phi);

// M_r = M_s ⊙ M_t with M_s = sigmoid(E · phi(F_s)) taken under stop-gradient,
// so nothing flows back into the student through its own mask.
MaskSet customize_masks(const ReceptiveTokens& tokens, const Tensor& student_projected_flat,
                        const MaskSet& teacher_masks);

// Full distillation loss: teacher masks and importance weights from the
// frozen teacher side, customized masks when requested, then the weighted
// region reconstruction. Gradients reach the student feature and phi only.
Tensor maskd_loss(const ReceptiveTokens& tokens, const Tensor& teacher_feature,
                  const Tensor& student_feature, const Projector& phi,
                  const WeightingNet& weighting, bool customize);

// task + lambda1 * distill + lambda2 * aux (aux defaults to 0).
Tensor student_total_loss(const Tensor& task, const Tensor& distill,
                          const std::optional<Tensor>& aux, double lambda1, double lambda2);

}  // namespace maskd
