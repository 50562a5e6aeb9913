#pragma once

#include <vector>

#include "maskd/rng.hpp"
#include "maskd/tensor.hpp"

namespace maskd {

// Learnable mask-token embedding, one set per feature stage. Each of the T
// rows is a C-dimensional token whose dot products with feature-map pixels
// (through a sigmoid) form one soft spatial mask.
struct ReceptiveTokens {
    Tensor embed;  // (T, C)
    int stage_id = 0;

    int count() const { return embed.dim(0); }
    int channels() const { return embed.dim(1); }
};

// Tokens initialised N(0, 1/sqrt(C)) so initial mask logits stay O(1).
ReceptiveTokens make_tokens(int count, int channels, Rng& rng, int stage_id = 0);

enum class MaskOrigin { teacher, student, customized };

// Per-image soft masks, one row per token, spatial positions flattened
// row-major. Sigmoid-born rows lie strictly in (0,1); customized rows are
// products of two such masks.
struct MaskSet {
    Tensor m;  // (T, H*W)
    MaskOrigin origin = MaskOrigin::teacher;

    int count() const { return m.dim(0); }
    int positions() const { return m.dim(1); }
};

// Small convolutional module predicting per-image mask importance:
// 3x3 conv (C->C) with rectifier, global average pooling, then a 1x1 head
// (C->T). The head is zero-initialised so initial weights are uniform.
struct WeightingNet {
    Tensor conv_w;  // (C, C, 3, 3)
    Tensor conv_b;  // (C)
    Tensor head_w;  // (T, C, 1, 1)
    Tensor head_b;  // (T)

    int tokens() const { return head_w.dim(0); }
    int channels() const { return conv_w.dim(0); }
    std::vector<Tensor> params() const { return {conv_w, conv_b, head_w, head_b}; }
};

WeightingNet make_weighting_net(int channels, int tokens, Rng& rng);

// Per-pixel linear channel map adapting student features (C_s) to teacher
// width (C); a 1x1 convolution.
struct Projector {
    Tensor w;  // (C, C_s, 1, 1)
    Tensor b;  // (C)

    int in_channels() const { return w.dim(1); }
    int out_channels() const { return w.dim(0); }
    std::vector<Tensor> params() const { return {w, b}; }
};

Projector make_projector(int student_channels, int teacher_channels, Rng& rng);

// phi(F_s): (C_s,H,W) -> (C,H,W).
Tensor project(const Projector& phi, const Tensor& student_feature);

void set_requires_grad(const std::vector<Tensor>& params, bool b);

}  // namespace maskd
