#pragma once

#include <string>
#include <vector>

#include "maskd/rng.hpp"
#include "maskd/tensor.hpp"

namespace maskd {

// Small all-convolutional dense-prediction net: a backbone of 3x3 conv
// blocks with rectifiers producing the feature map F (the distillation
// point), and a 3x3 conv head mapping F to per-pixel class logits.
struct ToyNet {
    enum class Role { teacher, student };

    struct Block {
        Tensor w;  // (Cout, Cin, k, k)
        Tensor b;  // (Cout)
    };

    Role role = Role::teacher;
    int classes = 0;
    std::vector<Block> backbone;
    Block head;

    int feature_channels() const { return backbone.back().w.dim(0); }
    std::vector<Tensor> params() const;
    bool frozen() const;
};

// Channel widths per backbone block output; the last entry is the feature
// width C. in_ch is the image channel count (3).
ToyNet make_toy_net(ToyNet::Role role, int in_ch, const std::vector<int>& widths, int classes,
                    Rng& rng);

// Backbone output F (feat_ch, H, W); rectified.
Tensor backbone_forward(const ToyNet& net, const Tensor& image);

// Per-pixel logits (classes, H, W) from a feature map.
Tensor head_forward(const ToyNet& net, const Tensor& feature);

std::string role_name(ToyNet::Role role);

}  // namespace maskd
