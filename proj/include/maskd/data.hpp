#pragma once

#include <cstdint>
#include <vector>

#include "maskd/tensor.hpp"

namespace maskd {

// One synthetic dense-prediction sample: a 3-channel image in [0,1] with
// per-pixel class labels (0 = textured background, 1..K-1 = blob kinds).
struct ToySample {
    Tensor image;             // (3, H, W)
    std::vector<int> labels;  // H*W, row-major
    int height = 0;
    int width = 0;
};

// Deterministic generator: sample i depends only on (seed, i), so prefixes
// of longer datasets coincide with shorter ones. Each image carries 1-4
// colored geometric blobs (circle / square / diamond, kind = class) on a
// smoothly textured background. Requires H, W >= 16 and K >= 2.
std::vector<ToySample> gen_dataset(std::uint64_t seed, int n, int h, int w, int k_cls);

// Fraction of background (label 0) pixels.
double background_fraction(const ToySample& s);

}  // namespace maskd
