#include "maskd/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "maskd/rng.hpp"

namespace maskd {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Blob {
    int kind;       // class id in [1, K)
    int shape;      // 0 circle, 1 square, 2 diamond
    double cx, cy;
    double r;
    double color[3];
};

// Distinct base color per blob class, hue-spread around the color wheel.
void class_color(int kind, int k_cls, double out[3]) {
    const double theta = kTwoPi * static_cast<double>(kind - 1) / static_cast<double>(k_cls - 1);
    const double third = kTwoPi / 3.0;
    out[0] = 0.55 + 0.35 * std::cos(theta);
    out[1] = 0.55 + 0.35 * std::cos(theta - third);
    out[2] = 0.55 + 0.35 * std::cos(theta + third);
}

bool inside(const Blob& b, double x, double y) {
    const double dx = x - b.cx;
    const double dy = y - b.cy;
    switch (b.shape) {
        case 0: return dx * dx + dy * dy <= b.r * b.r;
        case 1: return std::max(std::abs(dx), std::abs(dy)) <= 0.886 * b.r;
        default: return std::abs(dx) + std::abs(dy) <= 1.253 * b.r;
    }
}

ToySample gen_sample(Rng rng, int h, int w, int k_cls) {
    ToySample s;
    s.height = h;
    s.width = w;
    s.image = Tensor::zeros({3, h, w});
    s.labels.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);

    // textured background
    const double fx = rng.uniform(0.5, 2.0);
    const double fy = rng.uniform(0.5, 2.0);
    double phase[3][2];
    for (auto& p : phase) {
        p[0] = rng.uniform(0.0, 1.0);
        p[1] = rng.uniform(0.0, 1.0);
    }
    double* img = s.image.data();
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double u = static_cast<double>(x) / w;
                const double v = static_cast<double>(y) / h;
                img[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * w + x] =
                    0.35 + 0.18 * std::sin(kTwoPi * (fx * u + phase[ch][0])) *
                               std::cos(kTwoPi * (fy * v + phase[ch][1]));
            }
        }
    }

    // blobs, later ones painted on top
    const double rmin = 0.13 * std::min(h, w);
    const double rmax = 0.20 * std::min(h, w);
    const int nblobs = 1 + static_cast<int>(rng.uniform_int(4));
    std::vector<Blob> blobs;
    for (int i = 0; i < nblobs; ++i) {
        Blob b;
        b.kind = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k_cls - 1)));
        b.shape = (b.kind - 1) % 3;
        b.r = rng.uniform(rmin, rmax);
        b.cx = rng.uniform(b.r, w - 1 - b.r);
        b.cy = rng.uniform(b.r, h - 1 - b.r);
        class_color(b.kind, k_cls, b.color);
        for (double& c : b.color) c += rng.uniform(-0.08, 0.08);
        blobs.push_back(b);
    }
    for (const Blob& b : blobs) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!inside(b, x, y)) continue;
                s.labels[static_cast<std::size_t>(y) * w + x] = b.kind;
                for (int ch = 0; ch < 3; ++ch)
                    img[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * w + x] =
                        b.color[ch];
            }
        }
    }

    // one full noise pass, then clamp into [0,1]
    for (std::size_t i = 0; i < 3 * plane; ++i)
        img[i] = std::clamp(img[i] + rng.uniform(-0.06, 0.06), 0.0, 1.0);
    return s;
}

}  // namespace

std::vector<ToySample> gen_dataset(std::uint64_t seed, int n, int h, int w, int k_cls) {
    if (h < 16 || w < 16)
        throw std::invalid_argument("gen_dataset: extents must be >= 16, got " + std::to_string(h) +
                                    "x" + std::to_string(w));
    if (k_cls < 2) throw std::invalid_argument("gen_dataset: need at least 2 classes");
    if (n < 0) throw std::invalid_argument("gen_dataset: negative sample count");
    const Rng root(seed);
    std::vector<ToySample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(gen_sample(root.stream(static_cast<std::uint64_t>(i)), h, w, k_cls));
    return out;
}

double background_fraction(const ToySample& s) {
    std::size_t bg = 0;
    for (const int l : s.labels) bg += l == 0 ? 1 : 0;
    return static_cast<double>(bg) / static_cast<double>(s.labels.size());
}

}  // namespace maskd
