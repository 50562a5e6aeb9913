#include "maskd/modules.hpp"

#include <cmath>
#include <stdexcept>

#include "maskd/ops.hpp"

namespace maskd {
namespace {

Tensor normal_tensor(Shape s, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(s));
    for (auto& v : t.values()) v = rng.normal(0.0, stddev);
    return t;
}

// Kaiming-style fan-in scaling for rectified conv layers.
Tensor conv_init(int cout, int cin, int k, Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    return normal_tensor({cout, cin, k, k}, stddev, rng);
}

}  // namespace

ReceptiveTokens make_tokens(int count, int channels, Rng& rng, int stage_id) {
    if (count < 1) throw std::invalid_argument("make_tokens: token count must be >= 1");
    if (channels < 1) throw std::invalid_argument("make_tokens: channel count must be >= 1");
    ReceptiveTokens t;
    t.embed = normal_tensor({count, channels}, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
    t.stage_id = stage_id;
    return t;
}

WeightingNet make_weighting_net(int channels, int tokens, Rng& rng) {
    WeightingNet net;
    net.conv_w = conv_init(channels, channels, 3, rng);
    net.conv_b = Tensor::zeros({channels});
    net.head_w = Tensor::zeros({tokens, channels, 1, 1});
    net.head_b = Tensor::zeros({tokens});
    return net;
}

Projector make_projector(int student_channels, int teacher_channels, Rng& rng) {
    Projector phi;
    phi.w = conv_init(teacher_channels, student_channels, 1, rng);
    phi.b = Tensor::zeros({teacher_channels});
    return phi;
}

Tensor project(const Projector& phi, const Tensor& student_feature) {
    return conv2d(student_feature, phi.w, phi.b);
}

void set_requires_grad(const std::vector<Tensor>& params, bool b) {
    for (const auto& p : params) p.impl()->requires_grad = b;
}

}  // namespace maskd
