#include "maskd/nets.hpp"

#include <cmath>
#include <stdexcept>

#include "maskd/ops.hpp"

namespace maskd {
namespace {

ToyNet::Block make_block(int cout, int cin, int k, Rng& rng) {
    ToyNet::Block blk;
    blk.w = Tensor::zeros({cout, cin, k, k});
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (auto& v : blk.w.values()) v = rng.normal(0.0, stddev);
    blk.b = Tensor::zeros({cout});
    return blk;
}

}  // namespace

std::vector<Tensor> ToyNet::params() const {
    std::vector<Tensor> out;
    for (const auto& blk : backbone) {
        out.push_back(blk.w);
        out.push_back(blk.b);
    }
    out.push_back(head.w);
    out.push_back(head.b);
    return out;
}

bool ToyNet::frozen() const {
    for (const auto& p : params())
        if (p.requires_grad()) return false;
    return true;
}

ToyNet make_toy_net(ToyNet::Role role, int in_ch, const std::vector<int>& widths, int classes,
                    Rng& rng) {
    if (widths.empty()) throw std::invalid_argument("make_toy_net: at least one backbone width required");
    if (classes < 2) throw std::invalid_argument("make_toy_net: need at least 2 classes");
    ToyNet net;
    net.role = role;
    net.classes = classes;
    int cin = in_ch;
    for (const int cout : widths) {
        net.backbone.push_back(make_block(cout, cin, 3, rng));
        cin = cout;
    }
    net.head = make_block(classes, cin, 3, rng);
    return net;
}

Tensor backbone_forward(const ToyNet& net, const Tensor& image) {
    Tensor h = image;
    for (const auto& blk : net.backbone) h = relu(conv2d(h, blk.w, blk.b));
    return h;
}

Tensor head_forward(const ToyNet& net, const Tensor& feature) {
    return conv2d(feature, net.head.w, net.head.b);
}

std::string role_name(ToyNet::Role role) {
    return role == ToyNet::Role::teacher ? "teacher" : "student";
}

}  // namespace maskd
