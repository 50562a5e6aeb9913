#include "maskd/optim.hpp"

#include <cmath>

namespace maskd {

void zero_grads(const std::vector<Tensor>& params) {
    for (const auto& p : params) p.impl()->grad.clear();
}

Adam::Adam(std::vector<Tensor> params, double weight_decay, double beta1, double beta2, double eps)
    : params_(std::move(params)), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.values().size(), 0.0);
        v_.emplace_back(p.values().size(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& impl = *params_[pi].impl();
        if (impl.grad.empty()) continue;
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < impl.data.size(); ++i) {
            const double g = impl.grad[i] + wd_ * impl.data[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            impl.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

MomentumSgd::MomentumSgd(std::vector<Tensor> params, double momentum)
    : params_(std::move(params)), momentum_(momentum) {
    for (const auto& p : params_) velocity_.emplace_back(p.values().size(), 0.0);
}

void MomentumSgd::step(double lr) {
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& impl = *params_[pi].impl();
        if (impl.grad.empty()) continue;
        auto& vel = velocity_[pi];
        for (std::size_t i = 0; i < impl.data.size(); ++i) {
            vel[i] = momentum_ * vel[i] + impl.grad[i];
            impl.data[i] -= lr * vel[i];
        }
    }
}

double cosine_lr(double base, std::int64_t iter, std::int64_t total) {
    if (total <= 1) return base;
    const double x = static_cast<double>(iter) / static_cast<double>(total);
    return base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * x));
}

double poly_lr(double base, std::int64_t iter, std::int64_t total, double power) {
    if (total <= 0) return base;
    const double x = 1.0 - static_cast<double>(iter) / static_cast<double>(total);
    return base * std::pow(x < 0.0 ? 0.0 : x, power);
}

}  // namespace maskd
