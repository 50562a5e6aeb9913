#pragma once

#include <cstdint>
#include <vector>

#include "maskd/tensor.hpp"

namespace maskd {

void zero_grads(const std::vector<Tensor>& params);

// Adam with the conventional coupled L2 weight decay (decay added to the
// gradient before the moment updates).
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, double weight_decay = 0.0, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);
    void step(double lr);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double wd_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

class MomentumSgd {
public:
    explicit MomentumSgd(std::vector<Tensor> params, double momentum = 0.9);
    void step(double lr);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> velocity_;
    double momentum_;
};

// lr(i) = base * 0.5 * (1 + cos(pi * i / total)); non-increasing, lr(0) = base.
double cosine_lr(double base, std::int64_t iter, std::int64_t total);

// Polynomial annealing lr(i) = base * (1 - i/total)^power.
double poly_lr(double base, std::int64_t iter, std::int64_t total, double power = 0.9);

}  // namespace maskd
