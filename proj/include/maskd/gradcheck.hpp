#pragma once

#include <functional>
#include <string>
#include <vector>

#include "maskd/tensor.hpp"

namespace maskd {

// Compares reverse-mode gradients of a scalar-valued function against
// central differences, elementwise over every input marked requires_grad.
// Returns the maximum relative error, with the denominator
// max(|analytic|, |numeric|, 1e-8). Throws if f is not scalar-valued or no
// input is differentiable.
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  const std::vector<Tensor>& inputs, double h = 1e-5);

struct OpGradReport {
    std::string op;
    double max_rel_err = 0.0;
};

// Runs grad_check over every primitive op and every composite loss, each
// probed through a random linear functional so gradients stay O(1), with
// `trials` random small-tensor draws per op. Reports the worst error per op.
std::vector<OpGradReport> gradcheck_battery(std::uint64_t seed, int trials, double h = 1e-5);

}  // namespace maskd
