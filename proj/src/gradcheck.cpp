#include "maskd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maskd {

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  const std::vector<Tensor>& inputs, double h) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) throw std::invalid_argument("grad_check: no input has requires_grad set");
    for (const auto& in : inputs)
        if (!all_finite(in)) throw std::invalid_argument("grad_check: inputs must be finite");

    for (const auto& in : inputs) in.impl()->grad.clear();

    {
        Tape tape;
        Tensor loss = f(inputs);
        if (loss.numel() != 1)
            throw std::invalid_argument("grad_check: f must be scalar-valued, got shape " +
                                        shape_str(loss.shape()));
        tape.backward(loss);
    }

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) {
        if (in.has_grad())
            analytic.push_back(in.grad());
        else
            analytic.emplace_back(in.values().size(), 0.0);
    }

    double max_rel = 0.0;
    NoGradGuard ng;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        if (!inputs[t].requires_grad()) continue;
        auto& data = inputs[t].impl()->data;
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double orig = data[j];
            data[j] = orig + h;
            const double fp = f(inputs).item();
            data[j] = orig - h;
            const double fm = f(inputs).item();
            data[j] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = analytic[t][j];
            const double denom = std::max({std::abs(ana), std::abs(num), 1e-8});
            max_rel = std::max(max_rel, std::abs(ana - num) / denom);
        }
    }
    return max_rel;
}

}  // namespace maskd
