#pragma once

#include <vector>

#include "maskd/data.hpp"
#include "maskd/modules.hpp"
#include "maskd/nets.hpp"

namespace maskd {

struct EvalMetrics {
    double pixel_accuracy = 0.0;
    double miou = 0.0;
    std::vector<double> per_class_iou;  // 0 for classes absent from gt and prediction
};

// Confusion-matrix metrics over a dataset. workers > 1 fans samples out
// across threads; per-sample counts are integers and summed in sample
// order, so the result is identical for any worker count.
EvalMetrics evaluate(const ToyNet& net, const std::vector<ToySample>& data, int workers = 1);

// Same, but with the feature map replaced by the weighted masked feature
// at the backbone/head boundary (the stage-1 insertion point).
EvalMetrics evaluate_masked(const ToyNet& teacher, const ReceptiveTokens& tokens,
                            const WeightingNet& weighting, const std::vector<ToySample>& data,
                            int workers = 1);

}  // namespace maskd
