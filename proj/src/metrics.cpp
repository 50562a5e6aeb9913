#include "maskd/metrics.hpp"

#include <cstdint>
#include <functional>
#include <thread>

#include "maskd/losses.hpp"
#include "maskd/ops.hpp"

namespace maskd {
namespace {

using Confusion = std::vector<std::int64_t>;  // K*K, row = gt, col = prediction

void accumulate(Confusion& cm, int k_cls, const std::vector<int>& labels, const Tensor& logits) {
    const std::size_t npix = labels.size();
    const double* lg = logits.data();
    for (std::size_t px = 0; px < npix; ++px) {
        int best = 0;
        double bv = lg[px];
        for (int k = 1; k < k_cls; ++k) {
            const double v = lg[static_cast<std::size_t>(k) * npix + px];
            if (v > bv) {
                bv = v;
                best = k;
            }
        }
        cm[static_cast<std::size_t>(labels[px]) * static_cast<std::size_t>(k_cls) +
           static_cast<std::size_t>(best)] += 1;
    }
}

EvalMetrics from_confusion(const Confusion& cm, int k_cls) {
    EvalMetrics m;
    std::int64_t total = 0, correct = 0;
    for (int g = 0; g < k_cls; ++g)
        for (int p = 0; p < k_cls; ++p) {
            const std::int64_t v = cm[static_cast<std::size_t>(g) * k_cls + p];
            total += v;
            if (g == p) correct += v;
        }
    m.pixel_accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    m.per_class_iou.assign(static_cast<std::size_t>(k_cls), 0.0);
    double iou_sum = 0.0;
    int present = 0;
    for (int c = 0; c < k_cls; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < k_cls; ++j) {
            row += cm[static_cast<std::size_t>(c) * k_cls + j];
            col += cm[static_cast<std::size_t>(j) * k_cls + c];
        }
        const std::int64_t inter = cm[static_cast<std::size_t>(c) * k_cls + c];
        const std::int64_t uni = row + col - inter;
        if (uni > 0) {
            m.per_class_iou[static_cast<std::size_t>(c)] =
                static_cast<double>(inter) / static_cast<double>(uni);
            iou_sum += m.per_class_iou[static_cast<std::size_t>(c)];
            ++present;
        }
    }
    m.miou = present > 0 ? iou_sum / present : 0.0;
    return m;
}

// Fans the per-sample predictor out across workers and merges integer
// confusion counts; single-threaded when workers <= 1.
EvalMetrics run_eval(int k_cls, const std::vector<ToySample>& data, int workers,
                     const std::function<Tensor(const ToySample&)>& predict) {
    const std::size_t n = data.size();
    const int nw = std::max(1, std::min<int>(workers, static_cast<int>(n == 0 ? 1 : n)));
    std::vector<Confusion> parts(static_cast<std::size_t>(nw),
                                 Confusion(static_cast<std::size_t>(k_cls) * k_cls, 0));

    auto work = [&](int wi) {
        NoGradGuard ng;
        for (std::size_t i = static_cast<std::size_t>(wi); i < n; i += static_cast<std::size_t>(nw))
            accumulate(parts[static_cast<std::size_t>(wi)], k_cls, data[i].labels, predict(data[i]));
    };
    if (nw == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int wi = 0; wi < nw; ++wi) pool.emplace_back(work, wi);
        for (auto& t : pool) t.join();
    }

    Confusion total(static_cast<std::size_t>(k_cls) * k_cls, 0);
    for (const auto& part : parts)
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
    return from_confusion(total, k_cls);
}

}  // namespace

EvalMetrics evaluate(const ToyNet& net, const std::vector<ToySample>& data, int workers) {
    return run_eval(net.classes, data, workers, [&](const ToySample& s) {
        return head_forward(net, backbone_forward(net, s.image));
    });
}

EvalMetrics evaluate_masked(const ToyNet& teacher, const ReceptiveTokens& tokens,
                            const WeightingNet& weighting, const std::vector<ToySample>& data,
                            int workers) {
    return run_eval(teacher.classes, data, workers, [&](const ToySample& s) {
        Tensor f = backbone_forward(teacher, s.image);
        const int c = f.dim(0);
        const int hw = f.dim(1) * f.dim(2);
        MaskSet masks = compute_masks(tokens, reshape(f, {c, hw}));
        Tensor w = mask_weights(weighting, f);
        Tensor fhat = masked_feature(masks, reshape(f, {c, hw}), w);
        return head_forward(teacher, reshape(fhat, f.shape()));
    });
}

}  // namespace maskd
