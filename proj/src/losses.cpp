#include "maskd/losses.hpp"

#include <stdexcept>

namespace maskd {
namespace {

// Shared body of the region-normalised reconstruction losses. diff_flat is
// F_t - phi(F_s) flattened to (C, HW); weights, when given, is a rank-1
// tensor of length T, otherwise every term has weight 1.
Tensor region_terms(const MaskSet& masks, const Tensor& diff_flat,
                    const std::optional<Tensor>& weights) {
    const int t = masks.count();
    const int channels = diff_flat.dim(0);
    Tensor total = Tensor::scalar(0.0);
    for (int i = 0; i < t; ++i) {
        Tensor mi = row(masks.m, i);
        Tensor masked = hadamard(diff_flat, mi);
        Tensor sq = sum(hadamard(masked, masked));
        Tensor denom = scale(add_const(sum(mi), kMaskDenomEps), static_cast<double>(channels));
        Tensor term = sdiv(sq, denom);
        if (weights) term = smul(row(*weights, i), term);
        total = add(total, term);
    }
    return total;
}

Tensor flatten_spatial(const Tensor& feature) {
    return reshape(feature, {feature.dim(0), feature.dim(1) * feature.dim(2)});
}

void require_spatial_match(const Tensor& a, const Tensor& b, const char* what) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument(std::string(what) + ": spatial extents differ: " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

MaskSet compute_masks(const ReceptiveTokens& tokens, const Tensor& feature_flat, MaskOrigin origin) {
    if (feature_flat.rank() != 2 || feature_flat.dim(0) != tokens.channels())
        throw std::invalid_argument("compute_masks: feature " + shape_str(feature_flat.shape()) +
                                    " does not match token channels " +
                                    std::to_string(tokens.channels()));
    MaskSet out;
    out.m = sigmoid(matmul(tokens.embed, feature_flat));
    out.origin = origin;
    return out;
}

Tensor masked_feature(const MaskSet& masks, const Tensor& feature_flat,
                      const std::optional<Tensor>& weights) {
    if (feature_flat.rank() != 2 || feature_flat.dim(1) != masks.positions())
        throw std::invalid_argument("masked_feature: feature " + shape_str(feature_flat.shape()) +
                                    " does not match mask positions " +
                                    std::to_string(masks.positions()));
    if (weights && weights->numel() != masks.count())
        throw std::invalid_argument("masked_feature: weight count " + std::to_string(weights->numel()) +
                                    " does not match token count " + std::to_string(masks.count()));
    Tensor acc = Tensor::zeros(feature_flat.shape());
    for (int i = 0; i < masks.count(); ++i) {
        Tensor term = hadamard(feature_flat, row(masks.m, i));
        if (weights) term = smul(row(*weights, i), term);
        acc = add(acc, term);
    }
    return acc;
}

Tensor dice(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel())
        throw std::invalid_argument("dice: length mismatch: " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    Tensor sab = sum(hadamard(a, b));
    Tensor denom = add(sum(hadamard(a, a)), sum(hadamard(b, b)));
    if (denom.item() <= 0.0)
        throw std::invalid_argument("dice: degenerate input, both vectors are all-zero");
    return sdiv(scale(sab, 2.0), denom);
}

Tensor diversity_loss(const MaskSet& masks) {
    const int t = masks.count();
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) rows.push_back(row(masks.m, i));
    Tensor total = Tensor::scalar(0.0);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) total = add(total, dice(rows[i], rows[j]));
    return scale(total, 1.0 / (static_cast<double>(t) * static_cast<double>(t)));
}

Tensor token_loss(const Tensor& task, const Tensor& div, double mu) {
    if (mu < 0.0) throw std::invalid_argument("token_loss: mu must be >= 0");
    return add(task, scale(div, mu));
}

Tensor mask_weights(const WeightingNet& net, const Tensor& feature) {
    if (feature.rank() != 3 || feature.dim(0) != net.channels())
        throw std::invalid_argument("mask_weights: feature " + shape_str(feature.shape()) +
                                    " does not match net channels " + std::to_string(net.channels()));
    Tensor h = relu(conv2d(feature, net.conv_w, net.conv_b));
    Tensor pooled = global_avg_pool(h);
    Tensor logits3 = conv2d(reshape(pooled, {net.channels(), 1, 1}), net.head_w, net.head_b);
    return softmax(reshape(logits3, {net.tokens()}));
}

Tensor mimic_loss(const Tensor& teacher_feature, const Tensor& student_feature, const Projector& phi) {
    require_spatial_match(teacher_feature, student_feature, "mimic_loss");
    Tensor diff = sub(teacher_feature, project(phi, student_feature));
    const double inv = 1.0 / static_cast<double>(teacher_feature.numel());
    return scale(sum(hadamard(diff, diff)), inv);
}

Tensor region_loss(const MaskSet& masks, const Tensor& teacher_feature,
                   const Tensor& student_feature, const Projector& phi) {
    require_spatial_match(teacher_feature, student_feature, "region_loss");
    Tensor diff = flatten_spatial(sub(teacher_feature, project(phi, student_feature)));
    Tensor total = region_terms(masks, diff, std::nullopt);
    return scale(total, 1.0 / static_cast<double>(masks.count()));
}

Tensor weighted_maskd_loss(const MaskSet& masks, const Tensor& weights,
                           const Tensor& teacher_feature, const Tensor& student_feature,
                           const Projector& phi) {
    require_spatial_match(teacher_feature, student_feature, "weighted_maskd_loss");
    if (weights.numel() != masks.count())
        throw std::invalid_argument("weighted_maskd_loss: weight count " +
                                    std::to_string(weights.numel()) + " does not match token count " +
                                    std::to_string(masks.count()));
    Tensor diff = flatten_spatial(sub(teacher_feature, project(phi, student_feature)));
    return region_terms(masks, diff, weights);
}

MaskSet customize_masks(const ReceptiveTokens& tokens, const Tensor& student_projected_flat,
                        const MaskSet& teacher_masks) {
    if (teacher_masks.origin != MaskOrigin::teacher)
        throw std::invalid_argument("customize_masks: expected masks of teacher origin");
    if (student_projected_flat.rank() != 2 ||
        student_projected_flat.dim(1) != teacher_masks.positions())
        throw std::invalid_argument("customize_masks: projected feature " +
                                    shape_str(student_projected_flat.shape()) +
                                    " does not match mask positions " +
                                    std::to_string(teacher_masks.positions()));
    // Student masks are observations, not a gradient path: without the stop
    // the student could zero its own masks to erase the loss.
    NoGradGuard ng;
    MaskSet student = compute_masks(tokens, student_projected_flat, MaskOrigin::student);
    MaskSet out;
    out.m = hadamard(student.m, teacher_masks.m);
    out.origin = MaskOrigin::customized;
    return out;
}

Tensor maskd_loss(const ReceptiveTokens& tokens, const Tensor& teacher_feature,
                  const Tensor& student_feature, const Projector& phi,
                  const WeightingNet& weighting, bool customize) {
    require_spatial_match(teacher_feature, student_feature, "maskd_loss");
    const int channels = teacher_feature.dim(0);
    const int hw = teacher_feature.dim(1) * teacher_feature.dim(2);

    // Teacher-side mask and importance computation carries no gradient.
    MaskSet teacher_masks;
    Tensor weights;
    {
        NoGradGuard ng;
        teacher_masks = compute_masks(tokens, reshape(teacher_feature, {channels, hw}));
        weights = mask_weights(weighting, teacher_feature);
    }

    Tensor projected = project(phi, student_feature);
    MaskSet masks = customize
                        ? customize_masks(tokens, reshape(projected, {channels, hw}), teacher_masks)
                        : teacher_masks;
    Tensor diff = flatten_spatial(sub(teacher_feature, projected));
    return region_terms(masks, diff, weights);
}

Tensor student_total_loss(const Tensor& task, const Tensor& distill,
                          const std::optional<Tensor>& aux, double lambda1, double lambda2) {
    if (lambda1 < 0.0 || lambda2 < 0.0)
        throw std::invalid_argument("student_total_loss: loss factors must be >= 0");
    Tensor total = add(task, scale(distill, lambda1));
    if (aux) total = add(total, scale(*aux, lambda2));
    return total;
}

}  // namespace maskd
