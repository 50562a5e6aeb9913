#include "maskd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "maskd/checkpoint.hpp"
#include "maskd/losses.hpp"
#include "maskd/ops.hpp"
#include "maskd/optim.hpp"

namespace maskd {

const char* mode_name(DistillMode mode) {
    switch (mode) {
        case DistillMode::none: return "none";
        case DistillMode::mimic: return "mimic";
        case DistillMode::region_random: return "region_random";
        case DistillMode::region_learned: return "region_learned";
        case DistillMode::weighted: return "weighted";
        case DistillMode::customized: return "customized";
        case DistillMode::gt_masks: return "gt_masks";
    }
    return "?";
}

DistillMode mode_from_name(const std::string& name) {
    for (const DistillMode m :
         {DistillMode::none, DistillMode::mimic, DistillMode::region_random,
          DistillMode::region_learned, DistillMode::weighted, DistillMode::customized,
          DistillMode::gt_masks})
        if (name == mode_name(m)) return m;
    throw std::invalid_argument("unknown distillation mode '" + name +
                                "' (expected none|mimic|region_random|region_learned|weighted|"
                                "customized|gt_masks)");
}

void DistillConfig::validate() const {
    if (tokens < 1) throw std::invalid_argument("config: tokens must be >= 1");
    if (mu < 0.0) throw std::invalid_argument("config: mu must be >= 0");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("config: lambda factors must be >= 0");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
        throw std::invalid_argument("config: warmup_fraction must lie in [0,1]");
    if (stage1_iters < 0 || stage2_iters < 0 || teacher_iters < 0)
        throw std::invalid_argument("config: iteration counts must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (height < 16 || width < 16) throw std::invalid_argument("config: extents must be >= 16");
    if (classes < 2) throw std::invalid_argument("config: classes must be >= 2");
    if (teacher_channels < 2 || student_channels < 1)
        throw std::invalid_argument("config: channel counts too small");
    if (train_samples < batch_size)
        throw std::invalid_argument("config: train_samples must be >= batch_size");
    if (val_samples < 1) throw std::invalid_argument("config: val_samples must be >= 1");
    if (log_every < 1 || eval_every < 1)
        throw std::invalid_argument("config: log_every and eval_every must be >= 1");
}

int DistillConfig::customize_start() const {
    return static_cast<int>(std::llround(warmup_fraction * static_cast<double>(stage2_iters)));
}

std::vector<int> DistillConfig::teacher_widths() const {
    return {std::max(4, (teacher_channels * 3) / 8), teacher_channels};
}

std::vector<int> DistillConfig::student_widths() const {
    return {std::max(2, (student_channels * 3) / 8), student_channels};
}

std::vector<ToySample> train_data(const DistillConfig& cfg) {
    return gen_dataset(Rng(cfg.seed).stream("data.train").next_u64(), cfg.train_samples, cfg.height,
                       cfg.width, cfg.classes);
}

std::vector<ToySample> val_data(const DistillConfig& cfg) {
    return gen_dataset(Rng(cfg.seed).stream("data.val").next_u64(), cfg.val_samples, cfg.height,
                       cfg.width, cfg.classes);
}

ToyNet make_teacher_net(const DistillConfig& cfg) {
    Rng rng = Rng(cfg.seed).stream("teacher.init");
    return make_toy_net(ToyNet::Role::teacher, 3, cfg.teacher_widths(), cfg.classes, rng);
}

ToyNet make_student_net(const DistillConfig& cfg) {
    Rng rng = Rng(cfg.seed).stream("student.init");
    return make_toy_net(ToyNet::Role::student, 3, cfg.student_widths(), cfg.classes, rng);
}

namespace {

// Cyclic batch sampler over a shuffled index order, reshuffled per epoch.
class BatchSampler {
public:
    BatchSampler(std::size_t n, int batch, Rng rng)
        : order_(n), batch_(static_cast<std::size_t>(batch)), rng_(std::move(rng)) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        rng_.shuffle(order_);
    }

    std::vector<std::size_t> next() {
        std::vector<std::size_t> out;
        out.reserve(batch_);
        for (std::size_t i = 0; i < batch_; ++i) {
            if (pos_ == order_.size()) {
                rng_.shuffle(order_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t batch_;
    std::size_t pos_ = 0;
    Rng rng_;
};

void check_finite_loss(double loss, const char* stage, int iter) {
    if (!std::isfinite(loss))
        throw std::runtime_error(std::string(stage) + " diverged at iteration " +
                                 std::to_string(iter) + ": loss=" + std::to_string(loss));
}

std::vector<Tensor> tokens_and_weighting_params(const ReceptiveTokens& tokens,
                                                const WeightingNet& weighting) {
    std::vector<Tensor> ps = weighting.params();
    ps.insert(ps.begin(), tokens.embed);
    return ps;
}

}  // namespace

TeacherResult train_teacher(const std::vector<ToySample>& train, const std::vector<ToySample>& val,
                            ToyNet net, const DistillConfig& cfg) {
    cfg.validate();
    if (net.role != ToyNet::Role::teacher)
        throw std::invalid_argument("train_teacher: net role must be teacher");

    const std::vector<Tensor> params = net.params();
    set_requires_grad(params, true);
    Adam opt(params);
    BatchSampler sampler(train.size(), cfg.batch_size, Rng(cfg.seed).stream("shuffle.teacher"));

    MetricsLog log;
    EvalMetrics last_eval;
    bool evaluated = false;
    for (int it = 0; it < cfg.teacher_iters; ++it) {
        zero_grads(params);
        Tape tape;
        Tensor total = Tensor::scalar(0.0);
        double task_sum = 0.0;
        for (const std::size_t idx : sampler.next()) {
            const ToySample& s = train[idx];
            Tensor loss = pixel_cross_entropy(head_forward(net, backbone_forward(net, s.image)),
                                              s.labels);
            task_sum += loss.item();
            total = add(total, loss);
        }
        total = scale(total, 1.0 / cfg.batch_size);
        check_finite_loss(total.item(), "train_teacher", it);
        tape.backward(total);
        opt.step(cfg.teacher_lr);

        const bool do_eval = (it + 1) % cfg.eval_every == 0 || it + 1 == cfg.teacher_iters;
        if (do_eval) {
            last_eval = evaluate(net, val);
            evaluated = true;
        }
        if ((it + 1) % cfg.log_every == 0 || it + 1 == cfg.teacher_iters) {
            MetricsRow r;
            r.iteration = it + 1;
            r.task = task_sum / cfg.batch_size;
            r.lr = cfg.teacher_lr;
            r.accuracy = evaluated ? last_eval.pixel_accuracy : -1.0;
            r.miou = evaluated ? last_eval.miou : -1.0;
            log.rows.push_back(r);
        }
    }

    set_requires_grad(params, false);
    TeacherResult out{std::move(net), {}, std::move(log)};
    out.val = evaluate(out.net, val);
    return out;
}

Stage1Result learn_tokens(const ToyNet& teacher, const std::vector<ToySample>& train,
                          const DistillConfig& cfg) {
    cfg.validate();
    if (!teacher.frozen())
        throw std::invalid_argument("learn_tokens: teacher must be frozen (no requires_grad params)");

    const int c = teacher.feature_channels();
    Rng tok_rng = Rng(cfg.seed).stream("tokens.init");
    Rng wgt_rng = Rng(cfg.seed).stream("weighting.init");
    ReceptiveTokens tokens = make_tokens(cfg.tokens, c, tok_rng);
    WeightingNet weighting = make_weighting_net(c, cfg.tokens, wgt_rng);

    const std::vector<Tensor> params = tokens_and_weighting_params(tokens, weighting);
    set_requires_grad(params, true);
    Adam opt(params, cfg.stage1_weight_decay);
    BatchSampler sampler(train.size(), cfg.batch_size, Rng(cfg.seed).stream("shuffle.stage1"));

    MetricsLog log;
    for (int it = 0; it < cfg.stage1_iters; ++it) {
        const double lr = cosine_lr(cfg.stage1_lr, it, cfg.stage1_iters);
        zero_grads(params);
        Tape tape;
        Tensor total = Tensor::scalar(0.0);
        double task_sum = 0.0, div_sum = 0.0;
        for (const std::size_t idx : sampler.next()) {
            const ToySample& s = train[idx];
            Tensor feat;
            {
                NoGradGuard ng;
                feat = backbone_forward(teacher, s.image);
            }
            const int hw = feat.dim(1) * feat.dim(2);
            Tensor feat_flat = reshape(feat, {c, hw});
            MaskSet masks = compute_masks(tokens, feat_flat);
            Tensor w = mask_weights(weighting, feat);
            Tensor fhat = masked_feature(masks, feat_flat, w);
            Tensor logits = head_forward(teacher, reshape(fhat, feat.shape()));
            Tensor task = pixel_cross_entropy(logits, s.labels);
            Tensor div = diversity_loss(masks);
            task_sum += task.item();
            div_sum += div.item();
            total = add(total, token_loss(task, div, cfg.mu));
        }
        total = scale(total, 1.0 / cfg.batch_size);
        check_finite_loss(total.item(), "learn_tokens", it);
        tape.backward(total);
        opt.step(lr);

        if ((it + 1) % cfg.log_every == 0 || it + 1 == cfg.stage1_iters) {
            MetricsRow r;
            r.iteration = it + 1;
            r.task = task_sum / cfg.batch_size;
            r.div = div_sum / cfg.batch_size;
            r.lr = lr;
            log.rows.push_back(r);
        }
    }

    set_requires_grad(params, false);
    return {std::move(tokens), std::move(weighting), std::move(log)};
}

namespace {

void require_artifact(bool present, const char* what, DistillMode mode) {
    if (!present)
        throw std::invalid_argument(std::string("distill: mode ") + mode_name(mode) + " requires " +
                                    what);
}

}  // namespace

Stage2Result distill(const ToyNet& teacher, const ReceptiveTokens* tokens,
                     const WeightingNet* weighting, ToyNet student, Projector phi,
                     const std::vector<ToySample>& train, const std::vector<ToySample>& val,
                     const DistillConfig& cfg) {
    cfg.validate();
    if (!teacher.frozen()) throw std::invalid_argument("distill: teacher must be frozen");
    const DistillMode mode = cfg.mode;
    const bool needs_tokens = mode == DistillMode::region_learned || mode == DistillMode::weighted ||
                              mode == DistillMode::customized;
    const bool needs_weighting = mode == DistillMode::weighted || mode == DistillMode::customized;
    if (needs_tokens) {
        require_artifact(tokens != nullptr, "learned tokens", mode);
        if (tokens->embed.requires_grad())
            throw std::invalid_argument("distill: tokens must be frozen");
        if (tokens->channels() != teacher.feature_channels())
            throw std::invalid_argument("distill: token channels do not match the teacher feature");
    }
    if (needs_weighting) {
        require_artifact(weighting != nullptr, "a weighting net", mode);
        for (const auto& p : weighting->params())
            if (p.requires_grad()) throw std::invalid_argument("distill: weighting net must be frozen");
    }
    if (student.role != ToyNet::Role::student)
        throw std::invalid_argument("distill: net role must be student");

    // Freeze verification: frozen inputs must be bit-identical afterwards.
    std::vector<Tensor> frozen = teacher.params();
    if (tokens) frozen.push_back(tokens->embed);
    const std::uint64_t frozen_hash_before = hash_tensors(frozen);

    // Fresh random tokens for region_random, never trained.
    ReceptiveTokens random_tokens;
    if (mode == DistillMode::region_random) {
        Rng rng = Rng(cfg.seed).stream("tokens.random");
        random_tokens = make_tokens(cfg.tokens, teacher.feature_channels(), rng);
    }

    std::vector<Tensor> params = student.params();
    for (const auto& p : phi.params()) params.push_back(p);
    set_requires_grad(params, true);
    MomentumSgd opt(params, 0.9);
    BatchSampler sampler(train.size(), cfg.batch_size, Rng(cfg.seed).stream("shuffle.stage2"));

    const int c = teacher.feature_channels();
    const int customize_from = cfg.customize_start();

    MetricsLog log;
    EvalMetrics last_eval;
    bool evaluated = false;
    for (int it = 0; it < cfg.stage2_iters; ++it) {
        const double lr = poly_lr(cfg.stage2_lr, it, cfg.stage2_iters);
        const bool customize = mode == DistillMode::customized && it >= customize_from;
        zero_grads(params);
        Tape tape;
        Tensor total = Tensor::scalar(0.0);
        double task_sum = 0.0, distill_sum = 0.0;
        for (const std::size_t idx : sampler.next()) {
            const ToySample& s = train[idx];
            Tensor f_s = backbone_forward(student, s.image);
            Tensor task = pixel_cross_entropy(head_forward(student, f_s), s.labels);

            Tensor distill_term = Tensor::scalar(0.0);
            if (mode != DistillMode::none) {
                Tensor f_t;
                {
                    NoGradGuard ng;
                    f_t = backbone_forward(teacher, s.image);
                }
                const int hw = f_t.dim(1) * f_t.dim(2);
                switch (mode) {
                    case DistillMode::mimic:
                        distill_term = mimic_loss(f_t, f_s, phi);
                        break;
                    case DistillMode::region_random:
                    case DistillMode::region_learned: {
                        const ReceptiveTokens& tk =
                            mode == DistillMode::region_random ? random_tokens : *tokens;
                        MaskSet masks;
                        {
                            NoGradGuard ng;
                            masks = compute_masks(tk, reshape(f_t, {c, hw}));
                        }
                        distill_term = region_loss(masks, f_t, f_s, phi);
                        break;
                    }
                    case DistillMode::weighted: {
                        MaskSet masks;
                        Tensor w;
                        {
                            NoGradGuard ng;
                            masks = compute_masks(*tokens, reshape(f_t, {c, hw}));
                            w = mask_weights(*weighting, f_t);
                        }
                        distill_term = weighted_maskd_loss(masks, w, f_t, f_s, phi);
                        break;
                    }
                    case DistillMode::customized:
                        distill_term = maskd_loss(*tokens, f_t, f_s, phi, *weighting, customize);
                        break;
                    case DistillMode::gt_masks:
                        distill_term =
                            region_loss(gt_masks(s.labels, s.height, s.width, cfg.classes), f_t, f_s, phi);
                        break;
                    default:
                        break;
                }
            }
            task_sum += task.item();
            distill_sum += distill_term.item();
            total = add(total, student_total_loss(task, distill_term, std::nullopt, cfg.lambda1,
                                                  cfg.lambda2));
        }
        total = scale(total, 1.0 / cfg.batch_size);
        check_finite_loss(total.item(), "distill", it);
        tape.backward(total);
        opt.step(lr);

        const bool do_eval = (it + 1) % cfg.eval_every == 0 || it + 1 == cfg.stage2_iters;
        if (do_eval) {
            last_eval = evaluate(student, val);
            evaluated = true;
        }
        if ((it + 1) % cfg.log_every == 0 || it + 1 == cfg.stage2_iters) {
            MetricsRow r;
            r.iteration = it + 1;
            r.task = task_sum / cfg.batch_size;
            r.distill = distill_sum / cfg.batch_size;
            r.lr = lr;
            r.accuracy = evaluated ? last_eval.pixel_accuracy : -1.0;
            r.miou = evaluated ? last_eval.miou : -1.0;
            log.rows.push_back(r);
        }
    }

    if (hash_tensors(frozen) != frozen_hash_before)
        throw std::runtime_error("distill: frozen parameters changed during stage 2");

    set_requires_grad(params, false);
    Stage2Result out{std::move(student), std::move(phi), std::move(log), {}};
    out.final_val = cfg.stage2_iters > 0 && evaluated ? last_eval : evaluate(out.student, val);
    return out;
}

MaskSet gt_masks(const std::vector<int>& labels, int h, int w, int k_cls) {
    const std::size_t npix = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    if (labels.size() != npix)
        throw std::invalid_argument("gt_masks: label count does not match extents");
    Tensor m = Tensor::zeros({k_cls, h * w});
    for (std::size_t px = 0; px < npix; ++px) {
        const int l = labels[px];
        if (l < 0 || l >= k_cls)
            throw std::invalid_argument("gt_masks: label " + std::to_string(l) + " out of range");
        m.data()[static_cast<std::size_t>(l) * npix + px] = 1.0;
    }
    return {std::move(m), MaskOrigin::teacher};
}

std::vector<SweepRow> token_sweep(const ToyNet& teacher, const std::vector<ToySample>& train,
                                  const std::vector<ToySample>& val, const DistillConfig& cfg,
                                  const std::vector<int>& t_values) {
    std::vector<SweepRow> out;
    for (const int t : t_values) {
        if (t < 0) throw std::invalid_argument("token_sweep: token counts must be >= 0");
        DistillConfig run = cfg;
        Stage2Result res = [&] {
            if (t == 0) {
                run.mode = DistillMode::mimic;
                Rng phi_rng = Rng(run.seed).stream("phi.init");
                return distill(teacher, nullptr, nullptr, make_student_net(run),
                               make_projector(run.student_channels, teacher.feature_channels(), phi_rng),
                               train, val, run);
            }
            run.tokens = t;
            run.mode = DistillMode::customized;
            Stage1Result stage1 = learn_tokens(teacher, train, run);
            Rng phi_rng = Rng(run.seed).stream("phi.init");
            return distill(teacher, &stage1.tokens, &stage1.weighting, make_student_net(run),
                           make_projector(run.student_channels, teacher.feature_channels(), phi_rng),
                           train, val, run);
        }();
        out.push_back({t, res.final_val.pixel_accuracy, res.final_val.miou});
    }
    return out;
}

}  // namespace maskd
