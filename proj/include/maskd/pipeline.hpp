#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskd/data.hpp"
#include "maskd/metrics.hpp"
#include "maskd/metrics_log.hpp"
#include "maskd/modules.hpp"
#include "maskd/nets.hpp"

namespace maskd {

enum class DistillMode {
    none,            // task loss only
    mimic,           // full-feature reconstruction
    region_random,   // region loss with freshly random tokens
    region_learned,  // region loss with learned tokens
    weighted,        // learned tokens + importance weighting
    customized,      // weighted, plus student-customized masks after warmup
    gt_masks,        // region loss with one-hot masks from the labels
};

const char* mode_name(DistillMode mode);
DistillMode mode_from_name(const std::string& name);

// All hyperparameters of the two-stage procedure plus the toy-task shape.
struct DistillConfig {
    int tokens = 6;
    double mu = 1.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;

    int stage1_iters = 2000;
    double stage1_lr = 0.01;
    double stage1_weight_decay = 0.001;

    int stage2_iters = 4000;
    double stage2_lr = 0.02;
    double warmup_fraction = 0.2;

    int batch_size = 8;
    std::uint64_t seed = 42;
    DistillMode mode = DistillMode::customized;

    int height = 64;
    int width = 64;
    int classes = 4;
    int teacher_channels = 32;
    int student_channels = 16;
    int teacher_iters = 3000;
    double teacher_lr = 0.001;
    int train_samples = 256;
    int val_samples = 128;

    int log_every = 50;
    int eval_every = 400;

    void validate() const;

    // First stage-2 iteration at which mask customization is active.
    int customize_start() const;

    std::vector<int> teacher_widths() const;
    std::vector<int> student_widths() const;
};

// Conveniences wiring the named rng substreams.
std::vector<ToySample> train_data(const DistillConfig& cfg);
std::vector<ToySample> val_data(const DistillConfig& cfg);
ToyNet make_teacher_net(const DistillConfig& cfg);
ToyNet make_student_net(const DistillConfig& cfg);

struct TeacherResult {
    ToyNet net;  // frozen
    EvalMetrics val;
    MetricsLog log;
};

// Minimizes per-pixel cross-entropy; aborts with diagnostics if the loss
// stops being finite. Zero iterations returns the net unchanged.
TeacherResult train_teacher(const std::vector<ToySample>& train, const std::vector<ToySample>& val,
                            ToyNet net, const DistillConfig& cfg);

struct Stage1Result {
    ReceptiveTokens tokens;   // frozen on return
    WeightingNet weighting;   // frozen on return
    MetricsLog log;
};

// Stage 1: learn tokens and the weighting net against the frozen teacher.
// The weighted masked feature replaces F at the backbone/head boundary and
// the token loss (task + mu * diversity) is minimized over the tokens and
// weighting parameters only, Adam with cosine-decayed lr.
Stage1Result learn_tokens(const ToyNet& teacher, const std::vector<ToySample>& train,
                          const DistillConfig& cfg);

struct Stage2Result {
    ToyNet student;
    Projector phi;
    MetricsLog log;
    EvalMetrics final_val;
};

// Stage 2: distill a student. tokens/weighting may be null for modes that
// do not need them; modes that do reject their absence. Teacher, tokens and
// weighting must be frozen and are bit-identical afterwards.
Stage2Result distill(const ToyNet& teacher, const ReceptiveTokens* tokens,
                     const WeightingNet* weighting, ToyNet student, Projector phi,
                     const std::vector<ToySample>& train, const std::vector<ToySample>& val,
                     const DistillConfig& cfg);

// K_cls one-hot binary masks from a label map; a partition of unity.
MaskSet gt_masks(const std::vector<int>& labels, int h, int w, int k_cls);

struct SweepRow {
    int tokens = 0;
    double accuracy = 0.0;
    double miou = 0.0;
};

// Learns tokens and distills once per requested token count; T = 0 runs
// plain mimic distillation.
std::vector<SweepRow> token_sweep(const ToyNet& teacher, const std::vector<ToySample>& train,
                                  const std::vector<ToySample>& val, const DistillConfig& cfg,
                                  const std::vector<int>& t_values);

}  // namespace maskd
