#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "etpick/augment.hpp"
#include "etpick/checkpoint.hpp"
#include "etpick/heatmap.hpp"
#include "etpick/params.hpp"
#include "etpick/picknet.hpp"
#include "etpick/rng.hpp"
#include "etpick/synth.hpp"

namespace etpick {

// Training-ready volume: normalized intensities plus the cached full-volume
// target heatmap (crop targets are slices of it, so tails of out-of-crop
// picks survive cropping).
struct LabeledVolume {
    Tomogram tomo;
    PickSet picks;
    Heatmap target;
};

struct Dataset {
    ClassCatalog catalog;
    double spacing_angstrom = 10.0;
    std::vector<LabeledVolume> labeled;
    std::vector<Tomogram> unlabeled;  // normalized like the labeled ones
};

Dataset make_dataset(std::vector<Tomogram> labeled_volumes, std::vector<PickSet> labeled_picks,
                     std::vector<Tomogram> unlabeled_volumes, const ClassCatalog& catalog,
                     int output_stride, bool normalize = true);

struct TrainConfig {
    int crop = 32;                // divisible by 16
    int crops_per_step = 1;       // labeled crops per optimizer step
    int steps = 300;
    AdamConfig adam;              // lr 1e-3, betas 0.9/0.999, eps 1e-8
    std::string lr_schedule = "constant";  // constant | cosine
    LossConfig loss;              // lambda 4, eps 1e-6
    AugmentSpec augment;          // weak flips for labeled crops; strong spec for SSL
    double crop_bias = 0.5;       // fraction of crops forced to contain a pick
    std::uint64_t seed = 0;
    int checkpoint_every = 0;     // 0 = final only
    int eval_every = 0;           // 0 = never; uses the eval callback

    void validate() const;
};

struct SSLConfig {
    TrainConfig base;
    double unsup_weight = 1.0;    // w
    int ramp_steps = 0;           // linear ramp of w over the first N steps; 0 = off
    double ema_alpha = 0.001;     // teacher <- (1-a) teacher + a student
    bool multi_view = true;       // 4-view pseudo-labels vs single view
    int unlabeled_per_step = 1;

    void validate() const;
};

// One biased random crop: with probability crop_bias the crop is forced to
// contain a pick. Draws come from the two streams in a fixed order.
struct LabeledCrop {
    TensorF input;
    TensorF target;
    bool contains_pick = false;
};
LabeledCrop sample_labeled_crop(const Dataset& data, const TrainConfig& cfg, int output_stride,
                                Rng& sampler, Rng& augment);

struct MetricsRow {
    std::int64_t step = 0;
    double loss_sup = 0.0;
    double loss_cons = 0.0;
    double w = 0.0;
    double loss_total = 0.0;
    double ema_distance = 0.0;
    double eval_f1 = -1.0;  // -1 = not evaluated this step
};

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

struct TrainState {
    PickerModelF student;
    ParamSetF teacher;            // empty during burn-in
    OptimizerStateF opt;
    std::int64_t step = 0;
    std::vector<MetricsRow> metrics;
    std::uint64_t teacher_ema_updates = 0;
};

struct TrainHooks {
    // invoked at checkpoint cadence and once at the end
    std::function<void(const Checkpoint&)> on_checkpoint;
    // held-out metric for train_report rows (teacher when present)
    std::function<double(const PickerModelF&)> eval_model;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<MetricsRow> metrics;
};

// Supervised burn-in on the labeled set. Deterministic per (dataset, cfg):
// every stochastic draw comes from a named per-step stream, so runs resumed
// from a checkpoint replay the exact uninterrupted trajectory.
TrainResult burn_in(const Dataset& data, const NetConfig& net, const TrainConfig& cfg,
                    const TrainHooks& hooks = {});

// Teacher pseudo-label for one crop. `fwd` maps (1,D,H,W) -> (C,D',H',W').
// Multi-view: forward the four weak views, realign through the inverse
// flips, pairwise-average.
using ForwardFn = std::function<TensorF(const TensorF&)>;
TensorF pseudo_label(const ForwardFn& fwd, const TensorF& crop, bool multi_view);

// Teacher-student co-training from a burn-in checkpoint. Student takes the
// supervised loss plus w * consistency against the teacher pseudo-label of
// the unaugmented unlabeled crop; only the student is optimized; the teacher
// tracks it by EMA and is the model evaluation uses.
TrainResult cotrain(const Dataset& data, const Checkpoint& init, const SSLConfig& cfg,
                    const TrainHooks& hooks = {});

}  // namespace etpick
