#include "etpick/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "etpick/rng.hpp"

namespace etpick {

void TrainConfig::validate() const {
    if (crop < NetConfig::kDeepestStride || crop % NetConfig::kDeepestStride != 0)
        throw std::invalid_argument("crop size must be a positive multiple of 16");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (crops_per_step < 1) throw std::invalid_argument("crops_per_step must be >= 1");
    if (crop_bias < 0.0 || crop_bias > 1.0)
        throw std::invalid_argument("crop_bias must be in [0,1]");
    if (lr_schedule != "constant" && lr_schedule != "cosine")
        throw std::invalid_argument("lr_schedule must be constant or cosine");
}

void SSLConfig::validate() const {
    base.validate();
    if (unsup_weight < 0.0) throw std::invalid_argument("unsupervised weight must be >= 0");
    if (ema_alpha < 0.0 || ema_alpha > 1.0)
        throw std::invalid_argument("EMA alpha must be in [0,1]");
    if (unlabeled_per_step < 1) throw std::invalid_argument("unlabeled_per_step must be >= 1");
}

Dataset make_dataset(std::vector<Tomogram> labeled_volumes, std::vector<PickSet> labeled_picks,
                     std::vector<Tomogram> unlabeled_volumes, const ClassCatalog& catalog,
                     int output_stride, bool normalize) {
    if (labeled_volumes.size() != labeled_picks.size())
        throw std::invalid_argument("labeled volumes/picks count mismatch");
    catalog.validate();
    Dataset data;
    data.catalog = catalog;
    if (!labeled_volumes.empty())
        data.spacing_angstrom = labeled_volumes[0].meta.voxel_spacing_angstrom;
    else if (!unlabeled_volumes.empty())
        data.spacing_angstrom = unlabeled_volumes[0].meta.voxel_spacing_angstrom;
    for (std::size_t i = 0; i < labeled_volumes.size(); ++i) {
        LabeledVolume lv;
        lv.tomo = std::move(labeled_volumes[i]);
        if (normalize) normalize_volume(lv.tomo);
        lv.picks = std::move(labeled_picks[i]);
        lv.target = synthesize_targets(lv.picks, lv.tomo.meta, catalog, output_stride);
        data.labeled.push_back(std::move(lv));
    }
    for (auto& u : unlabeled_volumes) {
        if (normalize) normalize_volume(u);
        data.unlabeled.push_back(std::move(u));
    }
    return data;
}

namespace {

TensorF crop_tensor(const Tomogram& tomo, const std::array<int, 3>& origin, int size) {
    TensorF crop({1, size, size, size});
    for (int z = 0; z < size; ++z)
        for (int y = 0; y < size; ++y) {
            const float* src = &tomo.data[static_cast<std::size_t>(
                tomo.index(origin[0] + z, origin[1] + y, origin[2]))];
            std::memcpy(&crop.data[static_cast<std::size_t>(crop.idx4(0, z, y, 0))], src,
                        sizeof(float) * static_cast<std::size_t>(size));
        }
    return crop;
}

TensorF slice_target(const Heatmap& target, const std::array<int, 3>& origin, int size) {
    const int R = target.stride_r;
    const int s = size / R;
    const std::array<int, 3> o{origin[0] / R, origin[1] / R, origin[2] / R};
    const int C = target.values.dim(0);
    TensorF out({C, s, s, s});
    for (int c = 0; c < C; ++c)
        for (int z = 0; z < s; ++z)
            for (int y = 0; y < s; ++y) {
                const float* src = &target.values.data[static_cast<std::size_t>(
                    target.values.idx4(c, o[0] + z, o[1] + y, o[2]))];
                std::memcpy(&out.data[static_cast<std::size_t>(out.idx4(c, z, y, 0))], src,
                            sizeof(float) * static_cast<std::size_t>(s));
            }
    return out;
}

// R-aligned random crop origin; optionally forced to contain `pick`
std::array<int, 3> sample_origin(const VolumeMeta& meta, int crop, int R, Rng& rng,
                                 const Pick* pick) {
    std::array<int, 3> origin{};
    for (int a = 0; a < 3; ++a) {
        const int dim = meta.dims[static_cast<std::size_t>(a)];
        if (crop > dim) throw std::invalid_argument("crop larger than volume");
        const int max_r = (dim - crop) / R;
        if (pick) {
            const double p = a == 0 ? pick->z : (a == 1 ? pick->y : pick->x);
            int lo = std::max(0, static_cast<int>(std::floor(p)) - crop + 1);
            int hi = std::min(dim - crop, static_cast<int>(std::floor(p)));
            int lo_r = (lo + R - 1) / R, hi_r = hi / R;
            if (lo_r > hi_r) {
                origin[static_cast<std::size_t>(a)] =
                    static_cast<int>(rng.uniform_int(0, max_r)) * R;
            } else {
                origin[static_cast<std::size_t>(a)] =
                    static_cast<int>(rng.uniform_int(lo_r, hi_r)) * R;
            }
        } else {
            origin[static_cast<std::size_t>(a)] = static_cast<int>(rng.uniform_int(0, max_r)) * R;
        }
    }
    return origin;
}

bool crop_contains_pick(const PickSet& picks, const std::array<int, 3>& origin, int crop) {
    for (const auto& p : picks.picks)
        if (p.z >= origin[0] && p.z < origin[0] + crop && p.y >= origin[1] &&
            p.y < origin[1] + crop && p.x >= origin[2] && p.x < origin[2] + crop)
            return true;
    return false;
}

}  // namespace

LabeledCrop sample_labeled_crop(const Dataset& data, const TrainConfig& cfg, int R,
                                Rng& sampler, Rng& augment) {
    const int vol_idx =
        static_cast<int>(sampler.uniform_int(0, static_cast<std::int64_t>(data.labeled.size()) - 1));
    const LabeledVolume& lv = data.labeled[static_cast<std::size_t>(vol_idx)];

    const bool biased = sampler.uniform01() < cfg.crop_bias && !lv.picks.picks.empty();
    const Pick* pick = nullptr;
    if (biased)
        pick = &lv.picks.picks[static_cast<std::size_t>(
            sampler.uniform_int(0, static_cast<std::int64_t>(lv.picks.picks.size()) - 1))];
    const auto origin = sample_origin(lv.tomo.meta, cfg.crop, R, sampler, pick);

    LabeledCrop out;
    out.input = crop_tensor(lv.tomo, origin, cfg.crop);
    out.target = slice_target(lv.target, origin, cfg.crop);
    out.contains_pick = crop_contains_pick(lv.picks, origin, cfg.crop);

    // weak flips, applied jointly to crop and target
    for (int a = 0; a < 3; ++a)
        if (augment.uniform01() < cfg.augment.flip_prob[static_cast<std::size_t>(a)]) {
            out.input = flip_tensor(out.input, static_cast<Axis>(a));
            out.target = flip_tensor(out.target, static_cast<Axis>(a));
        }
    return out;
}

namespace {

TensorF sample_unlabeled_crop(const Dataset& data, int crop, int R, Rng& sampler) {
    const int vol_idx = static_cast<int>(
        sampler.uniform_int(0, static_cast<std::int64_t>(data.unlabeled.size()) - 1));
    const Tomogram& vol = data.unlabeled[static_cast<std::size_t>(vol_idx)];
    const auto origin = sample_origin(vol.meta, crop, R, sampler, nullptr);
    return crop_tensor(vol, origin, crop);
}

double lr_at(const TrainConfig& cfg, std::int64_t local_step) {
    if (cfg.lr_schedule == "cosine") {
        const double t = static_cast<double>(local_step) / std::max(1, cfg.steps - 1);
        return cfg.adam.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
    }
    return cfg.adam.lr;
}

// One optimizer step. The supervised path runs first and is byte-identical
// whether or not a consistency branch follows; with w == 0 the unlabeled
// branch is skipped entirely, which is what makes cotrain with w=0, alpha=0
// an exact continuation of burn-in.
struct StepOutcome {
    double loss_sup = 0.0;
    double loss_cons = 0.0;
    double w = 0.0;
    double loss_total = 0.0;
};

StepOutcome train_step(PickerModelF& student, OptimizerStateF& opt, const Dataset& data,
                       const TrainConfig& cfg, std::int64_t global_step, std::int64_t local_step,
                       double w, const PickerModelF* teacher, const SSLConfig* ssl) {
    const int R = student.config.output_stride;
    nn::Graph<float> g;
    auto pnodes = PickNetF::tape_params(g, student, true);

    Rng sampler = Rng::stream(cfg.seed, "sampler.labeled", static_cast<std::uint64_t>(global_step));
    Rng augment = Rng::stream(cfg.seed, "augment.labeled", static_cast<std::uint64_t>(global_step));

    int loss_sup = -1;
    for (int i = 0; i < cfg.crops_per_step; ++i) {
        LabeledCrop crop = sample_labeled_crop(data, cfg, R, sampler, augment);
        const int out = PickNetF::forward_taped(g, student, pnodes, std::move(crop.input));
        const int li = reweighted_mse_node(g, out, std::move(crop.target), cfg.loss);
        loss_sup = loss_sup < 0 ? li : nn::add_scaled(g, loss_sup, 1.0f, li, 1.0f);
    }
    if (cfg.crops_per_step > 1)
        loss_sup = nn::scale(g, loss_sup, 1.0f / static_cast<float>(cfg.crops_per_step));

    StepOutcome outcome;
    outcome.loss_sup = g.value(loss_sup)[0];
    outcome.w = w;

    int total = loss_sup;
    if (ssl && w > 0.0) {
        Rng usampler =
            Rng::stream(cfg.seed, "sampler.unlabeled", static_cast<std::uint64_t>(global_step));
        Rng uaugment =
            Rng::stream(cfg.seed, "augment.strong", static_cast<std::uint64_t>(global_step));
        ForwardFn teacher_fwd = [teacher](const TensorF& in) {
            return PickNetF::predict(*teacher, in);
        };
        int loss_cons = -1;
        for (int j = 0; j < ssl->unlabeled_per_step; ++j) {
            TensorF u = sample_unlabeled_crop(data, cfg.crop, R, usampler);
            TensorF pl = pseudo_label(teacher_fwd, u, ssl->multi_view);
            TensorF us = apply_strong(u, cfg.augment, uaugment.next_u64());
            const int out = PickNetF::forward_taped(g, student, pnodes, std::move(us));
            const int li = reweighted_mse_node(g, out, std::move(pl), cfg.loss);
            loss_cons = loss_cons < 0 ? li : nn::add_scaled(g, loss_cons, 1.0f, li, 1.0f);
        }
        if (ssl->unlabeled_per_step > 1)
            loss_cons = nn::scale(g, loss_cons, 1.0f / static_cast<float>(ssl->unlabeled_per_step));
        outcome.loss_cons = g.value(loss_cons)[0];
        total = nn::add_scaled(g, loss_sup, 1.0f, loss_cons, static_cast<float>(w));
    }
    outcome.loss_total = g.value(total)[0];
    if (!std::isfinite(outcome.loss_total))
        throw std::runtime_error("non-finite loss at step " + std::to_string(global_step) +
                                 " (sup=" + std::to_string(outcome.loss_sup) +
                                 ", cons=" + std::to_string(outcome.loss_cons) + ")");

    g.backward(total);
    std::vector<TensorF> grads;
    grads.reserve(pnodes.size());
    for (int pn : pnodes) grads.push_back(g.grad(pn));
    adam_step(student.params, grads, opt, lr_at(cfg, local_step));
    return outcome;
}

Checkpoint make_checkpoint(const std::string& stage, std::int64_t step, const PickerModelF& student,
                           const ParamSetF& teacher, const OptimizerStateF& opt,
                           const Dataset& data, std::uint64_t config_hash) {
    Checkpoint ck;
    ck.stage = stage;
    ck.step = step;
    ck.net = student.config;
    ck.catalog_hash = catalog_hash(data.catalog);
    ck.config_hash = config_hash;
    ck.student = student.params.clone();
    ck.teacher = teacher.size() > 0 ? teacher.clone() : student.params.clone();
    ck.optimizer = opt;
    return ck;
}

}  // namespace

TensorF pseudo_label(const ForwardFn& fwd, const TensorF& crop, bool multi_view) {
    if (!multi_view) return fwd(crop);
    auto views = apply_weak_views(crop);
    std::vector<TensorF> preds;
    preds.reserve(kWeakViews);
    for (int i = 0; i < kWeakViews; ++i)
        preds.push_back(realign_view(fwd(views[static_cast<std::size_t>(i)]), i));
    return average_views(std::move(preds));
}

TrainResult burn_in(const Dataset& data, const NetConfig& net, const TrainConfig& cfg,
                    const TrainHooks& hooks) {
    cfg.validate();
    net.validate();
    if (data.labeled.empty()) throw std::invalid_argument("burn_in: empty labeled dataset");

    PickerModelF student = PickNetF::build(net, cfg.seed);
    OptimizerStateF opt = OptimizerStateF::init(student.params, cfg.adam);
    ParamSetF no_teacher;

    TrainResult res;
    for (std::int64_t s = 0; s < cfg.steps; ++s) {
        const StepOutcome o = train_step(student, opt, data, cfg, s, s, 0.0, nullptr, nullptr);
        MetricsRow row;
        row.step = s;
        row.loss_sup = o.loss_sup;
        row.loss_total = o.loss_total;
        if (hooks.eval_model && cfg.eval_every > 0 && (s + 1) % cfg.eval_every == 0)
            row.eval_f1 = hooks.eval_model(student);
        res.metrics.push_back(row);
        if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0 &&
            s + 1 < cfg.steps)
            hooks.on_checkpoint(
                make_checkpoint("burn-in", s + 1, student, no_teacher, opt, data, 0));
    }
    res.checkpoint =
        make_checkpoint("burn-in", cfg.steps, student, no_teacher, opt, data, 0);
    if (hooks.on_checkpoint) hooks.on_checkpoint(res.checkpoint);
    return res;
}

TrainResult cotrain(const Dataset& data, const Checkpoint& init, const SSLConfig& cfg,
                    const TrainHooks& hooks) {
    cfg.validate();
    if (data.labeled.empty()) throw std::invalid_argument("cotrain: empty labeled dataset");
    if (data.unlabeled.empty() && cfg.unsup_weight > 0.0)
        throw std::invalid_argument("cotrain: empty unlabeled dataset");
    if (init.catalog_hash != catalog_hash(data.catalog))
        throw std::runtime_error("cotrain: checkpoint catalog hash does not match the dataset");

    PickerModelF student;
    student.config = init.net;
    student.params = init.student.clone();

    // duplicate the initial weights into the teacher (resumed co-training
    // keeps its saved teacher)
    PickerModelF teacher;
    teacher.config = init.net;
    teacher.params =
        (init.stage == "cotrain" && init.has_teacher()) ? init.teacher.clone() : init.student.clone();

    OptimizerStateF opt = init.optimizer ? *init.optimizer
                                         : OptimizerStateF::init(student.params, cfg.base.adam);
    const std::int64_t start = init.step;

    TrainResult res;
    std::uint64_t ema_updates = 0;
    for (std::int64_t s = 0; s < cfg.base.steps; ++s) {
        const std::int64_t global = start + s;
        double w = cfg.unsup_weight;
        if (cfg.ramp_steps > 0)
            w *= std::min(1.0, static_cast<double>(s + 1) / static_cast<double>(cfg.ramp_steps));
        const StepOutcome o =
            train_step(student, opt, data, cfg.base, global, s, w, &teacher, &cfg);
        ema_update(teacher.params, student.params, cfg.ema_alpha);
        ++ema_updates;

        MetricsRow row;
        row.step = global;
        row.loss_sup = o.loss_sup;
        row.loss_cons = o.loss_cons;
        row.w = o.w;
        row.loss_total = o.loss_total;
        row.ema_distance = param_distance(teacher.params, student.params);
        if (hooks.eval_model && cfg.base.eval_every > 0 && (s + 1) % cfg.base.eval_every == 0)
            row.eval_f1 = hooks.eval_model(teacher);
        res.metrics.push_back(row);
        if (hooks.on_checkpoint && cfg.base.checkpoint_every > 0 &&
            (s + 1) % cfg.base.checkpoint_every == 0 && s + 1 < cfg.base.steps)
            hooks.on_checkpoint(make_checkpoint("cotrain", global + 1, student, teacher.params,
                                                opt, data, 0));
    }
    (void)ema_updates;
    res.checkpoint = make_checkpoint("cotrain", start + cfg.base.steps, student, teacher.params,
                                     opt, data, 0);
    if (hooks.on_checkpoint) hooks.on_checkpoint(res.checkpoint);
    return res;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << "step,loss_sup,loss_cons,w,loss_total,ema_distance,eval_f1\n";
    for (const auto& r : rows) {
        f << r.step << "," << r.loss_sup << "," << r.loss_cons << "," << r.w << ","
          << r.loss_total << "," << r.ema_distance << ",";
        if (r.eval_f1 >= 0.0) f << r.eval_f1;
        f << "\n";
    }
}

}  // namespace etpick
