#include "etpick/experiment.hpp"

#include <cstdio>

namespace etpick {

SSLBenchmarkData make_ssl_benchmark_data(const SSLBenchmarkSpec& spec, std::uint64_t seed) {
    ClassCatalog cat = ClassCatalog::default_czii();
    SynthConfig scfg;
    scfg.dims = spec.dims;
    scfg.spacing_angstrom = spec.spacing_angstrom;
    scfg.counts = spec.counts;
    scfg.min_sep_fraction = spec.min_sep_fraction;
    scfg.peak_amplitude = spec.amplitude;
    scfg.noise_sd = spec.noise_sd;

    SSLBenchmarkData data;
    std::vector<Tomogram> labeled, unlabeled;
    std::vector<PickSet> labeled_picks;
    std::uint64_t vol_id = 0;
    auto next_seed = [&]() { return mix64(seed ^ (0x5851f42d4c957f2dull * ++vol_id)); };
    for (int i = 0; i < spec.n_labeled; ++i) {
        scfg.seed = next_seed();
        auto [t, p] = synthesize_tomogram(scfg, cat);
        labeled.push_back(std::move(t));
        labeled_picks.push_back(std::move(p));
    }
    for (int i = 0; i < spec.n_unlabeled; ++i) {
        scfg.seed = next_seed();
        auto [t, p] = synthesize_tomogram(scfg, cat);
        (void)p;  // unlabeled: ground truth discarded
        unlabeled.push_back(std::move(t));
    }
    for (int i = 0; i < spec.n_test; ++i) {
        scfg.seed = next_seed();
        auto [t, p] = synthesize_tomogram(scfg, cat);
        data.test.push_back(std::move(t));
        data.test_truth.push_back(std::move(p));
    }
    data.train = make_dataset(std::move(labeled), std::move(labeled_picks), std::move(unlabeled),
                              cat, spec.net.output_stride);
    return data;
}

double evaluate_model(const PickerModelF& model, const std::vector<Tomogram>& test,
                      const std::vector<PickSet>& truth, const ClassCatalog& catalog,
                      double threshold) {
    InferOptions opts;
    opts.tta = TtaMode::Off;
    opts.thresholds = {threshold};
    MatchConfig mcfg;
    mcfg.tau = 0.5;
    std::vector<MatchReport> reports;
    for (std::size_t v = 0; v < test.size(); ++v) {
        auto dets = infer_volume(model, test[v], catalog, opts);
        reports.push_back(match_detections(dets, truth[v], catalog,
                                           test[v].meta.voxel_spacing_angstrom, mcfg));
    }
    return merge_reports(reports).macro_f1;
}

namespace {

AugmentSpec strong_spec(bool dropblock) {
    AugmentSpec spec;
    spec.flip_prob = {0.5, 0.5, 0.5};  // weak flips for the labeled branch
    spec.intensity_scale = {0.95, 1.05};
    spec.intensity_shift = {-0.05, 0.05};
    spec.noise_sd = {0.0, 0.05};
    spec.dropblock_enabled = dropblock;
    spec.dropblock.rate = 0.0015;
    spec.dropblock.kernel = 3;
    spec.dropblock.stride = 1;
    spec.dropblock.fill = DropBlockParams::Fill::Mean;
    return spec;
}

}  // namespace

SSLBenchmarkResult run_ssl_benchmark(const SSLBenchmarkSpec& spec,
                                     const std::vector<std::uint64_t>& seeds, bool verbose) {
    SSLBenchmarkResult result;
    result.seeds = seeds;
    const ClassCatalog cat = ClassCatalog::default_czii();

    for (std::uint64_t seed : seeds) {
        SSLBenchmarkData data = make_ssl_benchmark_data(spec, seed);
        auto eval = [&](const PickerModelF& m) {
            return evaluate_model(m, data.test, data.test_truth, cat, spec.eval_threshold);
        };

        TrainConfig tc;
        tc.crop = spec.crop;
        tc.steps = spec.burnin_steps;
        tc.adam.lr = spec.lr;
        tc.seed = seed;
        tc.augment = strong_spec(false);
        TrainResult burn = burn_in(data.train, spec.net, tc);

        PickerModelF burn_model{spec.net, burn.checkpoint.student.clone()};
        SSLArmScores scores;
        scores.burnin = eval(burn_model);

        auto run_arm = [&](bool multi_view, bool dropblock) {
            SSLConfig ssl;
            ssl.base = tc;
            ssl.base.steps = spec.cotrain_steps;
            ssl.base.augment = strong_spec(dropblock);
            ssl.unsup_weight = spec.unsup_weight;
            ssl.ema_alpha = spec.ema_alpha;
            ssl.multi_view = multi_view;
            TrainResult res = cotrain(data.train, burn.checkpoint, ssl);
            PickerModelF teacher{spec.net, res.checkpoint.teacher.clone()};
            return eval(teacher);
        };
        scores.mt = run_arm(false, false);
        scores.mt_mv = run_arm(true, false);
        scores.mt_mv_db = run_arm(true, true);

        if (verbose)
            std::printf("seed %llu: burnin %.4f  +MT %.4f  +MV %.4f  +DB %.4f\n",
                        static_cast<unsigned long long>(seed), scores.burnin, scores.mt,
                        scores.mt_mv, scores.mt_mv_db);
        result.per_seed.push_back(scores);
    }

    const double n = static_cast<double>(result.per_seed.size());
    for (const auto& s : result.per_seed) {
        result.mean.burnin += s.burnin / n;
        result.mean.mt += s.mt / n;
        result.mean.mt_mv += s.mt_mv / n;
        result.mean.mt_mv_db += s.mt_mv_db / n;
    }
    return result;
}

}  // namespace etpick
