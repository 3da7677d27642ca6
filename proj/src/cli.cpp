#include "etpick/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "etpick/checkpoint.hpp"
#include "etpick/decode.hpp"
#include "etpick/eval.hpp"
#include "etpick/experiment.hpp"
#include "etpick/io.hpp"
#include "etpick/rng.hpp"
#include "etpick/synth.hpp"
#include "etpick/train.hpp"

namespace etpick {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBuildId = "etpick 0.1.0";

std::string now_iso8601() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    return j;
}

// The fully resolved config is hashed and echoed into the manifest so runs
// are auditable and stage mismatches are hard errors.
struct ManifestWriter {
    json manifest;
    fs::path out_dir;
    bool force = false;

    ManifestWriter(const std::string& command, const fs::path& dir, const json& resolved_config,
                   std::uint64_t seed, bool force_flag)
        : out_dir(dir), force(force_flag) {
        if (fs::exists(out_dir / "manifest.json") && !force)
            throw std::runtime_error("output directory already contains a run (use --force): " +
                                     (out_dir / "manifest.json").string());
        fs::create_directories(out_dir);
        manifest["command"] = command;
        manifest["config"] = resolved_config;
        manifest["config_hash"] = fnv1a64(resolved_config.dump());
        manifest["seed"] = seed;
        manifest["build"] = kBuildId;
        manifest["started"] = now_iso8601();
        manifest["artifacts"] = json::array();
    }

    void add_artifact(const fs::path& p) { manifest["artifacts"].push_back(p.string()); }

    std::uint64_t config_hash() const { return manifest["config_hash"].get<std::uint64_t>(); }

    // written last: the manifest is the success marker of a run
    void finalize() {
        manifest["finished"] = now_iso8601();
        std::ofstream f(out_dir / "manifest.json");
        if (!f) throw std::runtime_error("cannot write manifest");
        f << manifest.dump(2) << "\n";
    }
};

std::string volume_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "vol_%03d", index);
    return buf;
}

// --- config section parsers -------------------------------------------------

SynthConfig parse_synth(const json& j) {
    SynthConfig cfg;
    if (j.contains("dims")) {
        auto d = j.at("dims");
        cfg.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    }
    cfg.spacing_angstrom = j.value("spacing_angstrom", cfg.spacing_angstrom);
    if (j.contains("counts")) cfg.counts = j.at("counts").get<std::vector<int>>();
    cfg.min_sep_fraction = j.value("min_sep_fraction", cfg.min_sep_fraction);
    cfg.peak_amplitude = j.value("peak_amplitude", cfg.peak_amplitude);
    cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
    return cfg;
}

AugmentSpec parse_augment(const json& j) {
    AugmentSpec spec;
    auto range = [&](const char* key, std::array<double, 2>& dst) {
        if (j.contains(key)) dst = {j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    };
    if (j.contains("flip_prob"))
        spec.flip_prob = {j.at("flip_prob").at(0).get<double>(),
                          j.at("flip_prob").at(1).get<double>(),
                          j.at("flip_prob").at(2).get<double>()};
    range("intensity_scale", spec.intensity_scale);
    range("intensity_shift", spec.intensity_shift);
    range("noise_sd", spec.noise_sd);
    range("gamma", spec.gamma);
    if (j.contains("dropblock")) {
        const auto& d = j.at("dropblock");
        spec.dropblock_enabled = d.value("enabled", false);
        spec.dropblock.rate = d.value("rate", spec.dropblock.rate);
        spec.dropblock.kernel = d.value("kernel", spec.dropblock.kernel);
        spec.dropblock.stride = d.value("stride", spec.dropblock.stride);
        const std::string fill = d.value("fill", "mean");
        spec.dropblock.fill =
            fill == "zero" ? DropBlockParams::Fill::Zero : DropBlockParams::Fill::Mean;
    }
    return spec;
}

TrainConfig parse_train(const json& j, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.crop = j.value("crop", cfg.crop);
    cfg.crops_per_step = j.value("crops_per_step", cfg.crops_per_step);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.adam.lr = j.value("lr", cfg.adam.lr);
    cfg.adam.beta1 = j.value("beta1", cfg.adam.beta1);
    cfg.adam.beta2 = j.value("beta2", cfg.adam.beta2);
    cfg.lr_schedule = j.value("lr_schedule", cfg.lr_schedule);
    cfg.loss.lambda = j.value("loss_lambda", cfg.loss.lambda);
    cfg.loss.epsilon = j.value("loss_epsilon", cfg.loss.epsilon);
    cfg.crop_bias = j.value("crop_bias", cfg.crop_bias);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.eval_every = j.value("eval_every", cfg.eval_every);
    if (j.contains("augment")) cfg.augment = parse_augment(j.at("augment"));
    cfg.seed = seed;
    return cfg;
}

NetConfig parse_net(const json& j, int num_classes) {
    if (j.is_null()) return NetConfig::compact(num_classes);
    NetConfig base = NetConfig::compact(num_classes);
    if (j.contains("preset")) {
        const std::string p = j.at("preset").get<std::string>();
        if (p == "desk")
            base = NetConfig::desk_default(num_classes);
        else if (p == "compact")
            base = NetConfig::compact(num_classes);
        else if (p == "tiny")
            base = NetConfig::tiny(num_classes);
        else
            throw std::runtime_error("unknown net preset: " + p);
    }
    base.stem_channels = j.value("stem_channels", base.stem_channels);
    if (j.contains("encoder_channels"))
        base.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
    if (j.contains("decoder_channels"))
        base.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
    base.output_stride = j.value("output_stride", base.output_stride);
    base.norm_groups = j.value("norm_groups", base.norm_groups);
    return base;
}

// --- data-dir helpers --------------------------------------------------------

std::vector<std::string> read_split(const fs::path& dir, const std::string& name) {
    std::ifstream f(dir / (name + ".txt"));
    if (!f) throw std::runtime_error("missing split list: " + (dir / (name + ".txt")).string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ids.push_back(line);
    return ids;
}

Dataset load_dataset(const fs::path& data_dir, int output_stride, bool with_unlabeled) {
    ClassCatalog cat = read_catalog((data_dir / "catalog.json").string());
    std::vector<Tomogram> labeled, unlabeled;
    std::vector<PickSet> picks;
    for (const auto& id : read_split(data_dir, "labeled")) {
        Tomogram t = read_volume((data_dir / (id + ".tomo")).string());
        picks.push_back(read_picks((data_dir / (id + ".picks.jsonl")).string(), t.meta, cat));
        labeled.push_back(std::move(t));
    }
    if (with_unlabeled)
        for (const auto& id : read_split(data_dir, "unlabeled"))
            unlabeled.push_back(read_volume((data_dir / (id + ".tomo")).string()));
    return make_dataset(std::move(labeled), std::move(picks), std::move(unlabeled), cat,
                        output_stride);
}

// teacher when present (EMA teacher outperforms the student), else student
PickerModelF model_from_checkpoint(const Checkpoint& ck, const std::string& which) {
    PickerModelF m;
    m.config = ck.net;
    if (which == "student" || !ck.has_teacher())
        m.params = ck.student.clone();
    else
        m.params = ck.teacher.clone();
    // arch guard: names and shapes must match what the config builds
    PickerModelF ref = PickNetF::build(ck.net, 0);
    if (!ref.params.shape_identical(m.params))
        throw std::runtime_error("checkpoint parameters do not match its net config");
    return m;
}

std::vector<double> parse_thresholds(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

// --- subcommands -------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out, std::uint64_t seed,
              bool force) {
    json cfg_json = load_json(config_path);
    SynthConfig proto = parse_synth(cfg_json);
    const int n_labeled = cfg_json.value("n_labeled", 2);
    const int n_unlabeled = cfg_json.value("n_unlabeled", 16);
    const int n_test = cfg_json.value("n_test", 8);
    if (n_labeled + n_unlabeled + n_test <= 0)
        throw std::runtime_error("config requests zero volumes");
    if (n_labeled <= 0) throw std::runtime_error("config requests zero labeled volumes");

    ClassCatalog cat = ClassCatalog::default_czii();
    if (cfg_json.contains("catalog")) {
        cat.classes.clear();
        int id = 0;
        for (const auto& e : cfg_json.at("catalog"))
            cat.classes.push_back(
                {id++, e.at("name").get<std::string>(), e.at("radius_angstrom").get<double>()});
        cat.validate();
    }
    if (proto.counts.empty()) proto.counts.assign(static_cast<std::size_t>(cat.size()), 2);

    json resolved = cfg_json;
    resolved["resolved_seed"] = seed;
    ManifestWriter mw("synth", out, resolved, seed, force);

    write_catalog(cat, (fs::path(out) / "catalog.json").string());
    mw.add_artifact(fs::path(out) / "catalog.json");

    struct Split {
        const char* name;
        int count;
    };
    const Split splits[] = {{"labeled", n_labeled}, {"unlabeled", n_unlabeled}, {"test", n_test}};
    int index = 0;
    for (const auto& split : splits) {
        std::ofstream list(fs::path(out) / (std::string(split.name) + ".txt"));
        for (int i = 0; i < split.count; ++i, ++index) {
            SynthConfig vcfg = proto;
            vcfg.seed = mix64(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(index) + 1)));
            auto [tomo, picks] = synthesize_tomogram(vcfg, cat);
            const std::string id = volume_name(index);
            picks.tomogram_id = id;
            write_volume(tomo, (fs::path(out) / (id + ".tomo")).string());
            write_picks(picks, tomo.meta, cat, (fs::path(out) / (id + ".picks.jsonl")).string());
            mw.add_artifact(fs::path(out) / (id + ".tomo"));
            mw.add_artifact(fs::path(out) / (id + ".picks.jsonl"));
            list << id << "\n";
        }
        mw.add_artifact(fs::path(out) / (std::string(split.name) + ".txt"));
    }
    mw.finalize();
    std::printf("synth: %d volumes written to %s\n", index, out.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out,
              std::uint64_t seed, const std::string& init, bool force) {
    json cfg_json = load_json(config_path);
    TrainConfig cfg = parse_train(cfg_json.value("train", json::object()), seed);

    Dataset ds = load_dataset(data, 2, false);
    NetConfig net = parse_net(cfg_json.value("net", json(nullptr)), ds.catalog.size());
    net.validate();

    json resolved = cfg_json;
    resolved["resolved_seed"] = seed;
    resolved["net_resolved"] = netconfig_json(net);
    ManifestWriter mw("train", out, resolved, seed, force);

    if (!init.empty()) {
        // resume support: continue from the checkpoint's step with the same
        // per-step streams, which reproduces the uninterrupted run
        Checkpoint ck = load_checkpoint(init);
        if (catalog_hash(ds.catalog) != ck.catalog_hash)
            throw std::runtime_error("checkpoint catalog hash does not match the data directory");
        SSLConfig cont;
        cont.base = cfg;
        cont.unsup_weight = 0.0;
        cont.ema_alpha = 0.0;
        TrainResult res = cotrain(ds, ck, cont);
        res.checkpoint.stage = "burn-in";
        res.checkpoint.config_hash = mw.config_hash();
        save_checkpoint(res.checkpoint, (fs::path(out) / "ckpt_final").string());
        write_metrics_csv(res.metrics, (fs::path(out) / "metrics.csv").string());
        mw.add_artifact(fs::path(out) / "ckpt_final.json");
        mw.add_artifact(fs::path(out) / "metrics.csv");
        mw.finalize();
        std::printf("train: resumed %lld steps, final loss %.6f\n",
                    static_cast<long long>(cfg.steps), res.metrics.back().loss_total);
        return 0;
    }

    TrainHooks hooks;
    hooks.on_checkpoint = [&](const Checkpoint& ck) {
        Checkpoint tagged = ck;
        tagged.config_hash = mw.config_hash();
        const std::string name =
            ck.step >= cfg.steps ? "ckpt_final" : "ckpt_step" + std::to_string(ck.step);
        save_checkpoint(tagged, (fs::path(out) / name).string());
        mw.add_artifact(fs::path(out) / (name + ".json"));
    };
    TrainResult res = burn_in(ds, net, cfg, hooks);
    write_metrics_csv(res.metrics, (fs::path(out) / "metrics.csv").string());
    mw.add_artifact(fs::path(out) / "metrics.csv");
    mw.finalize();
    std::printf("train: %d steps, final loss %.6f\n", cfg.steps, res.metrics.back().loss_total);
    return 0;
}

int cmd_cotrain(const std::string& config_path, const std::string& data, const std::string& out,
                std::uint64_t seed, const std::string& init, const std::string& ablate,
                bool force) {
    if (init.empty())
        throw std::runtime_error(
            "cotrain requires --init with the burn-in checkpoint (run `etpick train` first)");
    json cfg_json = load_json(config_path);
    SSLConfig ssl;
    ssl.base = parse_train(cfg_json.value("train", json::object()), seed);
    const json ssl_json = cfg_json.value("ssl", json::object());
    ssl.unsup_weight = ssl_json.value("unsup_weight", ssl.unsup_weight);
    ssl.ramp_steps = ssl_json.value("ramp_steps", ssl.ramp_steps);
    ssl.ema_alpha = ssl_json.value("ema_alpha", ssl.ema_alpha);
    ssl.multi_view = ssl_json.value("multi_view", ssl.multi_view);
    ssl.unlabeled_per_step = ssl_json.value("unlabeled_per_step", ssl.unlabeled_per_step);

    // ablation toggles: comma list of enabled features (mt,mv,dropblock)
    if (!ablate.empty()) {
        bool mv = false, db = false;
        std::stringstream ss(ablate);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok == "mt") continue;  // co-training itself
            if (tok == "mv")
                mv = true;
            else if (tok == "dropblock")
                db = true;
            else
                throw std::runtime_error("unknown --ablate feature: " + tok);
        }
        ssl.multi_view = mv;
        ssl.base.augment.dropblock_enabled = db;
    }

    Checkpoint ck = load_checkpoint(init);
    Dataset ds = load_dataset(data, ck.net.output_stride, true);

    json resolved = cfg_json;
    resolved["resolved_seed"] = seed;
    resolved["ablate"] = ablate;
    ManifestWriter mw("cotrain", out, resolved, seed, force);

    TrainHooks hooks;
    hooks.on_checkpoint = [&](const Checkpoint& c) {
        Checkpoint tagged = c;
        tagged.config_hash = mw.config_hash();
        const std::string name = c.step >= ck.step + ssl.base.steps
                                     ? "ckpt_final"
                                     : "ckpt_step" + std::to_string(c.step);
        save_checkpoint(tagged, (fs::path(out) / name).string());
        mw.add_artifact(fs::path(out) / (name + ".json"));
    };
    TrainResult res = cotrain(ds, ck, ssl, hooks);
    write_metrics_csv(res.metrics, (fs::path(out) / "metrics.csv").string());
    mw.add_artifact(fs::path(out) / "metrics.csv");
    mw.finalize();
    std::printf("cotrain: %d steps, final loss %.6f (sup %.6f + w*cons)\n", ssl.base.steps,
                res.metrics.back().loss_total, res.metrics.back().loss_sup);
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::vector<std::string>& volumes,
              const std::string& catalog_path, const std::string& out, const std::string& tta,
              int window, double overlap, const std::string& thresholds,
              const std::string& which_model, bool no_normalize, bool force) {
    Checkpoint ck = load_checkpoint(ckpt);
    PickerModelF model = model_from_checkpoint(ck, which_model);
    ClassCatalog cat = read_catalog(catalog_path);
    if (cat.size() != ck.net.num_classes)
        throw std::runtime_error("catalog class count does not match the checkpoint");

    json resolved = {{"checkpoint", ckpt}, {"tta", tta},      {"window", window},
                     {"overlap", overlap}, {"model", which_model}, {"thresholds", thresholds}};
    ManifestWriter mw("infer", out, resolved, 0, force);

    InferOptions opts;
    opts.tta = tta == "off" ? TtaMode::Off : (tta == "full" ? TtaMode::Full : TtaMode::Axes);
    opts.overlap = overlap;
    if (window > 0) opts.window = {window, window, window};
    if (!thresholds.empty()) opts.thresholds = parse_thresholds(thresholds);
    opts.normalize = !no_normalize;

    for (const auto& vpath : volumes) {
        Tomogram tomo = read_volume(vpath);
        const auto t0 = std::chrono::steady_clock::now();
        auto dets = infer_volume(model, tomo, cat, opts);
        const auto t1 = std::chrono::steady_clock::now();
        const std::string id = fs::path(vpath).stem().string();
        const fs::path dest = fs::path(out) / (id + ".dets.jsonl");
        write_detections(dets, id, tomo.meta, cat, dest.string());
        mw.add_artifact(dest);
        std::printf("infer %s: %zu detections in %.2f s\n", id.c_str(), dets.size(),
                    std::chrono::duration<double>(t1 - t0).count());
    }
    mw.finalize();
    return 0;
}

int cmd_eval(const std::vector<std::string>& det_files, const std::vector<std::string>& truth_files,
             const std::vector<std::string>& volume_files, const std::string& catalog_path,
             const std::string& taus, bool sweep, const std::string& out, bool force) {
    if (det_files.size() != truth_files.size() || det_files.size() != volume_files.size())
        throw std::runtime_error("--detections, --truth and --volume must be given per volume");
    if (det_files.empty()) throw std::runtime_error("nothing to evaluate");
    ClassCatalog cat = read_catalog(catalog_path);

    std::vector<std::vector<Detection>> dets;
    std::vector<PickSet> truths;
    double spacing = 0.0;
    for (std::size_t i = 0; i < det_files.size(); ++i) {
        Tomogram vol = read_volume(volume_files[i]);
        spacing = vol.meta.voxel_spacing_angstrom;
        dets.push_back(read_detections(det_files[i], vol.meta, cat));
        truths.push_back(read_picks(truth_files[i], vol.meta, cat));
    }

    json resolved = {{"taus", taus}, {"sweep", sweep}};
    std::optional<ManifestWriter> mw;
    if (!out.empty()) mw.emplace("eval", out, resolved, 0, force);

    double prev_f1 = -1.0;
    for (double tau : parse_thresholds(taus.empty() ? "0.5,0.75" : taus)) {
        MatchConfig mcfg;
        mcfg.tau = tau;
        std::vector<MatchReport> reports;
        for (std::size_t v = 0; v < dets.size(); ++v)
            reports.push_back(match_detections(dets[v], truths[v], cat, spacing, mcfg));
        MatchReport merged = merge_reports(reports);
        std::cout << report_table(merged, cat);
        if (mw) {
            char name[64];
            std::snprintf(name, sizeof(name), "report_tau%.2f.csv", tau);
            report_csv(merged, cat, (fs::path(out) / name).string());
            mw->add_artifact(fs::path(out) / name);
        }
        prev_f1 = merged.macro_f1;
    }
    (void)prev_f1;

    if (sweep) {
        std::vector<double> grid;
        for (double t = 0.05; t < 0.96; t += 0.05) grid.push_back(t);
        MatchConfig mcfg;
        auto res = sweep_thresholds(dets, truths, cat, spacing, grid, mcfg);
        std::cout << "confidence sweep (tau=0.5):\n";
        for (const auto& pt : res.curve) {
            char line[64];
            std::snprintf(line, sizeof(line), "  thr %.2f  macro-F1 %.4f\n", pt.threshold,
                          pt.report.macro_f1);
            std::cout << line;
        }
        for (int c = 0; c < cat.size(); ++c) {
            char line[96];
            std::snprintf(line, sizeof(line), "  best[%s] thr %.2f F1 %.4f\n",
                          cat.spec(c).name.c_str(), res.best_threshold[static_cast<std::size_t>(c)],
                          res.best_f1[static_cast<std::size_t>(c)]);
            std::cout << line;
        }
    }
    if (mw) mw->finalize();
    return 0;
}

int cmd_bench(const std::string& sizes, int reps, std::uint64_t seed, const std::string& out,
              bool force) {
    std::vector<BenchSize> parsed;
    if (sizes.empty()) {
        parsed = {{6, 46, 160, 160, 800}, {6, 92, 325, 325, 8000}};
    } else {
        // format: CxDxHxW:blobs[,...]
        std::stringstream ss(sizes);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            BenchSize b{};
            if (std::sscanf(tok.c_str(), "%dx%dx%dx%d:%d", &b.channels, &b.d, &b.h, &b.w,
                            &b.blobs) != 5)
                throw std::runtime_error("bad --sizes entry (want CxDxHxW:blobs): " + tok);
            parsed.push_back(b);
        }
    }
    auto rows = bench_decode(parsed, reps, seed);
    std::cout << bench_table(rows);
    if (!out.empty()) {
        ManifestWriter mw("bench", out, {{"sizes", sizes}, {"reps", reps}}, seed, force);
        bench_csv(rows, (fs::path(out) / "bench.csv").string());
        mw.add_artifact(fs::path(out) / "bench.csv");
        mw.finalize();
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"heatmap-supervised 3D particle picking with teacher-student co-training"};
    app.require_subcommand(1);

    std::string config, data, out, init, ckpt, catalog_path, ablate, tta = "axes";
    std::string thresholds, taus, sizes, which_model = "teacher";
    std::vector<std::string> volumes, det_files, truth_files, volume_files;
    std::uint64_t seed = 0;
    int window = 0, reps = 5, threads = 1;
    double overlap = 0.25;
    bool force = false, sweep = false, no_normalize = false;

    app.add_option("--threads", threads, "worker cap (compute is single-threaded today)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--config", config)->required();
    synth->add_option("--out", out)->required();
    synth->add_option("--seed", seed);
    synth->add_flag("--force", force);

    auto* train = app.add_subcommand("train", "supervised burn-in training");
    train->add_option("--config", config)->required();
    train->add_option("--data", data)->required();
    train->add_option("--out", out)->required();
    train->add_option("--seed", seed);
    train->add_option("--init", init, "resume from a checkpoint");
    train->add_flag("--force", force);

    auto* cot = app.add_subcommand("cotrain", "teacher-student co-training");
    cot->add_option("--config", config)->required();
    cot->add_option("--data", data)->required();
    cot->add_option("--out", out)->required();
    cot->add_option("--init", init, "burn-in checkpoint (required)");
    cot->add_option("--seed", seed);
    cot->add_option("--ablate", ablate, "enabled features: mt | mt,mv | mt,mv,dropblock");
    cot->add_flag("--force", force);

    auto* infer = app.add_subcommand("infer", "sliding-window inference");
    infer->add_option("--checkpoint", ckpt)->required();
    infer->add_option("--volume", volumes)->required();
    infer->add_option("--catalog", catalog_path)->required();
    infer->add_option("--out", out)->required();
    infer->add_option("--tta", tta, "off | axes | full");
    infer->add_option("--window", window);
    infer->add_option("--overlap", overlap);
    infer->add_option("--thresholds", thresholds, "confidence threshold(s), comma separated");
    infer->add_option("--model", which_model, "teacher | student");
    infer->add_flag("--no-normalize", no_normalize);
    infer->add_flag("--force", force);

    auto* eval = app.add_subcommand("eval", "radius-threshold F1 evaluation");
    eval->add_option("--detections", det_files)->required();
    eval->add_option("--truth", truth_files)->required();
    eval->add_option("--volume", volume_files)->required();
    eval->add_option("--catalog", catalog_path)->required();
    eval->add_option("--tau", taus, "matching radius factors, default 0.5,0.75");
    eval->add_flag("--sweep", sweep, "scan confidence thresholds");
    eval->add_option("--out", out);
    eval->add_flag("--force", force);

    auto* bench = app.add_subcommand("bench", "decode efficiency benchmark");
    bench->add_option("--sizes", sizes, "CxDxHxW:blobs, comma separated");
    bench->add_option("--reps", reps);
    bench->add_option("--seed", seed);
    bench->add_option("--out", out);
    bench->add_flag("--force", force);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) return cmd_synth(config, out, seed, force);
        if (train->parsed()) return cmd_train(config, data, out, seed, init, force);
        if (cot->parsed()) return cmd_cotrain(config, data, out, seed, init, ablate, force);
        if (infer->parsed())
            return cmd_infer(ckpt, volumes, catalog_path, out, tta, window, overlap, thresholds,
                             which_model, no_normalize, force);
        if (eval->parsed())
            return cmd_eval(det_files, truth_files, volume_files, catalog_path, taus, sweep, out,
                            force);
        if (bench->parsed()) return cmd_bench(sizes, reps, seed, out, force);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace etpick
