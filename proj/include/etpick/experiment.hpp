#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "etpick/decode.hpp"
#include "etpick/eval.hpp"
#include "etpick/train.hpp"

namespace etpick {

// Desk-scale semi-supervised benchmark: synthetic volumes at the six
// reference class radii, a small labeled set, a larger unlabeled pool and a
// held-out test set. Used by the ablation harness and the acceptance suite.
struct SSLBenchmarkSpec {
    int n_labeled = 2;
    int n_unlabeled = 16;
    int n_test = 8;
    std::array<int, 3> dims{64, 64, 64};
    double spacing_angstrom = 10.0;
    std::vector<int> counts{5, 5, 3, 2, 2, 2};  // densely packed, per volume
    double noise_sd = 0.4;
    double min_sep_fraction = 0.35;
    double amplitude = 1.0;

    NetConfig net = NetConfig::compact(6);
    int burnin_steps = 1200;
    int cotrain_steps = 300;
    double lr = 0.01;
    double unsup_weight = 1.0;
    double ema_alpha = 0.01;
    int crop = 32;
    double eval_threshold = 0.5;
};

struct SSLArmScores {
    double burnin = 0.0;     // supervised baseline (the burn-in checkpoint)
    double mt = 0.0;         // + mean teacher (single-view pseudo-labels)
    double mt_mv = 0.0;      // + multi-view pseudo-labeling
    double mt_mv_db = 0.0;   // + DropBlock strong augmentation
};

struct SSLBenchmarkResult {
    std::vector<std::uint64_t> seeds;
    std::vector<SSLArmScores> per_seed;  // macro-F1@0.5 on the test volumes
    SSLArmScores mean;
};

// Builds the synthetic dataset for one seed (labeled/unlabeled/test split).
struct SSLBenchmarkData {
    Dataset train;                   // labeled + unlabeled
    std::vector<Tomogram> test;      // raw (un-normalized) test volumes
    std::vector<PickSet> test_truth;
};
SSLBenchmarkData make_ssl_benchmark_data(const SSLBenchmarkSpec& spec, std::uint64_t seed);

// Teacher macro-F1@0.5 on the test volumes (single tile, TTA off so all
// arms share one protocol).
double evaluate_model(const PickerModelF& model, const std::vector<Tomogram>& test,
                      const std::vector<PickSet>& truth, const ClassCatalog& catalog,
                      double threshold);

// Runs burn-in plus the three co-training arms for each seed.
SSLBenchmarkResult run_ssl_benchmark(const SSLBenchmarkSpec& spec,
                                     const std::vector<std::uint64_t>& seeds,
                                     bool verbose = false);

}  // namespace etpick
