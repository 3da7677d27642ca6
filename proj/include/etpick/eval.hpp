#pragma once

#include <string>
#include <vector>

#include "etpick/catalog.hpp"
#include "etpick/io.hpp"
#include "etpick/picks.hpp"

namespace etpick {

struct MatchConfig {
    double tau = 0.5;         // match cutoff = tau * class radius (voxels)
    bool class_aware = true;  // a pred never matches a truth of another class
};

struct ClassCounts {
    int tp = 0, fp = 0, fn = 0;
    bool absent = false;  // no truths and no preds; excluded from macro-F1
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MatchReport {
    double tau = 0.5;
    std::vector<ClassCounts> per_class;
    double macro_f1 = 0.0;  // unweighted over non-absent classes
    double micro_f1 = 0.0;  // from pooled counts
};

// Greedy one-to-one matching by ascending distance (ties by pred then truth
// index), per class, with cutoff tau * radius in input voxels.
MatchReport match_detections(const std::vector<Detection>& preds, const PickSet& truth,
                             const ClassCatalog& catalog, double spacing_angstrom,
                             const MatchConfig& cfg);

// Pools per-class counts across volumes and recomputes the scores.
MatchReport merge_reports(const std::vector<MatchReport>& reports);

// Recomputes precision/recall/F1 (and the aggregates) from raw counts.
void finalize_scores(MatchReport& rep);

// F1 of a prediction list filtered at each confidence threshold in `grid`
// (thresholds are applied as confidence > t, matching the decoder).
struct SweepPoint {
    double threshold = 0.0;
    MatchReport report;
};
struct SweepResult {
    std::vector<SweepPoint> curve;
    std::vector<double> best_threshold;  // per class, argmax F1, ties -> lowest
    std::vector<double> best_f1;
};
SweepResult sweep_thresholds(const std::vector<std::vector<Detection>>& preds_per_volume,
                             const std::vector<PickSet>& truths, const ClassCatalog& catalog,
                             double spacing_angstrom, const std::vector<double>& grid,
                             const MatchConfig& cfg);

std::string report_table(const MatchReport& rep, const ClassCatalog& catalog);
void report_csv(const MatchReport& rep, const ClassCatalog& catalog, const std::string& path);

}  // namespace etpick
