#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "etpick/augment.hpp"
#include "etpick/heatmap.hpp"
#include "etpick/io.hpp"
#include "etpick/picknet.hpp"

namespace etpick {

// Per-class NMS window: "half the typical particle radius" in output-grid
// voxels, forced odd and >= 3 (window reach = rounded half radius).
inline int nms_kernel_for(const ClassSpec& spec, double spacing, int R) {
    const double radius_out = spec.radius_angstrom / spacing / static_cast<double>(R);
    const int k = 2 * static_cast<int>(std::lround(radius_out / 2.0)) + 1;
    return std::max(3, k);
}

// Output-grid voxel -> input-volume coordinate. floor(p/R) quantization
// loses up to R-1 voxels; the half-stride offset minimizes expected error.
inline double decode_coord(int out_idx, int R) {
    return static_cast<double>(out_idx) * R + static_cast<double>(R) / 2.0;
}

// Max-pool NMS: a voxel is a detection iff it exceeds the class threshold,
// equals the windowed max, and is the lexicographically smallest coordinate
// among equal-valued voxels in its window. Detections are ordered by class,
// then (z,y,x).
std::vector<Detection> nms_decode(const Heatmap& hm, const ClassCatalog& catalog,
                                  const std::vector<double>& thresholds);

// Global-kernel variant (single window for every class).
std::vector<Detection> nms_decode_global(const Heatmap& hm, const ClassCatalog& catalog,
                                         const std::vector<double>& thresholds, int kernel);

// Baseline decoder: thresholds the heatmap, labels 26-connected components
// per class, and emits each component centroid with confidence = component
// max. Undersegments merged blobs; kept for the efficiency comparison.
std::vector<Detection> ccl_decode(const Heatmap& hm, const ClassCatalog& catalog,
                                  const std::vector<double>& thresholds);

// ---------------------------------------------------------------------------
// sliding-window inference
// ---------------------------------------------------------------------------

struct TilePlan {
    std::array<int, 3> window{0, 0, 0};
    double overlap = 0.25;
    std::array<std::vector<int>, 3> starts;  // per axis

    std::vector<std::array<int, 3>> tiles() const;
    // how many tiles cover a voxel on one axis
    int coverage(int axis, int pos) const;
};

// stride = floor(window*(1-overlap)); the last tile is clamped to
// dim-window. `align` forces starts onto multiples (the output stride) so
// tile heatmaps land on the volume output grid; 1 = input-voxel layout.
TilePlan plan_tiles(const VolumeMeta& meta, const std::array<int, 3>& window, double overlap,
                    int align = 1);

enum class TtaMode { Off, Axes, Full };  // 1, 4 (three single-axis flips), 8 views

struct InferOptions {
    TtaMode tta = TtaMode::Axes;
    double overlap = 0.25;
    std::array<int, 3> window{0, 0, 0};  // 0 = whole volume
    std::vector<double> thresholds;      // per class; empty = 0.5 each
    bool normalize = true;
};

// Stitched heatmap: per tile, average the TTA views realigned to the tile
// frame, then blend tiles by uniform per-voxel weights.
Heatmap infer_heatmap(const PickerModelF& model, const Tomogram& tomo,
                      const InferOptions& opts);
std::vector<Detection> infer_volume(const PickerModelF& model, const Tomogram& tomo,
                                    const ClassCatalog& catalog, const InferOptions& opts);

// ---------------------------------------------------------------------------
// decode efficiency benchmark
// ---------------------------------------------------------------------------

struct BenchSize {
    int channels, d, h, w;
    int blobs;  // random Gaussian blobs splatted into the fixture
};

struct BenchRow {
    BenchSize size;
    double nms_median_ms = 0.0;
    double ccl_median_ms = 0.0;
    std::size_t nms_detections = 0;
    std::size_t ccl_detections = 0;
    int reps = 0;
};

Heatmap make_bench_heatmap(const BenchSize& size, std::uint64_t seed);
BenchRow bench_decode_one(const BenchSize& size, int reps, std::uint64_t seed,
                          double threshold = 0.3);
std::vector<BenchRow> bench_decode(const std::vector<BenchSize>& sizes, int reps,
                                   std::uint64_t seed);
std::string bench_table(const std::vector<BenchRow>& rows);
void bench_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace etpick
