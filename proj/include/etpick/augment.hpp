#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "etpick/heatmap.hpp"
#include "etpick/tensor.hpp"
#include "etpick/volume.hpp"

namespace etpick {

enum class Axis : int { Z = 0, Y = 1, X = 2 };

// Spatial flips on (C,D,H,W) tensors; channels untouched. Involutions.
TensorF flip_tensor(const TensorF& t, Axis axis);
Tomogram flip_volume(const Tomogram& tomo, Axis axis);
Heatmap flip_heatmap(const Heatmap& hm, Axis axis);

inline double flip_coord(double v, int dim) { return static_cast<double>(dim - 1) - v; }

// Occlusion mask: Bernoulli seeds dilated by a windowed max. Value 1 means
// the voxel is dropped. With stride > 1 the dilation runs on a decimated
// grid and is resampled back (nearest) to the full shape.
struct DropBlockParams {
    double rate = 0.0019;  // seed probability; ~5% dropped volume at k=3
    int kernel = 3;        // odd, >= 1
    int stride = 1;
    enum class Fill { Mean, Zero } fill = Fill::Mean;
};

std::vector<std::uint8_t> dropblock_seeds(const std::array<int, 3>& shape, double rate,
                                          std::uint64_t seed);
std::vector<std::uint8_t> dilate_mask(const std::vector<std::uint8_t>& seeds,
                                      const std::array<int, 3>& shape, int kernel, int stride);
std::vector<std::uint8_t> dropblock_mask(const std::array<int, 3>& shape,
                                         const DropBlockParams& params, std::uint64_t seed);

// Weak augmentation: per-axis flip probabilities (training-time labeled
// crops). Strong augmentation: intensity-only perturbations plus DropBlock,
// so pick geometry and pseudo-label alignment are preserved.
struct AugmentSpec {
    std::array<double, 3> flip_prob{0.5, 0.5, 0.5};
    std::array<double, 2> intensity_scale{1.0, 1.0};
    std::array<double, 2> intensity_shift{0.0, 0.0};
    std::array<double, 2> noise_sd{0.0, 0.0};
    std::array<double, 2> gamma{1.0, 1.0};
    DropBlockParams dropblock;
    bool dropblock_enabled = false;

    static AugmentSpec identity() {
        AugmentSpec s;
        s.flip_prob = {0.0, 0.0, 0.0};
        return s;
    }
};

// Applies scale/shift/noise/gamma sampled from the spec ranges, then
// DropBlock. Deterministic per (crop, spec, seed). Input is (1,D,H,W).
TensorF apply_strong(const TensorF& crop, const AugmentSpec& spec, std::uint64_t seed);

// The four weak views used for multi-view pseudo-labeling: identity plus one
// flip per axis. realign_heatmap applies the inverse transform of view i.
inline constexpr int kWeakViews = 4;
std::array<TensorF, kWeakViews> apply_weak_views(const TensorF& crop);
TensorF realign_view(const TensorF& hm_view, int view_index);

// Pairwise-tree mean over views (counts are powers of two). Identical views
// average to themselves bit-exactly.
TensorF average_views(std::vector<TensorF> views);

}  // namespace etpick
