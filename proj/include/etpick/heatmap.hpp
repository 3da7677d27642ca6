#pragma once

#include <cmath>
#include <stdexcept>

#include "etpick/catalog.hpp"
#include "etpick/picks.hpp"
#include "etpick/tape.hpp"
#include "etpick/tensor.hpp"
#include "etpick/volume.hpp"

namespace etpick {

// C-channel target/prediction volume at output stride R. Values live in
// [0,1]; channel order follows the catalog.
struct Heatmap {
    TensorF values;  // (C, D/R, H/R, W/R)
    int stride_r = 2;
    double spacing_angstrom = 10.0;

    int channels() const { return values.dim(0); }
};

struct LossConfig {
    double lambda = 4.0;
    double epsilon = 1e-6;
};

// Per-class Gaussian splat sigma in output-grid voxels: radius in voxels,
// divided by the output stride, halved.
inline double target_sigma(const ClassSpec& spec, double spacing, int R) {
    return spec.radius_angstrom / spacing / static_cast<double>(R) / 2.0;
}

inline std::array<int, 3> heatmap_dims(const VolumeMeta& meta, int R) {
    return {meta.dims[0] / R, meta.dims[1] / R, meta.dims[2] / R};
}

// Splats exp(-(dist^2)/(2 sigma_c^2)) around each quantized center
// floor(p/R); overlapping contributions combine by elementwise max, so the
// quantized-center voxel holds exactly 1. Kernels are truncated at 3 sigma.
Heatmap synthesize_targets(const PickSet& picks, const VolumeMeta& meta,
                           const ClassCatalog& catalog, int R);

// ---------------------------------------------------------------------------
// Reweighted MSE: foreground term normalized by sum(Y), background term
// weighted by lambda and normalized by sum(1-Y). Sums run over the whole
// (c,z,y,x) tensor. Templated so the 64-bit gradient checks share the code
// path with training.
// ---------------------------------------------------------------------------

template <typename T>
double reweighted_mse(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg) {
    if (!pred.same_shape(target)) throw std::invalid_argument("reweighted_mse: shape mismatch");
    double sum_y = 0.0, sum_ny = 0.0, pos = 0.0, neg = 0.0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        const double y = static_cast<double>(target[i]);
        const double d = static_cast<double>(pred[i]) - y;
        sum_y += y;
        sum_ny += 1.0 - y;
        pos += y * d * d;
        neg += (1.0 - y) * d * d;
    }
    return pos / (sum_y + cfg.epsilon) + cfg.lambda * neg / (sum_ny + cfg.epsilon);
}

template <typename T>
Tensor<T> reweighted_mse_grad(const Tensor<T>& pred, const Tensor<T>& target,
                              const LossConfig& cfg) {
    if (!pred.same_shape(target)) throw std::invalid_argument("reweighted_mse: shape mismatch");
    double sum_y = 0.0, sum_ny = 0.0;
    for (std::int64_t i = 0; i < target.numel(); ++i) {
        sum_y += static_cast<double>(target[i]);
        sum_ny += 1.0 - static_cast<double>(target[i]);
    }
    const double wp = 2.0 / (sum_y + cfg.epsilon);
    const double wn = 2.0 * cfg.lambda / (sum_ny + cfg.epsilon);
    Tensor<T> g(pred.shape);
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        const double y = static_cast<double>(target[i]);
        const double d = static_cast<double>(pred[i]) - y;
        g[i] = static_cast<T>(y * d * wp + (1.0 - y) * d * wn);
    }
    return g;
}

// Terminal loss node for the training tape.
template <typename T>
int reweighted_mse_node(nn::Graph<T>& g, int pred, Tensor<T> target, const LossConfig& cfg) {
    Tensor<T> loss({1});
    loss[0] = static_cast<T>(reweighted_mse(g.value(pred), target, cfg));
    const bool needs = g.needs_grad(pred);
    const int out = g.append(std::move(loss), needs);
    if (needs) {
        auto tgt = std::make_shared<Tensor<T>>(std::move(target));
        g.set_backward(out, [pred, tgt, cfg, out](nn::Graph<T>& gr) {
            const T go = gr.grad(out)[0];
            Tensor<T> dg = reweighted_mse_grad(gr.value(pred), *tgt, cfg);
            Tensor<T>& gp = gr.grad(pred);
            for (std::int64_t i = 0; i < gp.numel(); ++i) gp[i] += go * dg[i];
        });
    }
    return out;
}

}  // namespace etpick
