#include "etpick/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "etpick/rng.hpp"

namespace etpick {

TensorF flip_tensor(const TensorF& t, Axis axis) {
    if (t.ndim() != 4) throw std::invalid_argument("flip: tensor must be (C,D,H,W)");
    const int c = t.dim(0), d = t.dim(1), h = t.dim(2), w = t.dim(3);
    TensorF out(t.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int z = 0; z < d; ++z) {
            const int sz = axis == Axis::Z ? d - 1 - z : z;
            for (int y = 0; y < h; ++y) {
                const int sy = axis == Axis::Y ? h - 1 - y : y;
                const float* src = &t.data[static_cast<std::size_t>(t.idx4(ch, sz, sy, 0))];
                float* dst = &out.data[static_cast<std::size_t>(out.idx4(ch, z, y, 0))];
                if (axis == Axis::X) {
                    for (int x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
                } else {
                    for (int x = 0; x < w; ++x) dst[x] = src[x];
                }
            }
        }
    return out;
}

Tomogram flip_volume(const Tomogram& tomo, Axis axis) {
    TensorF t({1, tomo.meta.dims[0], tomo.meta.dims[1], tomo.meta.dims[2]});
    t.data = tomo.data;
    TensorF flipped = flip_tensor(t, axis);
    Tomogram out;
    out.meta = tomo.meta;
    out.data = std::move(flipped.data);
    return out;
}

Heatmap flip_heatmap(const Heatmap& hm, Axis axis) {
    Heatmap out = hm;
    out.values = flip_tensor(hm.values, axis);
    return out;
}

std::vector<std::uint8_t> dropblock_seeds(const std::array<int, 3>& shape, double rate,
                                          std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
    std::vector<std::uint8_t> seeds(n, 0);
    Rng rng = Rng::stream(seed, "dropblock");
    for (std::size_t i = 0; i < n; ++i) seeds[i] = rng.bernoulli(rate) ? 1 : 0;
    return seeds;
}

std::vector<std::uint8_t> dilate_mask(const std::vector<std::uint8_t>& seeds,
                                      const std::array<int, 3>& shape, int kernel, int stride) {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("dropblock kernel must be odd and >= 1");
    if (stride < 1) throw std::invalid_argument("dropblock stride must be >= 1");
    const int d = shape[0], h = shape[1], w = shape[2];
    const int reach = kernel / 2;
    auto at = [&](int z, int y, int x) -> std::uint8_t {
        return seeds[(static_cast<std::size_t>(z) * h + y) * w + x];
    };
    std::vector<std::uint8_t> mask(seeds.size(), 0);
    // windowed max over the seed grid, evaluated at stride positions and
    // broadcast back to full resolution when stride > 1
    for (int z = 0; z < d; z += stride) {
        for (int y = 0; y < h; y += stride) {
            for (int x = 0; x < w; x += stride) {
                std::uint8_t m = 0;
                for (int dz = -reach; dz <= reach && !m; ++dz) {
                    const int zz = z + dz;
                    if (zz < 0 || zz >= d) continue;
                    for (int dy = -reach; dy <= reach && !m; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= h) continue;
                        for (int dx = -reach; dx <= reach; ++dx) {
                            const int xx = x + dx;
                            if (xx < 0 || xx >= w) continue;
                            if (at(zz, yy, xx)) {
                                m = 1;
                                break;
                            }
                        }
                    }
                }
                // broadcast the strided cell
                for (int bz = z; bz < std::min(d, z + stride); ++bz)
                    for (int by = y; by < std::min(h, y + stride); ++by)
                        for (int bx = x; bx < std::min(w, x + stride); ++bx)
                            mask[(static_cast<std::size_t>(bz) * h + by) * w + bx] = m;
            }
        }
    }
    return mask;
}

std::vector<std::uint8_t> dropblock_mask(const std::array<int, 3>& shape,
                                         const DropBlockParams& params, std::uint64_t seed) {
    if (params.rate < 0.0 || params.rate > 1.0)
        throw std::invalid_argument("dropblock rate must be in [0,1]");
    if (params.rate == 0.0)
        return std::vector<std::uint8_t>(
            static_cast<std::size_t>(shape[0]) * shape[1] * shape[2], 0);
    return dilate_mask(dropblock_seeds(shape, params.rate, seed), shape, params.kernel,
                       params.stride);
}

TensorF apply_strong(const TensorF& crop, const AugmentSpec& spec, std::uint64_t seed) {
    if (crop.ndim() != 4) throw std::invalid_argument("apply_strong: crop must be (C,D,H,W)");
    TensorF out = crop;
    Rng rng = Rng::stream(seed, "strong");

    const float scale = static_cast<float>(rng.uniform(spec.intensity_scale[0], spec.intensity_scale[1]));
    const float shift = static_cast<float>(rng.uniform(spec.intensity_shift[0], spec.intensity_shift[1]));
    const float nsd = static_cast<float>(rng.uniform(spec.noise_sd[0], spec.noise_sd[1]));
    const float gamma = static_cast<float>(rng.uniform(spec.gamma[0], spec.gamma[1]));

    for (auto& v : out.data) v = v * scale + shift;
    if (nsd > 0.0f)
        for (auto& v : out.data) v += nsd * static_cast<float>(rng.normal());
    if (gamma != 1.0f)  // sign-preserving power keeps z-scored data sane
        for (auto& v : out.data)
            v = v >= 0.0f ? std::pow(v, gamma) : -std::pow(-v, gamma);

    if (spec.dropblock_enabled && spec.dropblock.rate > 0.0) {
        const std::array<int, 3> shape{out.dim(1), out.dim(2), out.dim(3)};
        const auto mask = dropblock_mask(shape, spec.dropblock, rng.next_u64());
        float fill = 0.0f;
        if (spec.dropblock.fill == DropBlockParams::Fill::Mean) {
            double sum = 0.0;
            for (float v : out.data) sum += v;
            fill = static_cast<float>(sum / static_cast<double>(out.data.size()));
        }
        const std::int64_t spatial = static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2];
        for (int c = 0; c < out.dim(0); ++c)
            for (std::int64_t i = 0; i < spatial; ++i)
                if (mask[static_cast<std::size_t>(i)])
                    out[c * spatial + i] = fill;
    }
    return out;
}

std::array<TensorF, kWeakViews> apply_weak_views(const TensorF& crop) {
    return {crop, flip_tensor(crop, Axis::Z), flip_tensor(crop, Axis::Y),
            flip_tensor(crop, Axis::X)};
}

TensorF realign_view(const TensorF& hm_view, int view_index) {
    switch (view_index) {
        case 0: return hm_view;
        case 1: return flip_tensor(hm_view, Axis::Z);
        case 2: return flip_tensor(hm_view, Axis::Y);
        case 3: return flip_tensor(hm_view, Axis::X);
        default: throw std::invalid_argument("view index must be 0..3");
    }
}

TensorF average_views(std::vector<TensorF> views) {
    if (views.empty()) throw std::invalid_argument("average_views: no views");
    while (views.size() > 1) {
        std::vector<TensorF> next;
        for (std::size_t i = 0; i + 1 < views.size(); i += 2) {
            TensorF m = std::move(views[i]);
            const TensorF& b = views[i + 1];
            if (!m.same_shape(b)) throw std::invalid_argument("average_views: shape mismatch");
            for (std::int64_t j = 0; j < m.numel(); ++j) m[j] = (m[j] + b[j]) * 0.5f;
            next.push_back(std::move(m));
        }
        if (views.size() % 2 == 1) next.push_back(std::move(views.back()));
        views = std::move(next);
    }
    return std::move(views[0]);
}

}  // namespace etpick
