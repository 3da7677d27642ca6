#include "etpick/decode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "etpick/rng.hpp"

namespace etpick {

namespace {

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

// van Herk / Gil-Werman running max, padded so every window is a full k
// elements and blocks align to the padded origin: the two-sided
// prefix/suffix identity is then exact. Scratch buffers persist across
// channels; pad regions are written once (-inf) and only data rows are
// refreshed per pass.
struct DilateScratch {
    std::vector<float> x_line, x_pre, x_suf;
    std::vector<float> y_lines, y_pre, y_suf;
    std::vector<float> z_planes, z_pre, z_suf;
};

// block prefix/suffix max over contiguous "rows" of width `w` stacked along
// the filtered axis; n_padded is a multiple of k
inline void block_prefix_rows(const float* src, float* dst, int n_padded, int k, std::int64_t w) {
    for (int bs = 0; bs < n_padded; bs += k) {
        const float* s0 = src + static_cast<std::int64_t>(bs) * w;
        float* d0 = dst + static_cast<std::int64_t>(bs) * w;
        std::memcpy(d0, s0, sizeof(float) * static_cast<std::size_t>(w));
        for (int i = 1; i < k; ++i) {
            const float* si = s0 + static_cast<std::int64_t>(i) * w;
            const float* dp = d0 + static_cast<std::int64_t>(i - 1) * w;
            float* di = d0 + static_cast<std::int64_t>(i) * w;
            for (std::int64_t j = 0; j < w; ++j) di[j] = std::max(dp[j], si[j]);
        }
    }
}

inline void block_suffix_rows(const float* src, float* dst, int n_padded, int k, std::int64_t w) {
    for (int bs = 0; bs < n_padded; bs += k) {
        const float* s0 = src + static_cast<std::int64_t>(bs) * w;
        float* d0 = dst + static_cast<std::int64_t>(bs) * w;
        std::memcpy(d0 + static_cast<std::int64_t>(k - 1) * w, s0 + static_cast<std::int64_t>(k - 1) * w,
                    sizeof(float) * static_cast<std::size_t>(w));
        for (int i = k - 2; i >= 0; --i) {
            const float* si = s0 + static_cast<std::int64_t>(i) * w;
            const float* dn = d0 + static_cast<std::int64_t>(i + 1) * w;
            float* di = d0 + static_cast<std::int64_t>(i) * w;
            for (std::int64_t j = 0; j < w; ++j) di[j] = std::max(dn[j], si[j]);
        }
    }
}

inline int padded_len(int n, int k) {
    const int r = k / 2;
    return ((n + 2 * r + k - 1) / k) * k;
}

// Cubic dilation (windowed max, stride 1, shape preserving) of one channel.
void dilate_channel(const float* src, int d, int h, int w, int k, float* dst,
                    DilateScratch& scratch) {
    const int r = k / 2;
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    // ---- x axis (contiguous rows, scalar block recurrences)
    {
        const int padded = padded_len(w, k);
        scratch.x_line.assign(static_cast<std::size_t>(padded), kNegInf);
        scratch.x_pre.resize(static_cast<std::size_t>(padded));
        scratch.x_suf.resize(static_cast<std::size_t>(padded));
        float* __restrict__ line = scratch.x_line.data();
        float* __restrict__ pre = scratch.x_pre.data();
        float* __restrict__ suf = scratch.x_suf.data();
        for (std::int64_t row = 0; row < static_cast<std::int64_t>(d) * h; ++row) {
            std::memcpy(line + r, src + row * w, sizeof(float) * static_cast<std::size_t>(w));
            for (int bs = 0; bs < padded; bs += k) {
                float run = line[bs];
                pre[bs] = run;
                for (int i = 1; i < k; ++i) {
                    run = std::max(run, line[bs + i]);
                    pre[bs + i] = run;
                }
                run = line[bs + k - 1];
                suf[bs + k - 1] = run;
                for (int i = k - 2; i >= 0; --i) {
                    run = std::max(run, line[bs + i]);
                    suf[bs + i] = run;
                }
            }
            float* out = dst + row * w;
            for (int i = 0; i < w; ++i) out[i] = std::max(suf[i], pre[i + 2 * r]);
        }
    }

    // ---- y axis, vectorized over x within each z plane
    {
        const int padded = padded_len(h, k);
        scratch.y_lines.resize(static_cast<std::size_t>(padded) * w);
        scratch.y_pre.resize(static_cast<std::size_t>(padded) * w);
        scratch.y_suf.resize(static_cast<std::size_t>(padded) * w);
        std::fill_n(scratch.y_lines.begin(), static_cast<std::size_t>(r) * w, kNegInf);
        std::fill(scratch.y_lines.begin() + static_cast<std::int64_t>(h + r) * w,
                  scratch.y_lines.end(), kNegInf);
        for (int z = 0; z < d; ++z) {
            float* base = dst + static_cast<std::int64_t>(z) * plane;
            for (int y = 0; y < h; ++y)
                std::memcpy(&scratch.y_lines[static_cast<std::size_t>(y + r) * w],
                            base + static_cast<std::int64_t>(y) * w,
                            sizeof(float) * static_cast<std::size_t>(w));
            block_prefix_rows(scratch.y_lines.data(), scratch.y_pre.data(), padded, k, w);
            block_suffix_rows(scratch.y_lines.data(), scratch.y_suf.data(), padded, k, w);
            for (int y = 0; y < h; ++y) {
                const float* a = &scratch.y_suf[static_cast<std::size_t>(y) * w];
                const float* b = &scratch.y_pre[static_cast<std::size_t>(y + 2 * r) * w];
                float* o = base + static_cast<std::int64_t>(y) * w;
                for (int x = 0; x < w; ++x) o[x] = std::max(a[x], b[x]);
            }
        }
    }

    // ---- z axis, tiled over xy chunks so the block buffers stay in cache
    {
        const int padded = padded_len(d, k);
        const std::int64_t chunk = 4096;
        scratch.z_planes.resize(static_cast<std::size_t>(padded) * chunk);
        scratch.z_pre.resize(static_cast<std::size_t>(padded) * chunk);
        scratch.z_suf.resize(static_cast<std::size_t>(padded) * chunk);
        for (std::int64_t c0 = 0; c0 < plane; c0 += chunk) {
            const std::int64_t c = std::min(chunk, plane - c0);
            std::fill_n(scratch.z_planes.begin(), static_cast<std::size_t>(r) * c, kNegInf);
            std::fill(scratch.z_planes.begin() + static_cast<std::int64_t>(d + r) * c,
                      scratch.z_planes.begin() + static_cast<std::int64_t>(padded) * c, kNegInf);
            for (int z = 0; z < d; ++z)
                std::memcpy(&scratch.z_planes[static_cast<std::size_t>((z + r) * c)],
                            dst + static_cast<std::int64_t>(z) * plane + c0,
                            sizeof(float) * static_cast<std::size_t>(c));
            block_prefix_rows(scratch.z_planes.data(), scratch.z_pre.data(), padded, k, c);
            block_suffix_rows(scratch.z_planes.data(), scratch.z_suf.data(), padded, k, c);
            for (int z = 0; z < d; ++z) {
                const float* a = &scratch.z_suf[static_cast<std::size_t>(z) * c];
                const float* b = &scratch.z_pre[static_cast<std::size_t>((z + 2 * r) * c)];
                float* o = dst + static_cast<std::int64_t>(z) * plane + c0;
                for (std::int64_t j = 0; j < c; ++j) o[j] = std::max(a[j], b[j]);
            }
        }
    }
}

std::vector<double> resolve_thresholds(const std::vector<double>& thresholds, int C) {
    if (thresholds.empty()) return std::vector<double>(static_cast<std::size_t>(C), 0.5);
    if (thresholds.size() == 1) return std::vector<double>(static_cast<std::size_t>(C), thresholds[0]);
    if (static_cast<int>(thresholds.size()) != C)
        throw std::invalid_argument("thresholds must have one entry or one per class");
    return thresholds;
}

// exact window re-scan for candidates: reject when an equal value sits at a
// lexicographically smaller coordinate (plateau tie-break)
bool wins_tiebreak(const float* ch, int d, int h, int w, int z, int y, int x, int k, float v) {
    const int r = k / 2;
    for (int zz = std::max(0, z - r); zz <= std::min(d - 1, z + r); ++zz)
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
            const float* row = ch + (static_cast<std::int64_t>(zz) * h + yy) * w;
            for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                if (row[xx] != v) continue;
                if (zz < z || (zz == z && (yy < y || (yy == y && xx < x)))) return false;
            }
        }
    return true;
}

void nms_channel(const float* ch, int d, int h, int w, int k, double threshold, int cid, int R,
                 std::vector<Detection>& out, DilateScratch& scratch,
                 std::vector<float>& dil) {
    dil.resize(static_cast<std::size_t>(d) * h * w);
    dilate_channel(ch, d, h, w, k, dil.data(), scratch);
    const float thr = static_cast<float>(threshold);
    std::int64_t i = 0;
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x, ++i) {
                const float v = ch[i];
                if (v > thr && v == dil[static_cast<std::size_t>(i)] &&
                    wins_tiebreak(ch, d, h, w, z, y, x, k, v))
                    out.push_back(Detection{cid, decode_coord(z, R), decode_coord(y, R),
                                            decode_coord(x, R), static_cast<double>(v)});
            }
}

}  // namespace

std::vector<Detection> nms_decode(const Heatmap& hm, const ClassCatalog& catalog,
                                  const std::vector<double>& thresholds) {
    catalog.validate();
    const int C = hm.channels();
    if (C != catalog.size()) throw std::invalid_argument("heatmap channels != catalog size");
    const auto thr = resolve_thresholds(thresholds, C);
    const int d = hm.values.dim(1), h = hm.values.dim(2), w = hm.values.dim(3);
    std::vector<Detection> out;
    DilateScratch scratch;
    std::vector<float> dil;
    for (int c = 0; c < C; ++c) {
        const int k = nms_kernel_for(catalog.spec(c), hm.spacing_angstrom, hm.stride_r);
        nms_channel(&hm.values.data[static_cast<std::size_t>(hm.values.idx4(c, 0, 0, 0))], d, h,
                    w, k, thr[static_cast<std::size_t>(c)], c, hm.stride_r, out, scratch, dil);
    }
    return out;
}

std::vector<Detection> nms_decode_global(const Heatmap& hm, const ClassCatalog& catalog,
                                         const std::vector<double>& thresholds, int kernel) {
    catalog.validate();
    const int C = hm.channels();
    const auto thr = resolve_thresholds(thresholds, C);
    const int d = hm.values.dim(1), h = hm.values.dim(2), w = hm.values.dim(3);
    std::vector<Detection> out;
    DilateScratch scratch;
    std::vector<float> dil;
    for (int c = 0; c < C; ++c)
        nms_channel(&hm.values.data[static_cast<std::size_t>(hm.values.idx4(c, 0, 0, 0))], d, h,
                    w, kernel, thr[static_cast<std::size_t>(c)], c, hm.stride_r, out, scratch, dil);
    return out;
}

std::vector<Detection> ccl_decode(const Heatmap& hm, const ClassCatalog& catalog,
                                  const std::vector<double>& thresholds) {
    catalog.validate();
    const int C = hm.channels();
    if (C != catalog.size()) throw std::invalid_argument("heatmap channels != catalog size");
    const auto thr = resolve_thresholds(thresholds, C);
    const int d = hm.values.dim(1), h = hm.values.dim(2), w = hm.values.dim(3);
    const std::int64_t n = static_cast<std::int64_t>(d) * h * w;
    const int R = hm.stride_r;

    std::vector<Detection> out;
    std::vector<std::uint8_t> visited(static_cast<std::size_t>(n));
    std::vector<std::int32_t> stack;
    for (int c = 0; c < C; ++c) {
        const float* ch = &hm.values.data[static_cast<std::size_t>(hm.values.idx4(c, 0, 0, 0))];
        const float t = static_cast<float>(thr[static_cast<std::size_t>(c)]);
        std::fill(visited.begin(), visited.end(), 0);
        std::int64_t i = 0;
        for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x, ++i) {
                    if (visited[static_cast<std::size_t>(i)] || ch[i] <= t) continue;
                    // flood fill one 26-connected component
                    double sz = 0.0, sy = 0.0, sx = 0.0;
                    double cmax = ch[i];
                    std::int64_t count = 0;
                    stack.clear();
                    stack.push_back(static_cast<std::int32_t>(i));
                    visited[static_cast<std::size_t>(i)] = 1;
                    while (!stack.empty()) {
                        const std::int32_t cur = stack.back();
                        stack.pop_back();
                        const int cz = static_cast<int>(cur / (h * w));
                        const int rem = static_cast<int>(cur % (h * w));
                        const int cy = rem / w;
                        const int cx = rem % w;
                        sz += cz;
                        sy += cy;
                        sx += cx;
                        cmax = std::max(cmax, static_cast<double>(ch[cur]));
                        ++count;
                        for (int dz = -1; dz <= 1; ++dz) {
                            const int zz = cz + dz;
                            if (zz < 0 || zz >= d) continue;
                            for (int dy = -1; dy <= 1; ++dy) {
                                const int yy = cy + dy;
                                if (yy < 0 || yy >= h) continue;
                                for (int dx = -1; dx <= 1; ++dx) {
                                    const int xx = cx + dx;
                                    if (xx < 0 || xx >= w) continue;
                                    const std::int64_t ni =
                                        (static_cast<std::int64_t>(zz) * h + yy) * w + xx;
                                    if (visited[static_cast<std::size_t>(ni)] || ch[ni] <= t) continue;
                                    visited[static_cast<std::size_t>(ni)] = 1;
                                    stack.push_back(static_cast<std::int32_t>(ni));
                                }
                            }
                        }
                    }
                    const double inv = 1.0 / static_cast<double>(count);
                    out.push_back(Detection{
                        c, decode_coord(0, R) + sz * inv * R, decode_coord(0, R) + sy * inv * R,
                        decode_coord(0, R) + sx * inv * R, cmax});
                }
    }
    return out;
}

// ---------------------------------------------------------------------------
// tiling
// ---------------------------------------------------------------------------

std::vector<std::array<int, 3>> TilePlan::tiles() const {
    std::vector<std::array<int, 3>> out;
    for (int z : starts[0])
        for (int y : starts[1])
            for (int x : starts[2]) out.push_back({z, y, x});
    return out;
}

int TilePlan::coverage(int axis, int pos) const {
    int n = 0;
    for (int s : starts[static_cast<std::size_t>(axis)])
        if (pos >= s && pos < s + window[static_cast<std::size_t>(axis)]) ++n;
    return n;
}

TilePlan plan_tiles(const VolumeMeta& meta, const std::array<int, 3>& window, double overlap,
                    int align) {
    if (overlap < 0.0 || overlap >= 1.0)
        throw std::invalid_argument("overlap must be in [0,1)");
    if (align < 1) throw std::invalid_argument("align must be >= 1");
    TilePlan plan;
    plan.window = window;
    plan.overlap = overlap;
    for (int a = 0; a < 3; ++a) {
        const int dim = meta.dims[static_cast<std::size_t>(a)];
        const int win = window[static_cast<std::size_t>(a)];
        if (win > dim)
            throw std::invalid_argument("window larger than volume on axis " + std::to_string(a));
        if (win % align != 0)
            throw std::invalid_argument("window must be a multiple of the alignment");
        int stride = static_cast<int>(std::floor(win * (1.0 - overlap)));
        stride = std::max(1, stride);
        stride -= stride % align;
        stride = std::max(align, stride);
        const int last = ((dim - win) / align) * align;  // clamp, aligned down
        auto& starts = plan.starts[static_cast<std::size_t>(a)];
        for (int s = 0; s < last; s += stride) starts.push_back(s);
        starts.push_back(last);
        starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
    }
    return plan;
}

// ---------------------------------------------------------------------------
// inference with flip TTA
// ---------------------------------------------------------------------------

namespace {

TensorF extract_crop(const Tomogram& tomo, const std::array<int, 3>& start,
                     const std::array<int, 3>& size) {
    TensorF crop({1, size[0], size[1], size[2]});
    for (int z = 0; z < size[0]; ++z)
        for (int y = 0; y < size[1]; ++y) {
            const float* src = &tomo.data[static_cast<std::size_t>(
                tomo.index(start[0] + z, start[1] + y, start[2]))];
            float* dst = &crop.data[static_cast<std::size_t>(crop.idx4(0, z, y, 0))];
            std::memcpy(dst, src, sizeof(float) * static_cast<std::size_t>(size[2]));
        }
    return crop;
}

// flip sets per TTA mode; each entry lists the axes flipped for that view
std::vector<std::vector<Axis>> tta_views(TtaMode mode) {
    switch (mode) {
        case TtaMode::Off:
            return {{}};
        case TtaMode::Axes:
            return {{}, {Axis::Z}, {Axis::Y}, {Axis::X}};
        case TtaMode::Full:
            return {{},
                    {Axis::Z},
                    {Axis::Y},
                    {Axis::X},
                    {Axis::Z, Axis::Y},
                    {Axis::Z, Axis::X},
                    {Axis::Y, Axis::X},
                    {Axis::Z, Axis::Y, Axis::X}};
    }
    return {{}};
}

}  // namespace

Heatmap infer_heatmap(const PickerModelF& model, const Tomogram& tomo,
                      const InferOptions& opts) {
    const int R = model.config.output_stride;
    Tomogram prepared;
    const Tomogram* vol = &tomo;
    if (opts.normalize) {
        prepared = tomo;
        normalize_volume(prepared);
        vol = &prepared;
    }

    std::array<int, 3> window = opts.window;
    for (int a = 0; a < 3; ++a)
        if (window[static_cast<std::size_t>(a)] <= 0)
            window[static_cast<std::size_t>(a)] = tomo.meta.dims[static_cast<std::size_t>(a)];
    for (int a = 0; a < 3; ++a)
        if (window[static_cast<std::size_t>(a)] % NetConfig::kDeepestStride != 0)
            throw std::invalid_argument("inference window must be divisible by 16");

    const TilePlan plan = plan_tiles(tomo.meta, window, opts.overlap, R);
    const auto views = tta_views(opts.tta);

    const auto hd = heatmap_dims(tomo.meta, R);
    Heatmap stitched;
    stitched.stride_r = R;
    stitched.spacing_angstrom = tomo.meta.voxel_spacing_angstrom;
    stitched.values = TensorF({model.config.num_classes, hd[0], hd[1], hd[2]});

    for (const auto& tile : plan.tiles()) {
        TensorF crop = extract_crop(*vol, tile, window);
        std::vector<TensorF> preds;
        preds.reserve(views.size());
        for (const auto& axes : views) {
            TensorF in = crop;
            for (Axis a : axes) in = flip_tensor(in, a);
            TensorF out = PickNetF::predict(model, std::move(in));
            for (auto it = axes.rbegin(); it != axes.rend(); ++it)
                out = flip_tensor(out, *it);
            preds.push_back(std::move(out));
        }
        TensorF avg = average_views(std::move(preds));

        // place the tile output on the volume output grid
        const std::array<int, 3> o{tile[0] / R, tile[1] / R, tile[2] / R};
        const int tzd = avg.dim(1), tyd = avg.dim(2), txd = avg.dim(3);
        for (int c = 0; c < avg.dim(0); ++c)
            for (int z = 0; z < tzd; ++z)
                for (int y = 0; y < tyd; ++y) {
                    const float* src = &avg.data[static_cast<std::size_t>(avg.idx4(c, z, y, 0))];
                    float* dst = &stitched.values.data[static_cast<std::size_t>(
                        stitched.values.idx4(c, o[0] + z, o[1] + y, o[2]))];
                    for (int x = 0; x < txd; ++x) dst[x] += src[x];
                }
    }

    // uniform blend: divide by per-voxel coverage counts (product over axes)
    std::vector<float> invz(static_cast<std::size_t>(hd[0])), invy(static_cast<std::size_t>(hd[1])),
        invx(static_cast<std::size_t>(hd[2]));
    for (int z = 0; z < hd[0]; ++z) invz[static_cast<std::size_t>(z)] = 1.0f / static_cast<float>(plan.coverage(0, z * R));
    for (int y = 0; y < hd[1]; ++y) invy[static_cast<std::size_t>(y)] = 1.0f / static_cast<float>(plan.coverage(1, y * R));
    for (int x = 0; x < hd[2]; ++x) invx[static_cast<std::size_t>(x)] = 1.0f / static_cast<float>(plan.coverage(2, x * R));
    for (int c = 0; c < stitched.values.dim(0); ++c)
        for (int z = 0; z < hd[0]; ++z)
            for (int y = 0; y < hd[1]; ++y) {
                float* row = &stitched.values.data[static_cast<std::size_t>(
                    stitched.values.idx4(c, z, y, 0))];
                const float f = invz[static_cast<std::size_t>(z)] * invy[static_cast<std::size_t>(y)];
                for (int x = 0; x < hd[2]; ++x) row[x] *= f * invx[static_cast<std::size_t>(x)];
            }
    return stitched;
}

std::vector<Detection> infer_volume(const PickerModelF& model, const Tomogram& tomo,
                                    const ClassCatalog& catalog, const InferOptions& opts) {
    Heatmap hm = infer_heatmap(model, tomo, opts);
    return nms_decode(hm, catalog, opts.thresholds);
}

// ---------------------------------------------------------------------------
// decode efficiency benchmark
// ---------------------------------------------------------------------------

namespace {

// max-combined Gaussian splat with arbitrary sigma/peak (bench fixtures)
void splat_blob(TensorF& t, int c, double cz, double cy, double cx, double sigma, double peak) {
    const int d = t.dim(1), h = t.dim(2), w = t.dim(3);
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const int z0 = std::max(0, static_cast<int>(cz) - reach);
    const int z1 = std::min(d - 1, static_cast<int>(cz) + reach);
    const int y0 = std::max(0, static_cast<int>(cy) - reach);
    const int y1 = std::min(h - 1, static_cast<int>(cy) + reach);
    const int x0 = std::max(0, static_cast<int>(cx) - reach);
    const int x1 = std::min(w - 1, static_cast<int>(cx) + reach);
    for (int z = z0; z <= z1; ++z) {
        const double dz2 = (z - cz) * (z - cz);
        for (int y = y0; y <= y1; ++y) {
            const double dy2 = (y - cy) * (y - cy);
            float* row = &t.data[static_cast<std::size_t>(t.idx4(c, z, y, 0))];
            for (int x = x0; x <= x1; ++x) {
                const double r2 = dz2 + dy2 + (x - cx) * (x - cx);
                const float v = static_cast<float>(peak * std::exp(-r2 * inv2s2));
                row[x] = std::max(row[x], v);
            }
        }
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Heatmap make_bench_heatmap(const BenchSize& size, std::uint64_t seed) {
    Heatmap hm;
    hm.stride_r = 2;
    hm.spacing_angstrom = 10.0;
    hm.values = TensorF({size.channels, size.d, size.h, size.w});
    Rng rng = Rng::stream(seed, "bench.blobs");
    for (int b = 0; b < size.blobs; ++b) {
        const int c = static_cast<int>(rng.uniform_int(0, size.channels - 1));
        const double cz = rng.uniform(2.0, size.d - 3.0);
        const double cy = rng.uniform(2.0, size.h - 3.0);
        const double cx = rng.uniform(2.0, size.w - 3.0);
        const double sigma = rng.uniform(4.0, 9.0);
        const double peak = rng.uniform(0.55, 1.0);
        splat_blob(hm.values, c, cz, cy, cx, sigma, peak);
    }
    return hm;
}

BenchRow bench_decode_one(const BenchSize& size, int reps, std::uint64_t seed, double threshold) {
    if (reps < 1) throw std::invalid_argument("reps must be >= 1");
    Heatmap hm = make_bench_heatmap(size, seed);
    ClassCatalog cat = ClassCatalog::default_czii();
    while (cat.size() > size.channels) cat.classes.pop_back();
    while (cat.size() < size.channels) {
        ClassSpec s;
        s.class_id = cat.size();
        s.name = "extra-" + std::to_string(cat.size());
        s.radius_angstrom = 100.0;
        cat.classes.push_back(s);
    }
    const std::vector<double> thr{threshold};

    BenchRow row;
    row.size = size;
    row.reps = reps;
    std::vector<double> nms_ms, ccl_ms;
    using clock = std::chrono::steady_clock;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        auto dn = nms_decode(hm, cat, thr);
        const auto t1 = clock::now();
        auto dc = ccl_decode(hm, cat, thr);
        const auto t2 = clock::now();
        nms_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        ccl_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        row.nms_detections = dn.size();
        row.ccl_detections = dc.size();
    }
    row.nms_median_ms = median(nms_ms);
    row.ccl_median_ms = median(ccl_ms);
    return row;
}

std::vector<BenchRow> bench_decode(const std::vector<BenchSize>& sizes, int reps,
                                   std::uint64_t seed) {
    std::vector<BenchRow> rows;
    for (const auto& s : sizes) rows.push_back(bench_decode_one(s, reps, seed));
    return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "decoder      size                 blobs   median_ms   detections\n";
    for (const auto& r : rows) {
        char size_buf[64];
        std::snprintf(size_buf, sizeof(size_buf), "%dx%dx%dx%d", r.size.channels, r.size.d,
                      r.size.h, r.size.w);
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %-20s %-7d %-11.2f %zu\n", "nms", size_buf,
                      r.size.blobs, r.nms_median_ms, r.nms_detections);
        os << line;
        std::snprintf(line, sizeof(line), "%-12s %-20s %-7d %-11.2f %zu\n", "ccl", size_buf,
                      r.size.blobs, r.ccl_median_ms, r.ccl_detections);
        os << line;
    }
    return os.str();
}

void bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << "channels,d,h,w,blobs,reps,nms_median_ms,ccl_median_ms,nms_detections,ccl_detections\n";
    for (const auto& r : rows)
        f << r.size.channels << "," << r.size.d << "," << r.size.h << "," << r.size.w << ","
          << r.size.blobs << "," << r.reps << "," << r.nms_median_ms << "," << r.ccl_median_ms
          << "," << r.nms_detections << "," << r.ccl_detections << "\n";
}

}  // namespace etpick
