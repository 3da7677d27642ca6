#include "etpick/heatmap.hpp"

#include <algorithm>
#include <cmath>

namespace etpick {

Heatmap synthesize_targets(const PickSet& picks, const VolumeMeta& meta,
                           const ClassCatalog& catalog, int R) {
    catalog.validate();
    const auto hd = heatmap_dims(meta, R);
    Heatmap hm;
    hm.stride_r = R;
    hm.spacing_angstrom = meta.voxel_spacing_angstrom;
    hm.values = TensorF({catalog.size(), hd[0], hd[1], hd[2]});

    for (const auto& p : picks.picks) {
        if (!pick_in_bounds(p, meta)) throw std::invalid_argument("pick out of bounds");
        const double sigma = target_sigma(catalog.spec(p.class_id), meta.voxel_spacing_angstrom, R);
        const int cz = static_cast<int>(std::floor(p.z / R));
        const int cy = static_cast<int>(std::floor(p.y / R));
        const int cx = static_cast<int>(std::floor(p.x / R));
        const int reach = static_cast<int>(std::ceil(3.0 * sigma));
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        const int z0 = std::max(0, cz - reach), z1 = std::min(hd[0] - 1, cz + reach);
        const int y0 = std::max(0, cy - reach), y1 = std::min(hd[1] - 1, cy + reach);
        const int x0 = std::max(0, cx - reach), x1 = std::min(hd[2] - 1, cx + reach);
        const double r2max = 9.0 * sigma * sigma;
        for (int z = z0; z <= z1; ++z) {
            const double dz2 = static_cast<double>(z - cz) * (z - cz);
            for (int y = y0; y <= y1; ++y) {
                const double dy2 = static_cast<double>(y - cy) * (y - cy);
                float* row = &hm.values.data[static_cast<std::size_t>(
                    hm.values.idx4(p.class_id, z, y, 0))];
                for (int x = x0; x <= x1; ++x) {
                    const double r2 = dz2 + dy2 + static_cast<double>(x - cx) * (x - cx);
                    if (r2 > r2max) continue;
                    const float v = static_cast<float>(std::exp(-r2 * inv2s2));
                    row[x] = std::max(row[x], v);
                }
            }
        }
        // quantized center holds exactly 1 (guards against exp rounding)
        if (cz < hd[0] && cy < hd[1] && cx < hd[2])
            hm.values.at4(p.class_id, cz, cy, cx) = 1.0f;
    }
    return hm;
}

}  // namespace etpick
