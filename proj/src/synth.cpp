#include "etpick/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "etpick/rng.hpp"

namespace etpick {

void normalize_volume(Tomogram& tomo) {
    const std::size_t n = tomo.data.size();
    if (n == 0) return;
    double sum = 0.0, sq = 0.0;
    for (float v : tomo.data) {
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    const float inv_sd = var > 1e-12 ? static_cast<float>(1.0 / std::sqrt(var)) : 1.0f;
    const float m = static_cast<float>(mean);
    for (float& v : tomo.data) v = (v - m) * inv_sd;
}

void render_gaussian_blob(Tomogram& tomo, double cz, double cy, double cx,
                          double sigma_voxels, double amplitude) {
    const auto& d = tomo.meta.dims;
    const double inv2s2 = 1.0 / (2.0 * sigma_voxels * sigma_voxels);
    for (int z = 0; z < d[0]; ++z) {
        const double dz2 = (z - cz) * (z - cz);
        for (int y = 0; y < d[1]; ++y) {
            const double dy2 = (y - cy) * (y - cy);
            float* row = &tomo.data[static_cast<std::size_t>(tomo.index(z, y, 0))];
            for (int x = 0; x < d[2]; ++x) {
                const double dx2 = (x - cx) * (x - cx);
                row[x] += static_cast<float>(amplitude * std::exp(-(dz2 + dy2 + dx2) * inv2s2));
            }
        }
    }
}

std::pair<Tomogram, PickSet> synthesize_tomogram(const SynthConfig& cfg,
                                                 const ClassCatalog& catalog) {
    catalog.validate();
    if (!cfg.valid()) throw std::invalid_argument("invalid synth config");

    Tomogram tomo = make_tomogram(VolumeMeta{cfg.dims, cfg.spacing_angstrom});
    PickSet picks;

    Rng place_rng = Rng::stream(cfg.seed, "synth.place");
    constexpr int kMaxAttempts = 10000;

    for (int cid = 0; cid < catalog.size(); ++cid) {
        const int count = cid < static_cast<int>(cfg.counts.size()) ? cfg.counts[cid] : 0;
        const double r_vox = catalog.radius_voxels(cid, cfg.spacing_angstrom);
        // keep most of the blob mass inside the volume
        for (int i = 0; i < count; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
                Pick cand;
                cand.class_id = cid;
                double coord[3];
                bool feasible = true;
                for (int a = 0; a < 3; ++a) {
                    double margin = std::min(r_vox / 2.0, (cfg.dims[a] - 1) / 4.0);
                    double lo = margin, hi = cfg.dims[a] - 1 - margin;
                    if (hi < lo) {
                        feasible = false;
                        break;
                    }
                    coord[a] = place_rng.uniform(lo, hi);
                }
                if (!feasible) break;
                cand.z = coord[0];
                cand.y = coord[1];
                cand.x = coord[2];

                bool ok = true;
                for (const auto& p : picks.picks) {
                    const double r_other =
                        catalog.radius_voxels(p.class_id, cfg.spacing_angstrom);
                    const double min_d = cfg.min_sep_fraction * (r_vox + r_other);
                    const double dz = cand.z - p.z, dy = cand.y - p.y, dx = cand.x - p.x;
                    if (dz * dz + dy * dy + dx * dx < min_d * min_d) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    picks.picks.push_back(cand);
                    placed = true;
                }
            }
            if (!placed)
                throw std::runtime_error("placement infeasible for class \"" +
                                         catalog.spec(cid).name + "\" after " +
                                         std::to_string(kMaxAttempts) + " attempts");
        }
    }

    for (const auto& p : picks.picks) {
        const double sigma = catalog.radius_voxels(p.class_id, cfg.spacing_angstrom) / 2.0;
        render_gaussian_blob(tomo, p.z, p.y, p.x, sigma, cfg.peak_amplitude);
    }

    if (cfg.noise_sd > 0.0) {
        Rng noise_rng = Rng::stream(cfg.seed, "synth.noise");
        for (float& v : tomo.data)
            v += static_cast<float>(cfg.noise_sd * noise_rng.normal());
    }

    return {std::move(tomo), std::move(picks)};
}

}  // namespace etpick
