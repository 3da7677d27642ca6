#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "etpick/catalog.hpp"
#include "etpick/picks.hpp"
#include "etpick/volume.hpp"

namespace etpick {

// Desk-scale synthetic tomogram: isotropic Gaussian density blobs at random
// centers plus i.i.d. Gaussian noise. Stands in for real acquisitions.
struct SynthConfig {
    std::array<int, 3> dims{64, 64, 64};
    double spacing_angstrom = 10.0;
    std::vector<int> counts;          // per class_id; missing entries = 0
    double min_sep_fraction = 1.0;    // pairwise distance >= frac*(r_i+r_j)/spacing
    double peak_amplitude = 1.0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;

    bool valid() const {
        for (int c : counts)
            if (c < 0) return false;
        return min_sep_fraction >= 0.0 && noise_sd >= 0.0 &&
               dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1 && spacing_angstrom > 0.0;
    }
};

// Adds amplitude * exp(-|r - center|^2 / (2 sigma^2)) over the full volume
// (no truncation, so the noise-free volume is exactly a sum of Gaussians).
void render_gaussian_blob(Tomogram& tomo, double cz, double cy, double cx,
                          double sigma_voxels, double amplitude);

// Blob sigma is radius/2 converted to voxels. Throws std::runtime_error
// naming the class when a particle cannot be placed within 10,000 attempts.
std::pair<Tomogram, PickSet> synthesize_tomogram(const SynthConfig& cfg,
                                                 const ClassCatalog& catalog);

}  // namespace etpick
