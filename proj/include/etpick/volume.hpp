#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace etpick {

// dims are (D, H, W) = (z, y, x); index order is (z, y, x) with x fastest.
struct VolumeMeta {
    std::array<int, 3> dims{0, 0, 0};
    double voxel_spacing_angstrom = 10.0;

    std::int64_t voxel_count() const {
        return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    }
    bool valid() const {
        return dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1 &&
               voxel_spacing_angstrom > 0.0;
    }
};

struct Tomogram {
    VolumeMeta meta;
    std::vector<float> data;  // size D*H*W

    std::int64_t index(int z, int y, int x) const {
        return (static_cast<std::int64_t>(z) * meta.dims[1] + y) * meta.dims[2] + x;
    }
    float at(int z, int y, int x) const { return data[static_cast<std::size_t>(index(z, y, x))]; }
    float& at(int z, int y, int x) { return data[static_cast<std::size_t>(index(z, y, x))]; }
};

inline Tomogram make_tomogram(const VolumeMeta& meta) {
    Tomogram t;
    t.meta = meta;
    t.data.assign(static_cast<std::size_t>(meta.voxel_count()), 0.0f);
    return t;
}

// In-place z-score normalization (mean 0, sd 1 over the whole volume).
// Constant volumes are left centered at zero.
void normalize_volume(Tomogram& tomo);

}  // namespace etpick
