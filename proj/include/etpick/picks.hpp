#pragma once

#include <string>
#include <vector>

#include "etpick/catalog.hpp"
#include "etpick/volume.hpp"

namespace etpick {

// In-memory pick coordinates are voxels; on disk they are angstrom with the
// origin at the center of voxel (0,0,0).
struct Pick {
    int class_id = 0;
    double z = 0.0, y = 0.0, x = 0.0;
};

struct PickSet {
    std::string tomogram_id;
    std::vector<Pick> picks;
};

inline bool pick_in_bounds(const Pick& p, const VolumeMeta& meta) {
    return p.z >= 0.0 && p.z < meta.dims[0] && p.y >= 0.0 && p.y < meta.dims[1] &&
           p.x >= 0.0 && p.x < meta.dims[2];
}

}  // namespace etpick
