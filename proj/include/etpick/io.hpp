#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etpick/catalog.hpp"
#include "etpick/picks.hpp"
#include "etpick/volume.hpp"

namespace etpick {

// A detection is a predicted pick with a confidence attached.
struct Detection {
    int class_id = 0;
    double z = 0.0, y = 0.0, x = 0.0;  // input-volume voxel coordinates
    double confidence = 0.0;
};

// Volume format: raw little-endian float32 payload at `path`, sidecar text
// header at `path + ".json"` with dims [D,H,W], dtype "f32le",
// spacing_angstrom and order "zyx".
void write_volume(const Tomogram& tomo, const std::string& path);
Tomogram read_volume(const std::string& path);

inline std::int64_t payload_size_bytes(const VolumeMeta& meta) {
    return meta.voxel_count() * static_cast<std::int64_t>(sizeof(float));
}

// Picks format: one JSON object per line with coordinates in angstrom.
void write_picks(const PickSet& ps, const VolumeMeta& meta, const ClassCatalog& cat,
                 const std::string& path);
PickSet read_picks(const std::string& path, const VolumeMeta& meta,
                   const ClassCatalog& cat);

// Detections use the same line format plus a confidence field.
void write_detections(const std::vector<Detection>& dets, const std::string& tomogram_id,
                      const VolumeMeta& meta, const ClassCatalog& cat,
                      const std::string& path);
std::vector<Detection> read_detections(const std::string& path, const VolumeMeta& meta,
                                       const ClassCatalog& cat,
                                       std::string* tomogram_id = nullptr);

}  // namespace etpick
