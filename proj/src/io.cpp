#include "etpick/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace etpick {

// Payloads are little-endian f32. The build targets little-endian hosts;
// a mixed-endian deployment would need a byte swap here.
static_assert(sizeof(float) == 4, "f32 payloads require 4-byte float");

static std::string header_path(const std::string& path) { return path + ".json"; }

void write_volume(const Tomogram& tomo, const std::string& path) {
    if (!tomo.meta.valid()) throw std::runtime_error("invalid volume meta");
    if (static_cast<std::int64_t>(tomo.data.size()) != tomo.meta.voxel_count())
        throw std::runtime_error("volume data size does not match dims");
    for (float v : tomo.data)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite values in volume");

    nlohmann::json hdr = {
        {"dims", {tomo.meta.dims[0], tomo.meta.dims[1], tomo.meta.dims[2]}},
        {"dtype", "f32le"},
        {"spacing_angstrom", tomo.meta.voxel_spacing_angstrom},
        {"order", "zyx"},
    };
    std::ofstream hf(header_path(path));
    if (!hf) throw std::runtime_error("cannot open for write: " + header_path(path));
    hf << hdr.dump(2) << "\n";

    std::ofstream pf(path, std::ios::binary);
    if (!pf) throw std::runtime_error("cannot open for write: " + path);
    pf.write(reinterpret_cast<const char*>(tomo.data.data()),
             static_cast<std::streamsize>(tomo.data.size() * sizeof(float)));
    if (!pf) throw std::runtime_error("short write: " + path);
}

Tomogram read_volume(const std::string& path) {
    std::ifstream hf(header_path(path));
    if (!hf) throw std::runtime_error("cannot open header: " + header_path(path));
    nlohmann::json hdr;
    try {
        hf >> hdr;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed header " + header_path(path) + ": " + e.what());
    }

    Tomogram tomo;
    try {
        auto dims = hdr.at("dims");
        if (!dims.is_array() || dims.size() != 3) throw std::runtime_error("dims must be [D,H,W]");
        tomo.meta.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
        tomo.meta.voxel_spacing_angstrom = hdr.at("spacing_angstrom").get<double>();
        if (hdr.at("dtype").get<std::string>() != "f32le")
            throw std::runtime_error("unsupported dtype");
        if (hdr.at("order").get<std::string>() != "zyx")
            throw std::runtime_error("unsupported index order");
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed header " + header_path(path) + ": " + e.what());
    }
    if (!tomo.meta.valid()) throw std::runtime_error("malformed header: invalid dims/spacing");

    std::ifstream pf(path, std::ios::binary | std::ios::ate);
    if (!pf) throw std::runtime_error("cannot open payload: " + path);
    const std::int64_t bytes = static_cast<std::int64_t>(pf.tellg());
    if (bytes != payload_size_bytes(tomo.meta))
        throw std::runtime_error("payload length mismatch: " + path + " has " +
                                 std::to_string(bytes) + " bytes, header implies " +
                                 std::to_string(payload_size_bytes(tomo.meta)));
    pf.seekg(0);
    tomo.data.resize(static_cast<std::size_t>(tomo.meta.voxel_count()));
    pf.read(reinterpret_cast<char*>(tomo.data.data()), bytes);
    if (!pf) throw std::runtime_error("short read: " + path);
    for (float v : tomo.data)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite values in volume: " + path);
    return tomo;
}

// ---------------------------------------------------------------------------
// picks / detections (JSON lines, coordinates in angstrom)
// ---------------------------------------------------------------------------

static nlohmann::json pick_line(const std::string& tomo_id, const std::string& cls,
                                double za, double ya, double xa) {
    return {{"tomogram_id", tomo_id}, {"class_name", cls},
            {"x_angstrom", xa},       {"y_angstrom", ya},
            {"z_angstrom", za}};
}

void write_picks(const PickSet& ps, const VolumeMeta& meta, const ClassCatalog& cat,
                 const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    const double sp = meta.voxel_spacing_angstrom;
    for (const auto& p : ps.picks) {
        const auto& spec = cat.spec(p.class_id);
        f << pick_line(ps.tomogram_id, spec.name, p.z * sp, p.y * sp, p.x * sp).dump() << "\n";
    }
}

static Pick parse_pick_line(const nlohmann::json& j, const VolumeMeta& meta,
                            const ClassCatalog& cat, int lineno, const std::string& path,
                            double* confidence) {
    const std::string cls = j.at("class_name").get<std::string>();
    const ClassSpec* spec = cat.find(cls);
    if (!spec)
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": unknown class \"" + cls + "\"");
    const double sp = meta.voxel_spacing_angstrom;
    Pick p;
    p.class_id = spec->class_id;
    p.z = j.at("z_angstrom").get<double>() / sp;
    p.y = j.at("y_angstrom").get<double>() / sp;
    p.x = j.at("x_angstrom").get<double>() / sp;
    if (!pick_in_bounds(p, meta))
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": out-of-bounds center");
    if (confidence) *confidence = j.value("confidence", 0.0);
    return p;
}

PickSet read_picks(const std::string& path, const VolumeMeta& meta,
                   const ClassCatalog& cat) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open picks: " + path);
    PickSet ps;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (ps.picks.empty()) ps.tomogram_id = j.value("tomogram_id", "");
        ps.picks.push_back(parse_pick_line(j, meta, cat, lineno, path, nullptr));
    }
    return ps;
}

void write_detections(const std::vector<Detection>& dets, const std::string& tomogram_id,
                      const VolumeMeta& meta, const ClassCatalog& cat,
                      const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    const double sp = meta.voxel_spacing_angstrom;
    for (const auto& d : dets) {
        nlohmann::json j = pick_line(tomogram_id, cat.spec(d.class_id).name,
                                     d.z * sp, d.y * sp, d.x * sp);
        j["confidence"] = d.confidence;
        f << j.dump() << "\n";
    }
}

std::vector<Detection> read_detections(const std::string& path, const VolumeMeta& meta,
                                       const ClassCatalog& cat, std::string* tomogram_id) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open detections: " + path);
    std::vector<Detection> dets;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (dets.empty() && tomogram_id) *tomogram_id = j.value("tomogram_id", "");
        double conf = 0.0;
        Pick p = parse_pick_line(j, meta, cat, lineno, path, &conf);
        dets.push_back(Detection{p.class_id, p.z, p.y, p.x, conf});
    }
    return dets;
}

}  // namespace etpick
