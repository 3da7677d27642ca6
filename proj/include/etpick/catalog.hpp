#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace etpick {

struct ClassSpec {
    int class_id = 0;
    std::string name;
    double radius_angstrom = 0.0;
};

// Ordered class list; the order fixes the channel order of every heatmap.
struct ClassCatalog {
    std::vector<ClassSpec> classes;

    int size() const { return static_cast<int>(classes.size()); }

    const ClassSpec& spec(int class_id) const { return classes.at(static_cast<std::size_t>(class_id)); }

    const ClassSpec* find(std::string_view name) const {
        for (const auto& c : classes)
            if (c.name == name) return &c;
        return nullptr;
    }

    double radius_voxels(int class_id, double spacing_angstrom) const {
        return spec(class_id).radius_angstrom / spacing_angstrom;
    }

    // throws std::invalid_argument on empty catalog, non-positive radius,
    // or ids that are not dense 0..C-1
    void validate() const;

    // CZII class set: AF 60, BA 65, BG 90, Ribo 150, Thy 130, VLP 135 A
    static ClassCatalog default_czii();
};

std::uint64_t catalog_hash(const ClassCatalog& cat);

ClassCatalog read_catalog(const std::string& path);
void write_catalog(const ClassCatalog& cat, const std::string& path);

}  // namespace etpick
