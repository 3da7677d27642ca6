#include "etpick/catalog.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "etpick/rng.hpp"

namespace etpick {

void ClassCatalog::validate() const {
    if (classes.empty()) throw std::invalid_argument("empty catalog");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& c = classes[i];
        if (c.class_id != static_cast<int>(i))
            throw std::invalid_argument("catalog class ids must be dense 0..C-1");
        if (c.radius_angstrom <= 0.0)
            throw std::invalid_argument("class radius must be positive: " + c.name);
        if (c.name.empty()) throw std::invalid_argument("class name must be non-empty");
        for (std::size_t j = 0; j < i; ++j)
            if (classes[j].name == c.name)
                throw std::invalid_argument("duplicate class name: " + c.name);
    }
}

ClassCatalog ClassCatalog::default_czii() {
    ClassCatalog cat;
    cat.classes = {
        {0, "apo-ferritin", 60.0},       {1, "beta-amylase", 65.0},
        {2, "beta-galactosidase", 90.0}, {3, "ribosome", 150.0},
        {4, "thyroglobulin", 130.0},     {5, "virus-like-particle", 135.0},
    };
    return cat;
}

static nlohmann::json catalog_to_json(const ClassCatalog& cat) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : cat.classes)
        j.push_back({{"name", c.name}, {"radius_angstrom", c.radius_angstrom}});
    return j;
}

std::uint64_t catalog_hash(const ClassCatalog& cat) {
    return fnv1a64(catalog_to_json(cat).dump());
}

void write_catalog(const ClassCatalog& cat, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << catalog_to_json(cat).dump(2) << "\n";
}

ClassCatalog read_catalog(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open catalog: " + path);
    nlohmann::json j;
    f >> j;
    if (!j.is_array()) throw std::runtime_error("catalog must be a JSON array: " + path);
    ClassCatalog cat;
    int id = 0;
    for (const auto& e : j) {
        ClassSpec spec;
        spec.class_id = id++;
        spec.name = e.at("name").get<std::string>();
        spec.radius_angstrom = e.at("radius_angstrom").get<double>();
        cat.classes.push_back(std::move(spec));
    }
    cat.validate();
    return cat;
}

}  // namespace etpick
