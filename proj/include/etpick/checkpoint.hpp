#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "etpick/params.hpp"
#include "etpick/picknet.hpp"

namespace etpick {

// Checkpoint container: `<path>.json` manifest (names, shapes, dtype, step,
// stride R, catalog hash, net config, stage tag) plus `<path>.bin` with the
// concatenated little-endian tensor payloads. Round trips are bit-exact.
struct Checkpoint {
    std::string stage = "burn-in";  // burn-in | cotrain
    std::int64_t step = 0;
    NetConfig net;
    std::uint64_t catalog_hash = 0;
    std::uint64_t config_hash = 0;
    ParamSetF student;
    ParamSetF teacher;                       // empty for pure burn-in saves
    std::optional<OptimizerStateF> optimizer;  // saved so resumed runs continue exactly

    bool has_teacher() const { return teacher.size() > 0; }
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// NetConfig <-> JSON, shared by checkpoints and run configs.
nlohmann::json netconfig_json(const NetConfig& c);
NetConfig netconfig_parse(const nlohmann::json& j);

}  // namespace etpick
