#pragma once

#include "fedma/engine.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace fedma {

// JSON <-> SimConfig. Serialization is canonical: parse(serialize(c))
// reproduces c field for field.
nlohmann::json config_to_json(const SimConfig& cfg);
SimConfig config_from_json(const nlohmann::json& j);
SimConfig load_config(const std::string& path);

// Set a dot-separated key path ("delay.scale", "task.dim", "seed") in a
// config document. Sweeps patch the JSON and re-parse, so every axis
// goes through the same validation as a hand-written config.
void set_json_path(nlohmann::json& doc, const std::string& path, const nlohmann::json& value);

struct SweepAxis {
    std::string key;
    std::vector<nlohmann::json> values;
};

struct SweepSpec {
    nlohmann::json base;           // full config document
    std::vector<SweepAxis> axes;   // cartesian product
    std::vector<std::uint64_t> seeds;  // each point runs once per seed

    std::size_t point_count() const;
};

SweepSpec load_sweep(const std::string& path);

struct SweepPoint {
    SimConfig config;
    std::vector<std::pair<std::string, nlohmann::json>> assignment;
    std::uint64_t seed = 0;
    std::string content_hash;  // hex digest of the patched document, for resume
};

std::vector<SweepPoint> expand_sweep(const SweepSpec& spec);

// FEDMA_SEED, if set, overrides the config seed.
void apply_env_overrides(SimConfig& cfg);

}  // namespace fedma
