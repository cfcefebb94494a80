#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "slim/energy.hpp"
#include "slim/model.hpp"
#include "slim/pim.hpp"
#include "slim/predictor.hpp"
#include "slim/system.hpp"

namespace slim::cli {

struct DesignSpec {
    std::string name;
    std::string nand;  // preset the geometry/timing came from, "custom" if edited
    ssd::SsdGeometry geo;
    ssd::NandTiming timing;
};

struct TrainSpec {
    std::size_t calib_tokens = 256;
    std::size_t heldout_tokens = 64;
    std::size_t dim_lr = 0;  // 0 means dim_e / 4
    pred::TrainOptions options;
    std::vector<double> targets = {0.2, 0.4, 0.6};
};

struct Paths {
    std::filesystem::path model;  // empty: synthesize from the seed
    std::filesystem::path predictor;
    std::filesystem::path thresholds;
};

struct OutputSpec {
    std::filesystem::path dir = "out";
    bool csv = true;
    bool json = true;
    bool trace = false;
};

struct ScenarioConfig {
    std::string scenario = "default";
    std::string model_preset;
    model::ModelConfig model;
    std::vector<DesignSpec> designs;
    pim::PimParams pim;
    EnergyConstants energy;
    std::vector<double> sparsity = {0.0, 0.25, 0.5, 0.75};
    sys::Scheduler scheduler = sys::Scheduler::kPipelined;
    std::size_t n_tokens = 100;
    std::uint32_t weight_bits = 8;
    std::size_t sim_dim_lr = 0;
    std::vector<sys::BaselineConfig> baselines;
    std::uint64_t seed = 1;
    TrainSpec train;
    Paths paths;
    OutputSpec output;
};

// Named presets; names may be written with or without the family prefix
// ("model.llama2_7b" or "llama2_7b").
model::ModelConfig model_preset(const std::string& name);
DesignSpec ssd_preset(const std::string& nand, ssd::PeLevel level);
pim::PimParams dram_preset(const std::string& name);
std::vector<std::string> model_preset_names();

// Strict: unknown keys, wrong types and unresolvable presets throw ConfigError.
// Relative fixture paths are resolved against `base_dir`.
ScenarioConfig parse_scenario(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Documents holding {"scenarios": [...]} expand to several configs; anything
// else is a single scenario.
std::vector<ScenarioConfig> load_scenarios(const std::filesystem::path& path);

// Every field after preset resolution, in a fixed key order.
nlohmann::ordered_json resolved_json(const ScenarioConfig& cfg);
std::string config_hash(const nlohmann::ordered_json& resolved);

}  // namespace slim::cli
