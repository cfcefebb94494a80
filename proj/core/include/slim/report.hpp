#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slim/system.hpp"

namespace slim::report {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

struct Row {
    std::string scenario;
    std::string design_level;
    std::string nand;
    double sparsity = 0.0;
    double tok_per_s = 0.0;
    double latency_ms_per_token = 0.0;
    double raw_gbps = 0.0;
    double eff_gbps = 0.0;
    double energy_mj_per_token = 0.0;
    // Extra numeric columns in order (per-component energy, phase times, ...).
    std::vector<std::pair<std::string, double>> extra;
    std::string config_hash;
};

// Rows for a SLIM design point and for a baseline.
Row row_from(const std::string& scenario, const sys::SimReport& r, const std::string& hash);
Row row_from(const std::string& scenario, sys::BaselineKind kind, double sparsity,
             const sys::BaselineResult& r, const std::string& hash);

// Header is taken from the first row; every row must carry the same extras.
std::string to_csv(std::span<const Row> rows);
std::string to_json(std::span<const Row> rows);

// Shortest round-trip decimal representation, locale-independent.
std::string format_number(double v);

}  // namespace slim::report
