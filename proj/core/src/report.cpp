#include "slim/report.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "slim/error.hpp"

namespace slim::report {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    return s;
}

std::string format_number(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

void add_energy(Row& row, const EnergyLedger& e) {
    row.energy_mj_per_token = e.total() * 1e3;
    for (const auto& [name, j] : e.components()) row.extra.emplace_back("e_" + name + "_mj", j * 1e3);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Row row_from(const std::string& scenario, const sys::SimReport& r, const std::string& hash) {
    Row row;
    row.scenario = scenario;
    row.design_level = r.design_level;
    row.nand = r.nand;
    row.sparsity = r.sparsity;
    row.tok_per_s = r.tok_per_s;
    row.latency_ms_per_token = r.latency_s_per_token * 1e3;
    row.raw_gbps = r.raw_gbps;
    row.eff_gbps = r.eff_gbps;
    add_energy(row, r.energy);
    row.extra.emplace_back("t_dram_ms", r.phases.t_dram * 1e3);
    row.extra.emplace_back("t_ssd_ms", r.phases.t_ssd * 1e3);
    row.extra.emplace_back("predictor_ms", r.breakdown.predictor_s * 1e3);
    row.extra.emplace_back("mha_ms", r.breakdown.mha_s * 1e3);
    row.extra.emplace_back("predictor_share", r.predictor_share);
    row.config_hash = hash;
    return row;
}

Row row_from(const std::string& scenario, sys::BaselineKind kind, double sparsity,
             const sys::BaselineResult& r, const std::string& hash) {
    Row row;
    row.scenario = scenario;
    row.design_level = sys::to_string(kind);
    row.nand = "-";
    row.sparsity = sparsity;
    row.tok_per_s = r.tok_per_s;
    row.latency_ms_per_token = r.latency_s * 1e3;
    row.raw_gbps = r.t_transfer > 0 ? r.bytes_per_token / r.t_transfer / 1e9 : 0.0;
    row.eff_gbps = r.bytes_per_token / r.latency_s / 1e9;
    add_energy(row, r.energy);
    row.extra.emplace_back("t_dram_ms", 0.0);
    row.extra.emplace_back("t_ssd_ms", 0.0);
    row.extra.emplace_back("predictor_ms", 0.0);
    row.extra.emplace_back("mha_ms", 0.0);
    row.extra.emplace_back("predictor_share", 0.0);
    row.config_hash = hash;
    return row;
}

std::string to_csv(std::span<const Row> rows) {
    std::string out =
        "scenario,design_level,nand,sparsity,tok_per_s,latency_ms_per_token,raw_gbps,eff_gbps,"
        "energy_mj_per_token";
    if (!rows.empty()) {
        for (const auto& [name, v] : rows.front().extra) out += "," + name;
    }
    out += ",config_hash\n";
    for (const Row& r : rows) {
        if (!rows.empty() && r.extra.size() != rows.front().extra.size()) {
            throw FormatError("to_csv: rows carry different extra columns");
        }
        out += csv_field(r.scenario) + "," + csv_field(r.design_level) + "," + csv_field(r.nand);
        for (double v : {r.sparsity, r.tok_per_s, r.latency_ms_per_token, r.raw_gbps, r.eff_gbps,
                         r.energy_mj_per_token}) {
            out += "," + format_number(v);
        }
        for (const auto& [name, v] : r.extra) out += "," + format_number(v);
        out += "," + r.config_hash + "\n";
    }
    return out;
}

std::string to_json(std::span<const Row> rows) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const Row& r : rows) {
        nlohmann::ordered_json j;
        j["scenario"] = r.scenario;
        j["design_level"] = r.design_level;
        j["nand"] = r.nand;
        j["sparsity"] = r.sparsity;
        j["tok_per_s"] = r.tok_per_s;
        j["latency_ms_per_token"] = r.latency_ms_per_token;
        j["raw_gbps"] = r.raw_gbps;
        j["eff_gbps"] = r.eff_gbps;
        j["energy_mj_per_token"] = r.energy_mj_per_token;
        for (const auto& [name, v] : r.extra) j[name] = v;
        j["config_hash"] = r.config_hash;
        doc.push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

}  // namespace slim::report
