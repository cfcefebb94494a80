#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slim/trace.hpp"

namespace slim {

// Defaults are modeling assumptions, not measurements.
struct EnergyConstants {
    double nand_read_pj_per_byte = 100.0;
    double ch_bus_pj_per_byte = 40.0;
    double onchip_bus_pj_per_byte = 10.0;
    double pcie_pj_per_byte = 80.0;
    double dram_rw_pj_per_byte = 160.0;
    double pim_pj_per_bank_aap = 1500.0;
    double near_bank_pj_per_bank_cycle = 32.3;
    double pe_die_pj_per_mac = 1.6875;
    double pe_ch_pj_per_mac = 0.948;
    double host_watts = 100.0;

    void validate() const;
};

inline constexpr std::array<std::string_view, 7> kEnergyComponents = {
    "nand_read", "ch_bus", "pe_compute", "dram_pim", "dram_rw", "pcie", "host"};

class EnergyLedger {
public:
    // Throws AccountingError for names outside kEnergyComponents or negative joules.
    void add(std::string_view component, double joules);
    double get(std::string_view component) const;

    // Components summed in kEnergyComponents order.
    double total() const;
    std::vector<std::pair<std::string, double>> components() const;

    EnergyLedger& operator+=(const EnergyLedger& other);

private:
    std::array<double, kEnergyComponents.size()> joules_{};
};

EnergyLedger energy_report(const TotalsSink& totals, const EnergyConstants& k);

// Aggregates the events first, so the result equals the totals-based report.
EnergyLedger energy_report(std::span<const TraceEvent> events, const EnergyConstants& k);

}  // namespace slim
