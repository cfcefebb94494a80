#include "slim/energy.hpp"

#include <algorithm>

#include "slim/error.hpp"

namespace slim {

void EnergyConstants::validate() const {
    for (double v : {nand_read_pj_per_byte, ch_bus_pj_per_byte, onchip_bus_pj_per_byte,
                     pcie_pj_per_byte, dram_rw_pj_per_byte, pim_pj_per_bank_aap,
                     near_bank_pj_per_bank_cycle, pe_die_pj_per_mac, pe_ch_pj_per_mac,
                     host_watts}) {
        if (!(v >= 0.0)) throw ConfigError("energy constants must be nonnegative");
    }
}

namespace {

std::size_t component_index(std::string_view name) {
    auto it = std::find(kEnergyComponents.begin(), kEnergyComponents.end(), name);
    if (it == kEnergyComponents.end()) {
        throw AccountingError("energy ledger: unknown component '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - kEnergyComponents.begin());
}

}  // namespace

void EnergyLedger::add(std::string_view component, double joules) {
    if (!(joules >= 0.0)) throw AccountingError("energy ledger: negative or NaN energy");
    joules_[component_index(component)] += joules;
}

double EnergyLedger::get(std::string_view component) const {
    return joules_[component_index(component)];
}

double EnergyLedger::total() const {
    double t = 0.0;
    for (double j : joules_) t += j;
    return t;
}

std::vector<std::pair<std::string, double>> EnergyLedger::components() const {
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < kEnergyComponents.size(); ++i) {
        out.emplace_back(std::string(kEnergyComponents[i]), joules_[i]);
    }
    return out;
}

EnergyLedger& EnergyLedger::operator+=(const EnergyLedger& other) {
    for (std::size_t i = 0; i < joules_.size(); ++i) joules_[i] += other.joules_[i];
    return *this;
}

EnergyLedger energy_report(const TotalsSink& totals, const EnergyConstants& k) {
    constexpr double pj = 1e-12;
    EnergyLedger ledger;
    for (const auto& [name, t] : totals.totals()) {
        const auto bytes = static_cast<double>(t.bytes);
        const auto ops = static_cast<double>(t.ops);
        if (name == ev::kNandRead) {
            ledger.add("nand_read", bytes * k.nand_read_pj_per_byte * pj);
        } else if (name == ev::kChXfer) {
            ledger.add("ch_bus", bytes * k.ch_bus_pj_per_byte * pj);
        } else if (name == ev::kOnchipXfer) {
            ledger.add("ch_bus", bytes * k.onchip_bus_pj_per_byte * pj);
        } else if (name == ev::kPeMacDie) {
            ledger.add("pe_compute", ops * k.pe_die_pj_per_mac * pj);
        } else if (name == ev::kPeMacCh) {
            ledger.add("pe_compute", ops * k.pe_ch_pj_per_mac * pj);
        } else if (name == ev::kPimAap) {
            ledger.add("dram_pim", ops * k.pim_pj_per_bank_aap * pj);
        } else if (name == ev::kNearBank) {
            ledger.add("dram_pim", ops * k.near_bank_pj_per_bank_cycle * pj);
        } else if (name == ev::kDramRw) {
            ledger.add("dram_rw", bytes * k.dram_rw_pj_per_byte * pj);
        } else if (name == ev::kPcie) {
            ledger.add("pcie", bytes * k.pcie_pj_per_byte * pj);
        } else if (name == ev::kHostBusy) {
            ledger.add("host", ops * 1e-9 * k.host_watts);
        } else if (name == ev::kFtl || name == ev::kPassEnd) {
            // Bookkeeping markers with no modeled energy.
        } else {
            throw AccountingError("energy_report: unknown event type '" + name + "'");
        }
    }
    return ledger;
}

EnergyLedger energy_report(std::span<const TraceEvent> events, const EnergyConstants& k) {
    TotalsSink totals;
    for (const auto& e : events) totals.record(e);
    return energy_report(totals, k);
}

}  // namespace slim
