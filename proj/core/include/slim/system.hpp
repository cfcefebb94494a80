#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slim/energy.hpp"
#include "slim/model.hpp"
#include "slim/pim.hpp"
#include "slim/ssd.hpp"
#include "slim/trace.hpp"

namespace slim::sys {

struct PhaseTimes {
    double t_dram = 0.0;  // QKVO + MHA + prediction, seconds per token
    double t_ssd = 0.0;   // FFN / MoE, seconds per token
};

struct RunResult {
    double latency_s = 0.0;
    double tok_per_s = 0.0;
};

enum class Scheduler { kSequential, kPipelined };

std::string to_string(Scheduler s);

RunResult run_sequential(const PhaseTimes& phases, std::size_t n_tokens);

// Event-driven list schedule: tokens are dealt round-robin to n_streams
// independent sequences; each token runs its DRAM phase then its SSD phase,
// and each module serves one phase at a time.
RunResult run_pipelined(const PhaseTimes& phases, std::size_t n_tokens, std::size_t n_streams = 2);

// (t_dram + t_ssd) / max(t_dram, t_ssd)
double pipeline_speedup_bound(const PhaseTimes& phases);

enum class BaselineKind { kSsdGpu, kDramGpu };

std::string to_string(BaselineKind k);

struct BaselineConfig {
    BaselineKind kind = BaselineKind::kSsdGpu;
    double link_gbps = 8.0;
    double source_gbps = 19.2;
    double gpu_tflops = 80.0;
    double bytes_per_weight = 2.0;

    static BaselineConfig ssd_gpu();
    static BaselineConfig dram_gpu();
    void validate() const;
};

struct BaselineResult {
    double bytes_per_token = 0.0;
    double t_transfer = 0.0;
    double t_compute = 0.0;
    double latency_s = 0.0;  // per token
    double tok_per_s = 0.0;
    EnergyLedger energy;  // per token
};

BaselineResult run_baseline(const BaselineConfig& cfg, const model::ModelConfig& model,
                            double sparsity, const EnergyConstants& k = {},
                            TraceSink* sink = nullptr);

struct DesignPoint {
    std::string name;  // e.g. "SLIM-DIE-SLC"
    std::string nand;  // "slc" | "tlc"
    ssd::SsdGeometry geo;
    ssd::NandTiming timing;
};

DesignPoint design_point(ssd::PeLevel level, const std::string& nand);

// Active neurons of every activated expert in one layer. Masks are nested in
// sparsity; expert choice depends only on (seed, layer).
std::vector<ssd::ExpertMask> sparsity_masks(const model::ModelConfig& cfg, std::size_t layer,
                                            double sparsity, std::uint64_t seed);

struct SimOptions {
    double sparsity = 0.0;
    Scheduler scheduler = Scheduler::kPipelined;
    std::size_t n_tokens = 100;
    std::uint32_t weight_bits = 8;
    std::size_t dim_lr = 0;  // 0 means dim_e / 4
    std::uint64_t seed = 1;
};

struct TokenBreakdown {
    double qkvo_s = 0.0;
    double mha_s = 0.0;
    double predictor_s = 0.0;
    double router_s = 0.0;
    double kv_write_s = 0.0;
    double ffn_s = 0.0;
};

struct SimReport {
    std::string design;
    std::string design_level;
    std::string nand;
    double sparsity = 0.0;
    PhaseTimes phases;
    TokenBreakdown breakdown;
    RunResult run;
    double latency_s_per_token = 0.0;
    double tok_per_s = 0.0;
    double raw_gbps = 0.0;
    double eff_gbps = 0.0;
    std::uint64_t raw_bytes = 0;
    std::uint64_t useful_bytes = 0;
    // Prediction time over DRAM + SSD time of one token.
    double predictor_share = 0.0;
    EnergyLedger energy;  // per token
};

// Simulates one representative token through every layer (PIM cost model for
// the DRAM side, event-driven SSD pass per layer) and schedules n_tokens.
SimReport simulate_design(const model::ModelConfig& cfg, const DesignPoint& design,
                          const pim::PimParams& pim_params, const EnergyConstants& k,
                          const SimOptions& opts, TraceSink* sink = nullptr);

}  // namespace slim::sys
