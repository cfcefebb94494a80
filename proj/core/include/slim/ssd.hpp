#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slim/model.hpp"
#include "slim/trace.hpp"

namespace slim::ssd {

enum class PeLevel { kChannel, kDie };

std::string to_string(PeLevel level);

struct SsdGeometry {
    std::uint32_t n_ch = 16;
    std::uint32_t chips_per_ch = 4;
    std::uint32_t dies_per_chip = 1;
    std::uint32_t planes_per_die = 2;
    std::uint32_t blocks_per_plane = 1024;
    std::uint32_t pages_per_block = 512;
    std::uint32_t page_bytes = 4096;

    std::uint32_t dies_per_ch() const noexcept { return chips_per_ch * dies_per_chip; }
    std::uint32_t n_dies() const noexcept { return n_ch * dies_per_ch(); }
    std::uint64_t pages_per_die() const noexcept {
        return std::uint64_t{planes_per_die} * blocks_per_plane * pages_per_block;
    }
    std::uint64_t capacity_bytes() const noexcept {
        return pages_per_die() * n_dies() * page_bytes;
    }
    void validate() const;
};

struct NandTiming {
    double t_r_us = 3.0;
    double t_prog_us = 100.0;
    double ch_bus_mbps = 1200.0;  // ONFI channel rate, MB/s (10^6)
    std::uint32_t pe_macs = 16;
    double pe_clock_ghz = 1.0;
    PeLevel pe_level = PeLevel::kDie;
    // Die-level read rate in GB/s; 0 means page_bytes / t_r.
    double die_bw_gbps = 0.0;
    double ftl_us = 0.5;  // LPA lookup per transaction, issued serially
    double onchip_bus_gbps = 8.0;
    std::uint32_t psum_bytes = 4;

    void validate() const;
};

// Die-level PE 16 MACs, channel-level PE 64 MACs.
std::uint32_t default_pe_macs(PeLevel level);

SsdGeometry slc_geometry();
SsdGeometry tlc_geometry();
NandTiming slc_timing(PeLevel level);
NandTiming tlc_timing(PeLevel level);

struct PhysLoc {
    std::uint32_t ch = 0;
    std::uint32_t chip = 0;
    std::uint32_t die = 0;
    std::uint32_t plane = 0;
    std::uint32_t block = 0;
    std::uint32_t page = 0;
    std::uint32_t byte_offset = 0;
};

// Global die index d enumerates channels fastest: ch = d % n_ch, then chip,
// then die within the chip.
PhysLoc die_location(const SsdGeometry& geo, std::uint32_t die_index, std::uint64_t die_page);

struct VectorEntry {
    std::uint32_t die = 0;         // global die index
    std::uint32_t first_page = 0;  // die-local page index
    std::uint32_t byte_offset = 0;
    std::uint32_t span = 1;  // consecutive pages holding the vector
};

// Fused-vector (gate row j, up row j, down column j) placement table.
class WeightLayout {
public:
    WeightLayout() = default;
    WeightLayout(SsdGeometry geo, std::size_t n_dec, std::size_t n_expert, std::size_t dim_h,
                 std::uint32_t vector_bytes, std::vector<VectorEntry> entries);

    const SsdGeometry& geometry() const noexcept { return geo_; }
    std::size_t n_dec() const noexcept { return n_dec_; }
    std::size_t n_expert() const noexcept { return n_expert_; }
    std::size_t dim_h() const noexcept { return dim_h_; }
    std::uint32_t vector_bytes() const noexcept { return vector_bytes_; }
    // Vectors per page (>= 1) when a vector fits in a page, else 1.
    std::uint32_t packing() const noexcept;
    std::uint32_t span() const noexcept;

    std::size_t size() const noexcept { return entries_.size(); }
    const VectorEntry& entry(std::size_t layer, std::size_t expert, std::size_t j) const;
    PhysLoc locate(std::size_t layer, std::size_t expert, std::size_t j) const;

    // Pages written on each die.
    std::vector<std::uint64_t> pages_per_die() const;
    std::vector<std::uint64_t> vectors_per_die() const;

private:
    SsdGeometry geo_;
    std::size_t n_dec_ = 0;
    std::size_t n_expert_ = 0;
    std::size_t dim_h_ = 0;
    std::uint32_t vector_bytes_ = 0;
    std::vector<VectorEntry> entries_;
};

// Fused vector = 3 * dim_e * bytes_per_elem bytes. Page groups (one page of
// packed vectors, or the pages of one spanning vector) go round-robin over
// dies; every (layer, expert) starts on a fresh page.
WeightLayout map_weights(const model::ModelConfig& cfg, const SsdGeometry& geo,
                         std::uint32_t bytes_per_elem = 1);

struct ReadTransaction {
    std::uint32_t die = 0;
    std::vector<std::uint32_t> pages;
    std::vector<std::uint32_t> page_useful;  // useful bytes per entry of `pages`
    std::uint64_t useful_bytes = 0;
    std::uint64_t total_bytes = 0;
};

struct ExpertMask {
    std::size_t layer = 0;
    std::size_t expert = 0;
    model::NeuronMask mask;
};

// One transaction per die that holds at least one active vector, ordered by
// die index; pages appear in neuron order without duplicates.
std::vector<ReadTransaction> generate_read_transactions(const WeightLayout& layout,
                                                        std::span<const ExpertMask> masks);

struct FfnPassParams {
    std::size_t dim_e = 0;
    std::size_t batch_tokens = 1;
    std::uint32_t bytes_per_elem = 1;
    double start_ns = 0.0;  // trace time offset
};

struct FfnPassResult {
    double latency_s = 0.0;  // broadcast through reduce
    double stream_s = 0.0;   // until the last PE finishes computing
    double broadcast_s = 0.0;
    double reduce_s = 0.0;
    std::uint64_t raw_bytes = 0;
    std::uint64_t useful_bytes = 0;
    std::uint64_t pages = 0;
    std::uint64_t macs = 0;

    double raw_gbps() const { return stream_s > 0 ? raw_bytes / stream_s / 1e9 : 0.0; }
    double eff_gbps() const { return latency_s > 0 ? useful_bytes / latency_s / 1e9 : 0.0; }
};

// Event-driven schedule of one FFN/MoE pass (steps: broadcast, transaction
// generation, PE compute, reduce).
FfnPassResult simulate_ffn_pass(std::span<const ReadTransaction> txns, const NandTiming& timing,
                                const SsdGeometry& geo, const FfnPassParams& params,
                                TraceSink* sink = nullptr);

// One-time programming of the layout: busiest die's page count times t_prog.
double write_model(const WeightLayout& layout, const SsdGeometry& geo, const NandTiming& timing);

}  // namespace slim::ssd
