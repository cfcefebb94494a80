#include <algorithm>
#include <string>

#include "slim/error.hpp"
#include "slim/ssd.hpp"

namespace slim::ssd {

std::string to_string(PeLevel level) { return level == PeLevel::kDie ? "die" : "channel"; }

void SsdGeometry::validate() const {
    if (n_ch == 0 || chips_per_ch == 0 || dies_per_chip == 0 || planes_per_die == 0 ||
        blocks_per_plane == 0 || pages_per_block == 0 || page_bytes == 0) {
        throw ConfigError("ssd geometry: every dimension must be >= 1");
    }
}

void NandTiming::validate() const {
    if (!(t_r_us > 0) || !(t_prog_us > 0) || !(ch_bus_mbps > 0) || pe_macs == 0 ||
        !(pe_clock_ghz > 0) || !(ftl_us >= 0) || !(onchip_bus_gbps > 0) || !(die_bw_gbps >= 0)) {
        throw ConfigError("nand timing: rates and latencies must be positive");
    }
}

std::uint32_t default_pe_macs(PeLevel level) { return level == PeLevel::kDie ? 16 : 64; }

SsdGeometry slc_geometry() { return SsdGeometry{}; }

SsdGeometry tlc_geometry() {
    SsdGeometry g;
    g.page_bytes = 16384;
    return g;
}

NandTiming slc_timing(PeLevel level) {
    NandTiming t;
    t.t_r_us = 3.0;
    t.t_prog_us = 100.0;
    t.pe_level = level;
    t.pe_macs = default_pe_macs(level);
    return t;
}

NandTiming tlc_timing(PeLevel level) {
    NandTiming t = slc_timing(level);
    t.t_r_us = 40.0;
    t.t_prog_us = 650.0;
    return t;
}

PhysLoc die_location(const SsdGeometry& geo, std::uint32_t die_index, std::uint64_t die_page) {
    PhysLoc loc;
    loc.ch = die_index % geo.n_ch;
    const std::uint32_t rest = die_index / geo.n_ch;
    loc.chip = rest % geo.chips_per_ch;
    loc.die = rest / geo.chips_per_ch;
    const std::uint64_t per_plane = std::uint64_t{geo.blocks_per_plane} * geo.pages_per_block;
    loc.plane = static_cast<std::uint32_t>(die_page / per_plane);
    loc.block = static_cast<std::uint32_t>((die_page / geo.pages_per_block) % geo.blocks_per_plane);
    loc.page = static_cast<std::uint32_t>(die_page % geo.pages_per_block);
    return loc;
}

WeightLayout::WeightLayout(SsdGeometry geo, std::size_t n_dec, std::size_t n_expert,
                           std::size_t dim_h, std::uint32_t vector_bytes,
                           std::vector<VectorEntry> entries)
    : geo_(geo), n_dec_(n_dec), n_expert_(n_expert), dim_h_(dim_h), vector_bytes_(vector_bytes),
      entries_(std::move(entries)) {
    if (entries_.size() != n_dec_ * n_expert_ * dim_h_) {
        throw MappingError("WeightLayout: entry count != n_dec * n_expert * dim_h");
    }
}

std::uint32_t WeightLayout::packing() const noexcept {
    return vector_bytes_ <= geo_.page_bytes ? geo_.page_bytes / vector_bytes_ : 1;
}

std::uint32_t WeightLayout::span() const noexcept {
    return (vector_bytes_ + geo_.page_bytes - 1) / geo_.page_bytes;
}

const VectorEntry& WeightLayout::entry(std::size_t layer, std::size_t expert,
                                       std::size_t j) const {
    if (layer >= n_dec_ || expert >= n_expert_ || j >= dim_h_) {
        throw MappingError("WeightLayout: fused vector id out of range");
    }
    return entries_[(layer * n_expert_ + expert) * dim_h_ + j];
}

PhysLoc WeightLayout::locate(std::size_t layer, std::size_t expert, std::size_t j) const {
    const VectorEntry& e = entry(layer, expert, j);
    PhysLoc loc = die_location(geo_, e.die, e.first_page);
    loc.byte_offset = e.byte_offset;
    return loc;
}

std::vector<std::uint64_t> WeightLayout::pages_per_die() const {
    std::vector<std::uint64_t> last(geo_.n_dies(), 0);
    for (const auto& e : entries_) {
        last[e.die] = std::max<std::uint64_t>(last[e.die], std::uint64_t{e.first_page} + e.span);
    }
    return last;
}

std::vector<std::uint64_t> WeightLayout::vectors_per_die() const {
    std::vector<std::uint64_t> n(geo_.n_dies(), 0);
    for (const auto& e : entries_) ++n[e.die];
    return n;
}

WeightLayout map_weights(const model::ModelConfig& cfg, const SsdGeometry& geo,
                         std::uint32_t bytes_per_elem) {
    cfg.validate();
    geo.validate();
    if (bytes_per_elem == 0) throw ConfigError("map_weights: bytes_per_elem must be >= 1");

    const std::uint64_t vec64 = 3ull * cfg.dim_e * bytes_per_elem;
    if (vec64 > 0xffffffffull) throw MappingError("map_weights: fused vector too large");
    const auto vec = static_cast<std::uint32_t>(vec64);
    const std::uint32_t packing = vec <= geo.page_bytes ? geo.page_bytes / vec : 1;
    const std::uint32_t span = (vec + geo.page_bytes - 1) / geo.page_bytes;
    const std::uint64_t per_expert_groups = (cfg.dim_h + packing - 1) / packing;
    const std::uint64_t needed_pages = per_expert_groups * span * cfg.n_dec * cfg.n_expert;
    if (needed_pages > geo.pages_per_die() * geo.n_dies()) {
        throw MappingError("map_weights: model needs " + std::to_string(needed_pages) +
                           " pages, device holds " +
                           std::to_string(geo.pages_per_die() * geo.n_dies()));
    }

    const std::uint32_t n_dies = geo.n_dies();
    std::vector<std::uint64_t> cursor(n_dies, 0);
    std::vector<VectorEntry> entries(cfg.n_dec * cfg.n_expert * cfg.dim_h);
    std::uint64_t group = 0;
    std::size_t idx = 0;
    for (std::size_t l = 0; l < cfg.n_dec; ++l) {
        for (std::size_t e = 0; e < cfg.n_expert; ++e) {
            std::size_t j = 0;
            while (j < cfg.dim_h) {
                const auto die = static_cast<std::uint32_t>(group++ % n_dies);
                const std::uint64_t first = cursor[die];
                cursor[die] += span;
                if (cursor[die] > geo.pages_per_die()) {
                    throw MappingError("map_weights: die " + std::to_string(die) + " is full");
                }
                for (std::uint32_t slot = 0; slot < packing && j < cfg.dim_h; ++slot, ++j) {
                    entries[idx++] = {die, static_cast<std::uint32_t>(first), slot * vec, span};
                }
            }
        }
    }
    return WeightLayout(geo, cfg.n_dec, cfg.n_expert, cfg.dim_h, vec, std::move(entries));
}

std::vector<ReadTransaction> generate_read_transactions(const WeightLayout& layout,
                                                        std::span<const ExpertMask> masks) {
    const SsdGeometry& geo = layout.geometry();
    const std::uint32_t vec = layout.vector_bytes();
    std::vector<ReadTransaction> per_die(geo.n_dies());
    for (std::uint32_t d = 0; d < per_die.size(); ++d) per_die[d].die = d;

    for (const ExpertMask& m : masks) {
        if (m.mask.size() != layout.dim_h()) {
            throw ShapeError("generate_read_transactions: mask length != dim_h");
        }
        for (std::size_t j : m.mask.active_indices()) {
            const VectorEntry& e = layout.entry(m.layer, m.expert, j);
            ReadTransaction& t = per_die[e.die];
            for (std::uint32_t s = 0; s < e.span; ++s) {
                const std::uint32_t page = e.first_page + s;
                const std::uint32_t useful =
                    e.span == 1 ? vec : std::min(geo.page_bytes, vec - s * geo.page_bytes);
                if (!t.pages.empty() && t.pages.back() == page) {
                    t.page_useful.back() += useful;
                } else {
                    t.pages.push_back(page);
                    t.page_useful.push_back(useful);
                }
                t.useful_bytes += useful;
            }
        }
    }

    std::vector<ReadTransaction> out;
    for (auto& t : per_die) {
        if (t.pages.empty()) continue;
        t.total_bytes = std::uint64_t{t.pages.size()} * geo.page_bytes;
        out.push_back(std::move(t));
    }
    return out;
}

double write_model(const WeightLayout& layout, const SsdGeometry& geo, const NandTiming& timing) {
    if (geo.n_dies() != layout.geometry().n_dies()) {
        throw MappingError("write_model: geometry does not match the layout");
    }
    const auto pages = layout.pages_per_die();
    const std::uint64_t busiest = pages.empty() ? 0 : *std::max_element(pages.begin(), pages.end());
    return static_cast<double>(busiest) * timing.t_prog_us * 1e-6;
}

}  // namespace slim::ssd
