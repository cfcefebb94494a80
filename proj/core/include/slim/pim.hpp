#pragma once

#include <cstddef>
#include <cstdint>

namespace slim::pim {

struct DramGeometry {
    std::uint32_t n_chips = 32;
    std::uint32_t bank_groups = 4;
    std::uint32_t banks_per_group = 4;
    std::uint32_t rows = 65536;
    std::uint32_t cols = 1024;
    std::uint32_t page_bytes = 8192;
    double clock_ghz = 1.2;
    std::uint32_t dq_bits = 8;

    std::uint32_t n_banks() const noexcept { return n_chips * bank_groups * banks_per_group; }
    // One bit-serial lane per bitline of an open row in every bank.
    std::uint64_t lanes() const noexcept { return std::uint64_t{n_banks()} * page_bytes * 8; }
    void validate() const;
};

struct DramTiming {
    std::uint32_t nRCD = 18;
    std::uint32_t nRAS = 39;
    std::uint32_t nRP = 18;
    std::uint32_t nCCD_S = 4;
    std::uint32_t nCCD_L = 6;
    std::uint32_t nFAW = 40;
    std::uint32_t nCL = 18;
    std::uint32_t nWR = 18;
    std::uint32_t nCCD = 4;

    void validate() const;
};

struct BitSerialCostModel {
    std::uint32_t c_mul = 13;
    std::uint32_t c_add = 8;
    double softmax_cycles_per_elem = 4.0;
    double compare_cycles_per_elem = 1.0;

    std::uint64_t mul_aaps(std::uint32_t bits) const noexcept {
        return std::uint64_t{c_mul} * bits * bits;
    }
    std::uint64_t add_aaps(std::uint32_t bits) const noexcept { return std::uint64_t{c_add} * bits; }
    void validate() const;
};

struct PimParams {
    DramGeometry geo;
    DramTiming timing;
    BitSerialCostModel cost;

    // One activate-activate-precharge triple.
    std::uint32_t aap_cycles() const noexcept { return timing.nRAS + timing.nRP; }
    void validate() const;
};

// Cycle counts by where they are spent, plus activity counters for energy.
struct PimCost {
    double compute_cycles = 0.0;    // bit-serial AAP sequences
    double layout_cycles = 0.0;     // transpose unit
    double near_bank_cycles = 0.0;  // softmax, accumulation, threshold compare
    double io_cycles = 0.0;         // plain DRAM reads/writes
    std::uint64_t bank_aaps = 0;    // AAPs summed over all banks
    std::uint64_t rw_bytes = 0;

    double cycles() const noexcept {
        return compute_cycles + layout_cycles + near_bank_cycles + io_cycles;
    }
    double seconds(const DramGeometry& geo) const noexcept { return cycles() / (geo.clock_ghz * 1e9); }

    PimCost& operator+=(const PimCost& o);
    friend PimCost operator+(PimCost a, const PimCost& b) { return a += b; }
    PimCost scaled(std::uint64_t times) const;
};

// bytes * 8 / (64 * N_bank) cycles.
PimCost layout_cost(std::uint64_t bytes, const DramGeometry& geo);

// m x k by k x n. Waves = ceil(m*k*n / lanes), each costing
// mul_aaps(bits) + add_aaps(2*bits) AAPs; both operands pay layout.
PimCost bitserial_gemm_cost(std::uint64_t m, std::uint64_t k, std::uint64_t n, std::uint32_t bits,
                            const PimParams& p);

struct MhaCost {
    PimCost score;    // layout of replicated Q, Q .* K
    PimCost softmax;  // near-bank accumulation and softmax
    PimCost output;   // layout of S, S .* V, reduction tree over L

    PimCost total() const { return score + softmax + output; }
};

MhaCost mha_cost(std::uint64_t seq_len, std::uint64_t dim_e, std::uint64_t n_heads,
                 std::uint32_t bits, const PimParams& p, std::uint64_t batch = 1);

// Four dim_e x dim_e projections.
PimCost qkvo_cost(std::uint64_t dim_e, std::uint32_t bits, const PimParams& p,
                  std::uint64_t batch = 1);

// `count` independent m x k by k x n products sharing the left operand, packed
// into common waves.
PimCost batched_gemm_cost(std::uint64_t count, std::uint64_t m, std::uint64_t k, std::uint64_t n,
                          std::uint32_t bits, const PimParams& p);

// dim_e -> dim_lr -> dim_h, then one compare per hidden neuron. With
// n_experts > 1 the predictors of all routed experts run batched.
PimCost predictor_cost(std::uint64_t dim_e, std::uint64_t dim_lr, std::uint64_t dim_h,
                       std::uint32_t bits, const PimParams& p, std::uint64_t batch = 1,
                       std::uint64_t n_experts = 1);

PimCost router_cost(std::uint64_t dim_e, std::uint64_t n_expert, std::uint32_t bits,
                    const PimParams& p, std::uint64_t batch = 1);

// Plain write of `bytes` into one row: nRCD + bursts * nCCD + nWR + nRP, with
// BL8 bursts of n_chips * dq_bits bytes.
PimCost kv_write_cost(std::uint64_t bytes, const PimParams& p);

}  // namespace slim::pim
