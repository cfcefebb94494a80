#include "slim/pim.hpp"

#include <bit>
#include <cmath>

#include "slim/error.hpp"

namespace slim::pim {

void DramGeometry::validate() const {
    if (n_chips == 0 || bank_groups == 0 || banks_per_group == 0 || rows == 0 || cols == 0 ||
        page_bytes == 0 || dq_bits == 0 || !(clock_ghz > 0)) {
        throw ConfigError("dram geometry: every field must be positive");
    }
}

void DramTiming::validate() const {
    if (nRCD == 0 || nRAS == 0 || nRP == 0 || nCCD_S == 0 || nCCD_L == 0 || nFAW == 0 ||
        nCL == 0 || nWR == 0 || nCCD == 0) {
        throw ConfigError("dram timing: every parameter must be positive");
    }
}

void BitSerialCostModel::validate() const {
    if (c_mul == 0 || c_add == 0 || !(softmax_cycles_per_elem >= 0) ||
        !(compare_cycles_per_elem >= 0)) {
        throw ConfigError("bit-serial cost model: constants must be positive");
    }
}

void PimParams::validate() const {
    geo.validate();
    timing.validate();
    cost.validate();
}

PimCost& PimCost::operator+=(const PimCost& o) {
    compute_cycles += o.compute_cycles;
    layout_cycles += o.layout_cycles;
    near_bank_cycles += o.near_bank_cycles;
    io_cycles += o.io_cycles;
    bank_aaps += o.bank_aaps;
    rw_bytes += o.rw_bytes;
    return *this;
}

PimCost PimCost::scaled(std::uint64_t times) const {
    PimCost c = *this;
    const auto f = static_cast<double>(times);
    c.compute_cycles *= f;
    c.layout_cycles *= f;
    c.near_bank_cycles *= f;
    c.io_cycles *= f;
    c.bank_aaps *= times;
    c.rw_bytes *= times;
    return c;
}

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t operand_bytes(std::uint64_t elems, std::uint32_t bits) {
    return ceil_div(elems * bits, 8);
}

// `waves` rounds of `aaps` AAP triples, each round using every bank.
PimCost aap_rounds(std::uint64_t waves, std::uint64_t aaps, const PimParams& p) {
    PimCost c;
    c.compute_cycles = static_cast<double>(waves * aaps) * p.aap_cycles();
    c.bank_aaps = waves * aaps * p.geo.n_banks();
    return c;
}

}  // namespace

PimCost layout_cost(std::uint64_t bytes, const DramGeometry& geo) {
    PimCost c;
    c.layout_cycles = static_cast<double>(bytes) * 8.0 / (64.0 * geo.n_banks());
    return c;
}

PimCost bitserial_gemm_cost(std::uint64_t m, std::uint64_t k, std::uint64_t n, std::uint32_t bits,
                            const PimParams& p) {
    return batched_gemm_cost(1, m, k, n, bits, p);
}

PimCost batched_gemm_cost(std::uint64_t count, std::uint64_t m, std::uint64_t k, std::uint64_t n,
                          std::uint32_t bits, const PimParams& p) {
    if (count == 0 || m == 0 || k == 0 || n == 0 || bits == 0) {
        throw ShapeError("bitserial_gemm_cost: dimensions and bit width must be positive");
    }
    const std::uint64_t waves = ceil_div(count * m * k * n, p.geo.lanes());
    PimCost c = aap_rounds(waves, p.cost.mul_aaps(bits) + p.cost.add_aaps(2 * bits), p);
    c += layout_cost(operand_bytes(m * k + count * k * n, bits), p.geo);
    return c;
}

MhaCost mha_cost(std::uint64_t seq_len, std::uint64_t dim_e, std::uint64_t n_heads,
                 std::uint32_t bits, const PimParams& p, std::uint64_t batch) {
    if (seq_len == 0 || dim_e == 0 || n_heads == 0 || bits == 0 || batch == 0) {
        throw ShapeError("mha_cost: dimensions must be positive");
    }
    const std::uint64_t elems = batch * seq_len * dim_e;
    const std::uint64_t waves = ceil_div(elems, p.geo.lanes());
    MhaCost m;

    m.score = layout_cost(operand_bytes(elems, bits), p.geo);
    m.score += aap_rounds(waves, p.cost.mul_aaps(bits), p);

    m.softmax.near_bank_cycles =
        p.cost.softmax_cycles_per_elem * static_cast<double>(ceil_div(elems, p.geo.n_banks()));

    const auto depth = static_cast<std::uint64_t>(std::bit_width(seq_len - 1));  // ceil(log2 L)
    m.output = layout_cost(operand_bytes(elems, bits), p.geo);
    m.output += aap_rounds(waves, p.cost.mul_aaps(bits), p);
    m.output += aap_rounds(depth * waves, p.cost.add_aaps(2 * bits), p);
    return m;
}

PimCost qkvo_cost(std::uint64_t dim_e, std::uint32_t bits, const PimParams& p,
                  std::uint64_t batch) {
    return bitserial_gemm_cost(batch, dim_e, dim_e, bits, p).scaled(4);
}

PimCost predictor_cost(std::uint64_t dim_e, std::uint64_t dim_lr, std::uint64_t dim_h,
                       std::uint32_t bits, const PimParams& p, std::uint64_t batch,
                       std::uint64_t n_experts) {
    if (n_experts == 0) throw ShapeError("predictor_cost: n_experts must be >= 1");
    PimCost c;
    if (dim_lr > 0) {
        c += batched_gemm_cost(n_experts, batch, dim_e, dim_lr, bits, p);
        // Each expert's second product has its own left operand (x L_e).
        PimCost second = batched_gemm_cost(n_experts, batch, dim_lr, dim_h, bits, p);
        second.layout_cycles += layout_cost(operand_bytes((n_experts - 1) * batch * dim_lr, bits),
                                            p.geo).layout_cycles;
        c += second;
    }
    c.near_bank_cycles +=
        p.cost.compare_cycles_per_elem * static_cast<double>(n_experts * batch * dim_h);
    return c;
}

PimCost router_cost(std::uint64_t dim_e, std::uint64_t n_expert, std::uint32_t bits,
                    const PimParams& p, std::uint64_t batch) {
    return bitserial_gemm_cost(batch, dim_e, n_expert, bits, p);
}

PimCost kv_write_cost(std::uint64_t bytes, const PimParams& p) {
    PimCost c;
    if (bytes == 0) return c;
    const std::uint64_t burst_bytes = std::uint64_t{p.geo.n_chips} * p.geo.dq_bits;  // BL8
    const std::uint64_t bursts = ceil_div(bytes, burst_bytes);
    c.io_cycles = static_cast<double>(p.timing.nRCD + bursts * p.timing.nCCD + p.timing.nWR +
                                      p.timing.nRP);
    c.rw_bytes = bytes;
    return c;
}

}  // namespace slim::pim
