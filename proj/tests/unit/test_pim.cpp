#include <cmath>

#include <gtest/gtest.h>

#include "slim/error.hpp"
#include "slim/pim.hpp"

namespace pim = slim::pim;

namespace {

// Closed forms written out by hand for the DDR4-2400 preset.
constexpr double kBanks = 32 * 16;
constexpr double kLanes = kBanks * 8192 * 8;
constexpr double kAap = 39 + 18;

double layout_cycles(double bytes) { return bytes * 8 / (64 * kBanks); }
double gemm_cycles(double m, double k, double n, double bits) {
    const double waves = std::ceil(m * k * n / kLanes);
    return waves * (13 * bits * bits + 8 * 2 * bits) * kAap + layout_cycles((m * k + k * n) * bits / 8);
}

}  // namespace

TEST(Pim, PresetDerivedQuantities) {
    const pim::PimParams p;
    EXPECT_EQ(p.geo.n_banks(), 512u);
    EXPECT_EQ(p.geo.lanes(), static_cast<std::uint64_t>(kLanes));
    EXPECT_EQ(p.aap_cycles(), 57u);
    EXPECT_EQ(p.cost.mul_aaps(8), 13u * 64);
    EXPECT_EQ(p.cost.add_aaps(8), 64u);
}

TEST(Pim, GemmClosedForm) {
    const pim::PimParams p;
    for (auto [m, k, n] : {std::tuple{1.0, 4096.0, 4096.0}, {1.0, 4096.0, 11008.0}, {3.0, 7.0, 5.0},
                           {1.0, 8192.0, 8192.0}}) {
        const auto c = pim::bitserial_gemm_cost(std::uint64_t(m), std::uint64_t(k), std::uint64_t(n), 8, p);
        EXPECT_NEAR(c.cycles(), gemm_cycles(m, k, n, 8), 1e-6);
        EXPECT_EQ(c.bank_aaps,
                  std::uint64_t(std::ceil(m * k * n / kLanes)) * (13 * 64 + 128) * 512);
    }
    EXPECT_THROW(pim::bitserial_gemm_cost(0, 1, 1, 8, p), slim::ShapeError);
}

TEST(Pim, BatchedGemmSharesWaves) {
    const pim::PimParams p;
    const auto one = pim::bitserial_gemm_cost(1, 4096, 1024, 8, p);
    const auto two = pim::batched_gemm_cost(2, 1, 4096, 1024, 8, p);
    EXPECT_EQ(one.compute_cycles, two.compute_cycles);  // both fit in one wave
    EXPECT_NEAR(two.layout_cycles, layout_cycles(4096 + 2 * 4096 * 1024), 1e-9);
}

TEST(Pim, MhaStepsClosedForm) {
    const pim::PimParams p;
    const std::uint64_t L = 2048, d = 4096;
    const auto m = pim::mha_cost(L, d, 32, 8, p);
    const double elems = double(L) * d;
    const double waves = std::ceil(elems / kLanes);
    EXPECT_NEAR(m.score.cycles(), layout_cycles(elems) + waves * 13 * 64 * kAap, 1e-6);
    EXPECT_NEAR(m.softmax.cycles(), 4 * std::ceil(elems / kBanks), 1e-6);
    EXPECT_NEAR(m.output.cycles(),
                layout_cycles(elems) + waves * 13 * 64 * kAap + 11 * waves * 128 * kAap, 1e-6);
    EXPECT_NEAR(m.total().cycles(), m.score.cycles() + m.softmax.cycles() + m.output.cycles(), 1e-6);
}

TEST(Pim, MhaGrowsWithContext) {
    const pim::PimParams p;
    double prev = 0;
    for (std::uint64_t L : {1u, 2u, 64u, 1024u, 4096u}) {
        const double c = pim::mha_cost(L, 4096, 32, 8, p).total().cycles();
        EXPECT_GT(c, prev);
        prev = c;
    }
}

TEST(Pim, PredictorCost) {
    const pim::PimParams p;
    const auto c = pim::predictor_cost(4096, 1024, 11008, 8, p);
    const double expect = gemm_cycles(1, 4096, 1024, 8) + gemm_cycles(1, 1024, 11008, 8) + 11008;
    EXPECT_NEAR(c.cycles(), expect, 1e-6);
    // Dense predictor-free variant only pays the compares.
    EXPECT_NEAR(pim::predictor_cost(4096, 0, 11008, 8, p).cycles(), 11008, 1e-9);
    // Two routed experts cost less than twice one.
    EXPECT_LT(pim::predictor_cost(4096, 1024, 14336, 8, p, 1, 2).cycles(),
              2 * pim::predictor_cost(4096, 1024, 14336, 8, p).cycles());
}

TEST(Pim, QkvoIsFourProjections) {
    const pim::PimParams p;
    EXPECT_NEAR(pim::qkvo_cost(4096, 8, p).cycles(), 4 * gemm_cycles(1, 4096, 4096, 8), 1e-6);
}

TEST(Pim, KvWriteCommandSequence) {
    const pim::PimParams p;
    const auto c = pim::kv_write_cost(8192, p);  // 2 x 4096 bytes
    EXPECT_NEAR(c.io_cycles, 18 + (8192 / 256) * 4 + 18 + 18, 1e-12);
    EXPECT_EQ(c.rw_bytes, 8192u);
    EXPECT_EQ(pim::kv_write_cost(0, p).cycles(), 0.0);
}

TEST(Pim, CostAlgebra) {
    pim::PimCost a;
    a.compute_cycles = 3;
    a.layout_cycles = 1;
    a.bank_aaps = 7;
    const auto b = a.scaled(4);
    EXPECT_EQ(b.compute_cycles, 12);
    EXPECT_EQ(b.bank_aaps, 28u);
    EXPECT_EQ((a + a).cycles(), 8);
    pim::PimParams p;
    EXPECT_NEAR(b.seconds(p.geo), 16 / 1.2e9, 1e-20);
}

TEST(Pim, Validation) {
    pim::PimParams p;
    p.timing.nRAS = 0;
    EXPECT_THROW(p.validate(), slim::ConfigError);
}
