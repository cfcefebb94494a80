#include <random>

#include <benchmark/benchmark.h>

#include "slim/model.hpp"
#include "slim/numerics.hpp"
#include "slim/ssd.hpp"
#include "slim/system.hpp"

namespace {

slim::Matrix random_matrix(std::size_t r, std::size_t c, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    slim::Matrix m(r, c);
    for (double& v : m.data()) v = d(rng);
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_matrix(n, n, 1);
    const auto b = random_matrix(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(slim::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_TruncatedSvd(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto m = random_matrix(4 * n, n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(slim::truncated_svd(m, n / 4));
}
BENCHMARK(BM_TruncatedSvd)->Arg(32)->Arg(64)->Arg(128);

void BM_MaskedFfn(benchmark::State& state) {
    const std::size_t dim_e = 256, dim_h = 1024;
    const auto x = random_matrix(1, dim_e, 4);
    const auto wg = random_matrix(dim_h, dim_e, 5);
    const auto wu = random_matrix(dim_h, dim_e, 6);
    const auto wd = random_matrix(dim_e, dim_h, 7);
    slim::model::NeuronMask mask(dim_h);
    for (std::size_t j = 0; j < dim_h; j += 2) mask.set(j);
    for (auto _ : state) benchmark::DoNotOptimize(slim::model::ffn_forward_masked(x, wg, wu, wd, mask));
}
BENCHMARK(BM_MaskedFfn);

slim::model::ModelConfig llama7b() {
    slim::model::ModelConfig m;
    m.n_dec = 32, m.dim_e = 4096, m.dim_h = 11008, m.n_heads = 32, m.seq_len = 2048;
    return m;
}

void BM_MapWeights(benchmark::State& state) {
    const auto cfg = llama7b();
    const auto geo = slim::ssd::slc_geometry();
    for (auto _ : state) benchmark::DoNotOptimize(slim::ssd::map_weights(cfg, geo));
}
BENCHMARK(BM_MapWeights)->Unit(benchmark::kMillisecond);

void BM_FfnPass(benchmark::State& state) {
    auto cfg = llama7b();
    cfg.n_dec = 1;
    const auto dp = slim::sys::design_point(slim::ssd::PeLevel::kDie, "slc");
    const auto layout = slim::ssd::map_weights(cfg, dp.geo);
    const double s = static_cast<double>(state.range(0)) / 100.0;
    const auto masks = slim::sys::sparsity_masks(cfg, 0, s, 1);
    const auto txns = slim::ssd::generate_read_transactions(layout, masks);
    slim::ssd::FfnPassParams params;
    params.dim_e = cfg.dim_e;
    for (auto _ : state) {
        benchmark::DoNotOptimize(slim::ssd::simulate_ffn_pass(txns, dp.timing, dp.geo, params));
    }
}
BENCHMARK(BM_FfnPass)->Arg(0)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
