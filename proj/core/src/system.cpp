#include "slim/system.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "slim/error.hpp"

namespace slim::sys {

std::string to_string(Scheduler s) {
    return s == Scheduler::kSequential ? "sequential" : "pipelined";
}

std::string to_string(BaselineKind k) { return k == BaselineKind::kSsdGpu ? "ssd_gpu" : "dram_gpu"; }

RunResult run_sequential(const PhaseTimes& phases, std::size_t n_tokens) {
    if (n_tokens == 0) throw ConfigError("run_sequential: n_tokens must be >= 1");
    const double per_token = phases.t_dram + phases.t_ssd;
    RunResult r;
    r.latency_s = static_cast<double>(n_tokens) * per_token;
    r.tok_per_s = per_token > 0 ? 1.0 / per_token : std::numeric_limits<double>::infinity();
    return r;
}

RunResult run_pipelined(const PhaseTimes& phases, std::size_t n_tokens, std::size_t n_streams) {
    if (n_tokens == 0) throw ConfigError("run_pipelined: n_tokens must be >= 1");
    if (n_streams == 0) throw ConfigError("run_pipelined: n_streams must be >= 1");
    if (phases.t_dram < 0 || phases.t_ssd < 0) throw ConfigError("run_pipelined: negative phase time");

    struct Stream {
        std::size_t remaining = 0;
        bool on_ssd = false;  // next phase
        double ready = 0.0;
    };
    std::vector<Stream> streams(n_streams);
    for (std::size_t i = 0; i < n_tokens; ++i) ++streams[i % n_streams].remaining;

    double dram_free = 0.0;
    double ssd_free = 0.0;
    double end = 0.0;
    for (;;) {
        std::size_t pick = n_streams;
        double pick_start = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n_streams; ++s) {
            if (streams[s].remaining == 0) continue;
            const double start =
                std::max(streams[s].ready, streams[s].on_ssd ? ssd_free : dram_free);
            if (start < pick_start) {
                pick_start = start;
                pick = s;
            }
        }
        if (pick == n_streams) break;
        Stream& st = streams[pick];
        if (st.on_ssd) {
            ssd_free = pick_start + phases.t_ssd;
            st.ready = ssd_free;
            st.on_ssd = false;
            --st.remaining;
            end = std::max(end, ssd_free);
        } else {
            dram_free = pick_start + phases.t_dram;
            st.ready = dram_free;
            st.on_ssd = true;
        }
    }
    RunResult r;
    r.latency_s = end;
    r.tok_per_s = end > 0 ? static_cast<double>(n_tokens) / end
                          : std::numeric_limits<double>::infinity();
    return r;
}

double pipeline_speedup_bound(const PhaseTimes& phases) {
    const double m = std::max(phases.t_dram, phases.t_ssd);
    return m > 0 ? (phases.t_dram + phases.t_ssd) / m : 1.0;
}

BaselineConfig BaselineConfig::ssd_gpu() { return {BaselineKind::kSsdGpu, 8.0, 19.2, 80.0, 2.0}; }

BaselineConfig BaselineConfig::dram_gpu() {
    return {BaselineKind::kDramGpu, 32.0, 38.4, 80.0, 2.0};
}

void BaselineConfig::validate() const {
    if (!(link_gbps > 0) || !(source_gbps > 0) || !(gpu_tflops > 0) || !(bytes_per_weight > 0)) {
        throw ConfigError("baseline: bandwidths, compute rate and weight size must be positive");
    }
}

BaselineResult run_baseline(const BaselineConfig& cfg, const model::ModelConfig& m,
                            double sparsity, const EnergyConstants& k, TraceSink* sink) {
    cfg.validate();
    m.validate();
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("run_baseline: sparsity outside [0, 1)");

    const double n_dec = static_cast<double>(m.n_dec);
    const double dim_e = static_cast<double>(m.dim_e);
    const double dim_h = static_cast<double>(m.dim_h);
    const double active_experts = static_cast<double>(m.top_k);
    const double ffn_elems = n_dec * active_experts * 3.0 * dim_e * dim_h;

    BaselineResult r;
    r.bytes_per_token = (1.0 - sparsity) * ffn_elems * cfg.bytes_per_weight;
    r.t_transfer = r.bytes_per_token / (std::min(cfg.link_gbps, cfg.source_gbps) * 1e9);
    double flops = 4.0 * dim_e * dim_e + (1.0 - sparsity) * active_experts * 3.0 * dim_e * dim_h +
                   2.0 * static_cast<double>(m.seq_len) * dim_e;
    if (m.is_moe()) flops += static_cast<double>(m.n_expert) * dim_e;
    flops *= 2.0 * n_dec * static_cast<double>(m.batch);
    r.t_compute = flops / (cfg.gpu_tflops * 1e12);
    r.latency_s = r.t_transfer + r.t_compute;
    r.tok_per_s = 1.0 / r.latency_s;

    TotalsSink totals;
    TeeSink tee(&totals, sink);
    const auto bytes = static_cast<std::uint64_t>(std::llround(r.bytes_per_token));
    if (cfg.kind == BaselineKind::kSsdGpu) {
        tee.record({0.0, "ssd", 0, ev::kNandRead, bytes, 0});
        tee.record({0.0, "ssd", 0, ev::kChXfer, bytes, 0});
    } else {
        tee.record({0.0, "dram", 0, ev::kDramRw, bytes, 0});
    }
    tee.record({0.0, "link", 0, ev::kPcie, bytes, 0});
    tee.record({r.t_transfer * 1e9, "host", 0, ev::kHostBusy, 0,
                static_cast<std::uint64_t>(std::llround(r.latency_s * 1e9))});
    r.energy = energy_report(totals, k);
    return r;
}

DesignPoint design_point(ssd::PeLevel level, const std::string& nand) {
    DesignPoint d;
    if (nand == "slc") {
        d.geo = ssd::slc_geometry();
        d.timing = ssd::slc_timing(level);
    } else if (nand == "tlc") {
        d.geo = ssd::tlc_geometry();
        d.timing = ssd::tlc_timing(level);
    } else {
        throw ConfigError("design_point: unknown NAND type '" + nand + "'");
    }
    d.nand = nand;
    std::string upper = nand;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    d.name = std::string("SLIM-") + (level == ssd::PeLevel::kDie ? "DIE" : "CH") + "-" + upper;
    return d;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

// Fisher-Yates with an explicit draw so the order is the same on every
// standard library.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
    return p;
}

std::uint64_t to_ops(double x) { return static_cast<std::uint64_t>(std::llround(x)); }

}  // namespace

std::vector<ssd::ExpertMask> sparsity_masks(const model::ModelConfig& cfg, std::size_t layer,
                                            double sparsity, std::uint64_t seed) {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("sparsity outside [0, 1)");
    std::vector<std::size_t> experts{0};
    if (cfg.is_moe()) {
        experts = permutation(cfg.n_expert, mix(seed, layer, 0xe7));
        experts.resize(cfg.top_k);
        std::sort(experts.begin(), experts.end());
    }
    const auto n_off =
        static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(cfg.dim_h)));
    std::vector<ssd::ExpertMask> masks;
    for (std::size_t e : experts) {
        const auto order = permutation(cfg.dim_h, mix(seed, layer, 0x100 + e));
        model::NeuronMask mask(cfg.dim_h);
        for (std::size_t i = n_off; i < order.size(); ++i) mask.set(order[i]);
        masks.push_back({layer, e, std::move(mask)});
    }
    return masks;
}

SimReport simulate_design(const model::ModelConfig& cfg, const DesignPoint& design,
                          const pim::PimParams& p, const EnergyConstants& k,
                          const SimOptions& opts, TraceSink* sink) {
    cfg.validate();
    p.validate();
    k.validate();
    if (!(opts.sparsity >= 0.0 && opts.sparsity < 1.0)) throw ConfigError("sparsity outside [0, 1)");
    if (opts.weight_bits == 0 || opts.weight_bits % 8 != 0) {
        throw ConfigError("weight_bits must be a positive multiple of 8");
    }
    const std::uint32_t bits = opts.weight_bits;
    const std::uint32_t bytes_per_elem = bits / 8;
    const std::size_t dim_lr = opts.dim_lr ? opts.dim_lr : std::max<std::size_t>(cfg.dim_e / 4, 1);

    const ssd::WeightLayout layout = ssd::map_weights(cfg, design.geo, bytes_per_elem);
    TotalsSink totals;
    TeeSink tee(&totals, sink);

    SimReport rep;
    rep.design = design.name;
    rep.design_level = ssd::to_string(design.timing.pe_level);
    rep.nand = design.nand;
    rep.sparsity = opts.sparsity;

    const double clock_hz = p.geo.clock_ghz * 1e9;
    const auto secs = [&](const pim::PimCost& c) { return c.seconds(p.geo); };
    double now_ns = 0.0;
    double stream_s = 0.0;
    for (std::size_t l = 0; l < cfg.n_dec; ++l) {
        const pim::PimCost qkvo = pim::qkvo_cost(cfg.dim_e, bits, p, cfg.batch);
        const pim::PimCost mha =
            pim::mha_cost(cfg.seq_len, cfg.dim_e, cfg.n_heads, bits, p, cfg.batch).total();
        const pim::PimCost kv =
            pim::kv_write_cost(2ull * cfg.dim_e * bytes_per_elem * cfg.batch, p);
        pim::PimCost router;
        if (cfg.is_moe()) router = pim::router_cost(cfg.dim_e, cfg.n_expert, bits, p, cfg.batch);
        pim::PimCost pred;
        if (opts.sparsity > 0.0) {
            pred = pim::predictor_cost(cfg.dim_e, dim_lr, cfg.dim_h, bits, p, cfg.batch,
                                       cfg.top_k);
        }
        rep.breakdown.qkvo_s += secs(qkvo);
        rep.breakdown.mha_s += secs(mha);
        rep.breakdown.kv_write_s += secs(kv);
        rep.breakdown.router_s += secs(router);
        rep.breakdown.predictor_s += secs(pred);

        const pim::PimCost dram = qkvo + mha + kv + router + pred;
        tee.record({now_ns, "dram", 0, ev::kPimAap, 0, dram.bank_aaps});
        tee.record({now_ns, "dram", 0, ev::kNearBank, 0,
                    to_ops((dram.layout_cycles + dram.near_bank_cycles) * p.geo.n_banks())});
        tee.record({now_ns, "dram", 0, ev::kDramRw, dram.rw_bytes, 0});
        now_ns += dram.cycles() / clock_hz * 1e9;

        const auto masks = sparsity_masks(cfg, l, opts.sparsity, opts.seed);
        const auto txns = ssd::generate_read_transactions(layout, masks);
        const ssd::FfnPassParams params{cfg.dim_e, cfg.batch, bytes_per_elem, now_ns};
        const ssd::FfnPassResult ffn =
            ssd::simulate_ffn_pass(txns, design.timing, design.geo, params, &tee);
        rep.breakdown.ffn_s += ffn.latency_s;
        rep.raw_bytes += ffn.raw_bytes;
        rep.useful_bytes += ffn.useful_bytes;
        stream_s += ffn.stream_s;
        now_ns += ffn.latency_s * 1e9;
    }

    const auto& b = rep.breakdown;
    rep.phases.t_dram = b.qkvo_s + b.mha_s + b.kv_write_s + b.router_s + b.predictor_s;
    rep.phases.t_ssd = b.ffn_s;
    rep.run = opts.scheduler == Scheduler::kSequential
                  ? run_sequential(rep.phases, opts.n_tokens)
                  : run_pipelined(rep.phases, opts.n_tokens);
    rep.latency_s_per_token = rep.run.latency_s / static_cast<double>(opts.n_tokens);
    rep.tok_per_s = rep.run.tok_per_s;
    rep.raw_gbps = stream_s > 0 ? static_cast<double>(rep.raw_bytes) / stream_s / 1e9 : 0.0;
    rep.eff_gbps = b.ffn_s > 0 ? static_cast<double>(rep.useful_bytes) / b.ffn_s / 1e9 : 0.0;
    const double token = rep.phases.t_dram + rep.phases.t_ssd;
    rep.predictor_share = token > 0 ? b.predictor_s / token : 0.0;
    rep.energy = energy_report(totals, k);
    return rep;
}

}  // namespace slim::sys
