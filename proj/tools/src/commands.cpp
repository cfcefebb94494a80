#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "slim/checkpoint.hpp"
#include "slim/error.hpp"
#include "slim/model.hpp"
#include "slim/system.hpp"

namespace slim::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
        dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const MappingError*>(&e) ||
        dynamic_cast<const RankError*>(&e)) {
        return kExitConfig;
    }
    if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const NumericError*>(&e)) {
        return kExitNumeric;
    }
    return kExitFailure;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_fixture_shape(const model::ModelConfig& want, const model::ModelConfig& got) {
    if (want.n_dec != got.n_dec || want.dim_e != got.dim_e || want.dim_h != got.dim_h ||
        want.n_heads != got.n_heads || want.n_expert != got.n_expert || want.top_k != got.top_k) {
        throw ConfigError("model fixture shape does not match the configured model");
    }
}

LoadedModel load_model_fixture(const fs::path& path, const model::ModelConfig& want) {
    if (!fs::exists(path)) throw ConfigError("model fixture '" + path.string() + "' not found");
    LoadedModel m = model_from_tensors(load_tensors(path));
    check_fixture_shape(want, m.config);
    m.config.seed = want.seed;
    m.config.seq_len = want.seq_len;
    m.config.attn_scale = want.attn_scale;
    return m;
}

// Fixture from paths.model, else out/model.slimwt when `allow_cached`, else
// freshly synthesized. Synthesized weights are stored and read back so later
// commands see the same f32-rounded values.
LoadedModel obtain_model(const ScenarioConfig& cfg, bool allow_cached) {
    if (!cfg.paths.model.empty()) return load_model_fixture(cfg.paths.model, cfg.model);
    const fs::path cached = cfg.output.dir / "model.slimwt";
    if (allow_cached && fs::exists(cached)) return load_model_fixture(cached, cfg.model);
    spdlog::info("synthesizing model weights (seed {})", cfg.model.seed);
    const auto layers = model::synth_model(cfg.model);
    fs::create_directories(cfg.output.dir);
    save_tensors(cached, model_to_tensors(cfg.model, layers));
    return load_model_fixture(cached, cfg.model);
}

std::size_t predictor_rank(const ScenarioConfig& cfg) {
    return cfg.train.dim_lr > 0 ? cfg.train.dim_lr : pred::default_rank(cfg.model.dim_e);
}

fs::path or_default(const fs::path& p, const fs::path& dir, const char* name) {
    return p.empty() ? dir / name : p;
}

// Mirrors collect_calibration's token schedule: one fresh KV cache per seq_len
// tokens. Returns the stacked per-token outputs.
Matrix decode_tokens(const Matrix& embeds, std::span<const model::LayerWeights> weights,
                     const model::ModelConfig& cfg, const model::DecodeOptions& opts) {
    Matrix out(0, cfg.dim_e);
    std::size_t t = 0;
    while (t < embeds.rows()) {
        model::KVCache cache(cfg.n_dec, cfg.dim_e, cfg.seq_len);
        for (std::size_t i = 0; i < cfg.seq_len && t < embeds.rows(); ++i, ++t) {
            out.append_rows(model::decode_step(embeds.row_block(t, 1), weights, cfg, cache, opts));
        }
    }
    return out;
}

// Keeps held-out tokens disjoint from the calibration stream.
constexpr std::uint64_t kHeldoutSalt = 0x9e3779b97f4a7c15ull;

}  // namespace

TrainOutput cmd_train(const ScenarioConfig& cfg) {
    const LoadedModel m = obtain_model(cfg, /*allow_cached=*/false);
    const std::size_t rank = predictor_rank(cfg);
    spdlog::info("collecting {} calibration tokens", cfg.train.calib_tokens);
    const auto calib = pred::collect_calibration(m.layers, m.config, cfg.train.calib_tokens, cfg.seed);

    TrainOutput out;
    std::vector<double> targets = cfg.train.targets;
    std::sort(targets.begin(), targets.end());
    for (std::size_t l = 0; l < m.config.n_dec; ++l) {
        for (std::size_t e = 0; e < m.layers[l].experts.size(); ++e) {
            const Matrix& w_g = m.layers[l].experts[e].w_g;
            const pred::Predictor init = pred::init_from_svd(w_g, rank);
            pred::TrainResult tr = pred::train(init, calib[l], w_g, cfg.train.options);
            spdlog::info("layer {} expert {}: loss {:.6g} -> {:.6g} over {} epochs", l, e,
                         tr.history.front(), *std::min_element(tr.history.begin(), tr.history.end()),
                         tr.history.size() - 1);
            out.thresholds.push_back(pred::build_threshold_table(tr.predictor, calib[l], targets, l, e));
            out.history.emplace(pred::PredictorKey{l, e}, std::move(tr.history));
            out.predictors.emplace(pred::PredictorKey{l, e}, std::move(tr.predictor));
        }
    }

    const fs::path dir = cfg.output.dir;
    save_tensors(or_default(cfg.paths.predictor, dir, "predictor.slimwt"),
                 pred::predictors_to_tensors(out.predictors));
    write_text(or_default(cfg.paths.thresholds, dir, "thresholds.json"),
               pred::thresholds_to_json(out.thresholds));

    ordered_json log = ordered_json::array();
    for (const auto& [key, hist] : out.history) {
        log.push_back({{"layer", key.first}, {"expert", key.second}, {"loss", hist}});
    }
    write_text(dir / "train_log.json", log.dump(2) + "\n");
    return out;
}

std::vector<InferRow> cmd_infer(const ScenarioConfig& cfg) {
    const fs::path dir = cfg.output.dir;
    const fs::path pred_path = or_default(cfg.paths.predictor, dir, "predictor.slimwt");
    const fs::path thr_path = or_default(cfg.paths.thresholds, dir, "thresholds.json");
    if (!fs::exists(pred_path) || !fs::exists(thr_path)) {
        throw ConfigError("trained predictor not found in '" + dir.string() +
                          "'; run 'slim train' first");
    }
    const LoadedModel m = obtain_model(cfg, /*allow_cached=*/true);
    const pred::PredictorSet preds = pred::predictors_from_tensors(load_tensors(pred_path));
    const auto tables = pred::thresholds_from_json(read_text(thr_path));

    std::map<pred::PredictorKey, const pred::ThresholdTable*> table_of;
    for (const auto& t : tables) table_of[{t.layer, t.expert}] = &t;
    for (std::size_t l = 0; l < m.config.n_dec; ++l) {
        for (std::size_t e = 0; e < m.layers[l].experts.size(); ++e) {
            auto it = preds.find({l, e});
            if (it == preds.end() || !table_of.count({l, e})) {
                throw ConfigError("no predictor for layer " + std::to_string(l) + " expert " +
                                  std::to_string(e));
            }
            if (it->second.dim_e() != m.config.dim_e || it->second.dim_h() != m.config.dim_h) {
                throw ShapeError("predictor shape does not match the model at layer " +
                                 std::to_string(l));
            }
        }
    }

    const Matrix embeds =
        model::synth_embeddings(cfg.train.heldout_tokens, m.config.dim_e, cfg.seed ^ kHeldoutSalt);
    const Matrix dense = decode_tokens(embeds, m.layers, m.config, {});

    std::vector<double> targets = cfg.train.targets;
    targets.push_back(0.0);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    std::vector<InferRow> rows;
    for (double target : targets) {
        std::vector<double> off(m.config.n_dec, 0.0);
        std::vector<double> total(m.config.n_dec, 0.0);
        model::DecodeOptions opts;
        opts.mask = [&](std::size_t layer, std::size_t expert, const Matrix& x) {
            const double t = table_of.at({layer, expert})->threshold_for(target);
            auto mask = pred::predict_mask_union(preds.at({layer, expert}), x, t);
            off[layer] += static_cast<double>(mask.size() - mask.count());
            total[layer] += static_cast<double>(mask.size());
            return mask;
        };
        const Matrix sparse = decode_tokens(embeds, m.layers, m.config, opts);
        InferRow row;
        row.target = target;
        row.mse = mean_squared_error(dense, sparse);
        for (std::size_t l = 0; l < m.config.n_dec; ++l) {
            row.layer_sparsity.push_back(total[l] > 0 ? off[l] / total[l] : 0.0);
        }
        spdlog::info("target {:.2f}: mse {:.6g}", target, row.mse);
        rows.push_back(std::move(row));
    }

    ordered_json j = ordered_json::array();
    std::string csv = "target,mse";
    for (std::size_t l = 0; l < m.config.n_dec; ++l) csv += ",sparsity_layer" + std::to_string(l);
    csv += "\n";
    for (const auto& r : rows) {
        j.push_back({{"target", r.target}, {"mse", r.mse}, {"layer_sparsity", r.layer_sparsity}});
        csv += report::format_number(r.target) + "," + report::format_number(r.mse);
        for (double s : r.layer_sparsity) csv += "," + report::format_number(s);
        csv += "\n";
    }
    write_text(dir / "infer.json", j.dump(2) + "\n");
    write_text(dir / "infer.csv", csv);
    return rows;
}

namespace {

struct SimPoint {
    const ScenarioConfig* cfg = nullptr;
    std::size_t design = 0;  // index into designs, or baselines when is_baseline
    bool is_baseline = false;
    double sparsity = 0.0;
};

std::vector<SimPoint> expand(const ScenarioConfig& cfg) {
    std::vector<SimPoint> pts;
    for (std::size_t d = 0; d < cfg.designs.size(); ++d) {
        for (double s : cfg.sparsity) pts.push_back({&cfg, d, false, s});
    }
    for (std::size_t b = 0; b < cfg.baselines.size(); ++b) {
        for (double s : cfg.sparsity) pts.push_back({&cfg, b, true, s});
    }
    return pts;
}

// Resolved config narrowed to the single point a row describes.
std::string point_hash(const SimPoint& p) {
    ordered_json j = resolved_json(*p.cfg);
    ordered_json chosen = p.is_baseline ? j["baselines"][p.design] : j["designs"][p.design];
    j["designs"] = p.is_baseline ? ordered_json::array() : ordered_json::array({chosen});
    j["baselines"] = p.is_baseline ? ordered_json::array({chosen}) : ordered_json::array();
    j["sparsity"] = ordered_json::array({p.sparsity});
    return config_hash(j);
}

std::string trace_name(const SimPoint& p) {
    const std::string who = p.is_baseline ? sys::to_string(p.cfg->baselines[p.design].kind)
                                          : p.cfg->designs[p.design].name;
    return p.cfg->scenario + "_" + who + "_s" + report::format_number(p.sparsity) + ".jsonl";
}

report::Row run_point(const SimPoint& p, TraceSink* sink) {
    const ScenarioConfig& c = *p.cfg;
    if (p.is_baseline) {
        const auto& b = c.baselines[p.design];
        const auto r = sys::run_baseline(b, c.model, p.sparsity, c.energy, sink);
        return report::row_from(c.scenario, b.kind, p.sparsity, r, point_hash(p));
    }
    const DesignSpec& d = c.designs[p.design];
    sys::SimOptions opts;
    opts.sparsity = p.sparsity;
    opts.scheduler = c.scheduler;
    opts.n_tokens = c.n_tokens;
    opts.weight_bits = c.weight_bits;
    opts.dim_lr = c.sim_dim_lr;
    opts.seed = c.seed;
    const sys::DesignPoint dp{d.name, d.nand, d.geo, d.timing};
    const auto r = sys::simulate_design(c.model, dp, c.pim, c.energy, opts, sink);
    spdlog::debug("{} {} s={}: {:.3f} tok/s", c.scenario, d.name, p.sparsity, r.tok_per_s);
    return report::row_from(c.scenario, r, point_hash(p));
}

}  // namespace

std::vector<report::Row> cmd_simulate(const ScenarioConfig& cfg) {
    std::vector<report::Row> rows;
    for (const SimPoint& p : expand(cfg)) {
        if (cfg.output.trace) {
            const fs::path path = cfg.output.dir / "trace" / trace_name(p);
            fs::create_directories(path.parent_path());
            std::ofstream out(path, std::ios::binary);
            JsonlSink sink(out);
            rows.push_back(run_point(p, &sink));
        } else {
            rows.push_back(run_point(p, nullptr));
        }
    }
    return rows;
}

std::vector<report::Row> cmd_sweep(const std::vector<ScenarioConfig>& cfgs, std::size_t threads) {
    std::vector<SimPoint> pts;
    for (const auto& c : cfgs) {
        auto more = expand(c);
        pts.insert(pts.end(), more.begin(), more.end());
    }
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, pts.size());

    std::vector<report::Row> rows(pts.size());
    std::vector<std::exception_ptr> errors(pts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            try {
                rows[i] = run_point(pts[i], nullptr);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return rows;
}

namespace {

// Dense peak bandwidth per (scenario, level, nand) and the TLC/SLC ratios.
ordered_json bandwidth_summary(const std::vector<report::Row>& rows) {
    ordered_json out = ordered_json::array();
    std::vector<std::string> scenarios;
    for (const auto& r : rows) {
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) {
            scenarios.push_back(r.scenario);
        }
    }
    for (const auto& s : scenarios) {
        ordered_json entry;
        entry["scenario"] = s;
        for (const char* level : {"die", "channel"}) {
            double slc = 0.0;
            double tlc = 0.0;
            for (const auto& r : rows) {
                if (r.scenario != s || r.design_level != level || r.sparsity != 0.0) continue;
                if (r.nand == "slc") slc = r.raw_gbps;
                if (r.nand == "tlc") tlc = r.raw_gbps;
            }
            const std::string lv = level;
            if (slc > 0) entry[lv + "_slc_peak_gbps"] = slc;
            if (tlc > 0) entry[lv + "_tlc_peak_gbps"] = tlc;
            if (slc > 0 && tlc > 0) entry[lv + "_tlc_slc_peak_ratio"] = tlc / slc;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace

void write_reports(const std::vector<report::Row>& rows, const OutputSpec& out) {
    if (out.csv) write_text(out.dir / "report.csv", report::to_csv(rows));
    if (out.json) write_text(out.dir / "report.json", report::to_json(rows));
    write_text(out.dir / "summary.json", bandwidth_summary(rows).dump(2) + "\n");
}

}  // namespace slim::cli
