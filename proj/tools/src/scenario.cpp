#include "scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "slim/error.hpp"
#include "slim/report.hpp"

namespace slim::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string strip_family(const std::string& name, const std::string& family) {
    const std::string prefix = family + ".";
    return name.rfind(prefix, 0) == 0 ? name.substr(prefix.size()) : name;
}

// Reads keys out of one JSON object and remembers which ones were used, so
// leftovers can be reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void opt(const std::string& key, T& dst) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        dst = convert<T>(j_.at(key), where_ + "." + key);
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) {
                throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
            }
        }
    }

    template <typename T>
    static T convert(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where + ": expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_unsigned()) {
                throw ConfigError(where + ": expected a nonnegative integer");
            }
            const auto u = v.get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
                throw ConfigError(where + ": value out of range");
            }
            return static_cast<T>(u);
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + ": expected a number");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            return std::filesystem::path(convert<std::string>(v, where));
        } else {
            static_assert(sizeof(T) == 0, "unsupported field type");
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(Fields::convert<double>(x, where));
    return out;
}

void check_fractions(const std::vector<double>& xs, const std::string& where) {
    if (xs.empty()) throw ConfigError(where + ": must not be empty");
    for (double x : xs) {
        if (!(x >= 0.0 && x < 1.0)) throw ConfigError(where + ": values must lie in [0, 1)");
    }
}

model::AttnScale parse_attn_scale(const std::string& s) {
    if (s == "head_dim") return model::AttnScale::kHeadDim;
    if (s == "model_dim") return model::AttnScale::kModelDim;
    throw ConfigError("model.attn_scale: expected 'head_dim' or 'model_dim'");
}

ssd::PeLevel parse_level(const std::string& s) {
    if (s == "die") return ssd::PeLevel::kDie;
    if (s == "channel" || s == "ch") return ssd::PeLevel::kChannel;
    throw ConfigError("pe_level: expected 'die' or 'channel', got '" + s + "'");
}

model::ModelConfig parse_model(const json& v, std::string& preset_name) {
    if (v.is_string()) {
        preset_name = strip_family(v.get<std::string>(), "model");
        return model_preset(preset_name);
    }
    Fields f(v, "model");
    model::ModelConfig m;
    preset_name = "custom";
    if (f.has("preset")) {
        f.opt("preset", preset_name);
        preset_name = strip_family(preset_name, "model");
        m = model_preset(preset_name);
    }
    f.opt("n_dec", m.n_dec);
    f.opt("dim_e", m.dim_e);
    f.opt("dim_h", m.dim_h);
    f.opt("n_heads", m.n_heads);
    f.opt("n_expert", m.n_expert);
    f.opt("top_k", m.top_k);
    f.opt("seq_len", m.seq_len);
    f.opt("batch", m.batch);
    if (f.has("attn_scale")) {
        std::string s;
        f.opt("attn_scale", s);
        m.attn_scale = parse_attn_scale(s);
    }
    f.finish();
    return m;
}

void parse_geometry(const json& v, ssd::SsdGeometry& g) {
    Fields f(v, "ssd.geometry");
    f.opt("n_ch", g.n_ch);
    f.opt("chips_per_ch", g.chips_per_ch);
    f.opt("dies_per_chip", g.dies_per_chip);
    f.opt("planes_per_die", g.planes_per_die);
    f.opt("blocks_per_plane", g.blocks_per_plane);
    f.opt("pages_per_block", g.pages_per_block);
    f.opt("page_bytes", g.page_bytes);
    f.finish();
}

void parse_timing(const json& v, ssd::NandTiming& t) {
    Fields f(v, "ssd.timing");
    f.opt("t_r_us", t.t_r_us);
    f.opt("t_prog_us", t.t_prog_us);
    f.opt("ch_bus_mbps", t.ch_bus_mbps);
    f.opt("pe_macs", t.pe_macs);
    f.opt("pe_clock_ghz", t.pe_clock_ghz);
    f.opt("die_bw_gbps", t.die_bw_gbps);
    f.opt("ftl_us", t.ftl_us);
    f.opt("onchip_bus_gbps", t.onchip_bus_gbps);
    f.opt("psum_bytes", t.psum_bytes);
    f.finish();
}

// "die.slc", or {"pe_level": "die", "ssd": "ssd.slc", "geometry": {..}, "timing": {..}}
DesignSpec parse_design(const json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        const auto dot = s.find('.');
        if (dot == std::string::npos) {
            throw ConfigError("designs: expected '<pe_level>.<nand>', got '" + s + "'");
        }
        return ssd_preset(s.substr(dot + 1), parse_level(s.substr(0, dot)));
    }
    Fields f(v, "designs[]");
    std::string level = "die";
    std::string nand = "slc";
    f.opt("pe_level", level);
    f.opt("ssd", nand);
    DesignSpec d = ssd_preset(strip_family(nand, "ssd"), parse_level(level));
    bool edited = false;
    if (f.has("geometry")) {
        parse_geometry(f.raw("geometry"), d.geo);
        edited = true;
    }
    if (f.has("timing")) {
        parse_timing(f.raw("timing"), d.timing);
        edited = true;
    }
    if (f.has("name")) {
        f.opt("name", d.name);
    } else if (edited) {
        d.name += "-CUSTOM";
    }
    f.finish();
    d.geo.validate();
    d.timing.validate();
    return d;
}

pim::PimParams parse_dram(const json& v) {
    if (v.is_string()) return dram_preset(v.get<std::string>());
    Fields f(v, "dram");
    pim::PimParams p;
    if (f.has("preset")) {
        std::string name;
        f.opt("preset", name);
        p = dram_preset(name);
    }
    if (f.has("geometry")) {
        Fields g(f.raw("geometry"), "dram.geometry");
        g.opt("n_chips", p.geo.n_chips);
        g.opt("bank_groups", p.geo.bank_groups);
        g.opt("banks_per_group", p.geo.banks_per_group);
        g.opt("rows", p.geo.rows);
        g.opt("cols", p.geo.cols);
        g.opt("page_bytes", p.geo.page_bytes);
        g.opt("clock_ghz", p.geo.clock_ghz);
        g.opt("dq_bits", p.geo.dq_bits);
        g.finish();
    }
    if (f.has("timing")) {
        Fields t(f.raw("timing"), "dram.timing");
        t.opt("nRCD", p.timing.nRCD);
        t.opt("nRAS", p.timing.nRAS);
        t.opt("nRP", p.timing.nRP);
        t.opt("nCCD_S", p.timing.nCCD_S);
        t.opt("nCCD_L", p.timing.nCCD_L);
        t.opt("nFAW", p.timing.nFAW);
        t.opt("nCL", p.timing.nCL);
        t.opt("nWR", p.timing.nWR);
        t.opt("nCCD", p.timing.nCCD);
        t.finish();
    }
    if (f.has("cost")) {
        Fields c(f.raw("cost"), "dram.cost");
        c.opt("c_mul", p.cost.c_mul);
        c.opt("c_add", p.cost.c_add);
        c.opt("softmax_cycles_per_elem", p.cost.softmax_cycles_per_elem);
        c.opt("compare_cycles_per_elem", p.cost.compare_cycles_per_elem);
        c.finish();
    }
    f.finish();
    p.validate();
    return p;
}

EnergyConstants parse_energy(const json& v) {
    Fields f(v, "energy");
    EnergyConstants k;
    f.opt("nand_read_pj_per_byte", k.nand_read_pj_per_byte);
    f.opt("ch_bus_pj_per_byte", k.ch_bus_pj_per_byte);
    f.opt("onchip_bus_pj_per_byte", k.onchip_bus_pj_per_byte);
    f.opt("pcie_pj_per_byte", k.pcie_pj_per_byte);
    f.opt("dram_rw_pj_per_byte", k.dram_rw_pj_per_byte);
    f.opt("pim_pj_per_bank_aap", k.pim_pj_per_bank_aap);
    f.opt("near_bank_pj_per_bank_cycle", k.near_bank_pj_per_bank_cycle);
    f.opt("pe_die_pj_per_mac", k.pe_die_pj_per_mac);
    f.opt("pe_ch_pj_per_mac", k.pe_ch_pj_per_mac);
    f.opt("host_watts", k.host_watts);
    f.finish();
    k.validate();
    return k;
}

sys::BaselineConfig baseline_of_kind(const std::string& kind) {
    if (kind == "ssd_gpu") return sys::BaselineConfig::ssd_gpu();
    if (kind == "dram_gpu") return sys::BaselineConfig::dram_gpu();
    throw ConfigError("baselines: unknown kind '" + kind + "'");
}

sys::BaselineConfig parse_baseline(const json& v) {
    if (v.is_string()) return baseline_of_kind(v.get<std::string>());
    Fields f(v, "baselines[]");
    std::string kind;
    if (!f.has("kind")) throw ConfigError("baselines[]: 'kind' is required");
    f.opt("kind", kind);
    sys::BaselineConfig b = baseline_of_kind(kind);
    f.opt("link_gbps", b.link_gbps);
    f.opt("source_gbps", b.source_gbps);
    f.opt("gpu_tflops", b.gpu_tflops);
    f.opt("bytes_per_weight", b.bytes_per_weight);
    f.finish();
    b.validate();
    return b;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

}  // namespace

model::ModelConfig model_preset(const std::string& raw_name) {
    const std::string name = strip_family(raw_name, "model");
    model::ModelConfig m;
    m.seq_len = 2048;
    if (name == "llama2_7b") {
        m.n_dec = 32, m.dim_e = 4096, m.dim_h = 11008, m.n_heads = 32;
    } else if (name == "llama2_13b") {
        m.n_dec = 40, m.dim_e = 5120, m.dim_h = 13824, m.n_heads = 40;
    } else if (name == "mixtral_8x7b") {
        m.n_dec = 32, m.dim_e = 4096, m.dim_h = 14336, m.n_heads = 32;
        m.n_expert = 8, m.top_k = 2;
    } else if (name == "deepseek_16b") {
        m.n_dec = 24, m.dim_e = 2048, m.dim_h = 1408, m.n_heads = 16;
        m.n_expert = 64, m.top_k = 8;
    } else if (name == "toy") {
        m = model::ModelConfig{};
    } else {
        throw ConfigError("unknown model preset '" + raw_name + "'");
    }
    return m;
}

std::vector<std::string> model_preset_names() {
    return {"llama2_7b", "llama2_13b", "mixtral_8x7b", "deepseek_16b", "toy"};
}

DesignSpec ssd_preset(const std::string& raw_nand, ssd::PeLevel level) {
    const std::string nand = strip_family(raw_nand, "ssd");
    if (nand != "slc" && nand != "tlc") throw ConfigError("unknown ssd preset '" + raw_nand + "'");
    const sys::DesignPoint p = sys::design_point(level, nand);
    return DesignSpec{p.name, p.nand, p.geo, p.timing};
}

pim::PimParams dram_preset(const std::string& raw_name) {
    if (strip_family(raw_name, "dram") != "ddr4_2400") {
        throw ConfigError("unknown dram preset '" + raw_name + "'");
    }
    return pim::PimParams{};
}

ScenarioConfig parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
    Fields f(doc, "config");
    ScenarioConfig c;
    f.opt("scenario", c.scenario);
    f.opt("seed", c.seed);

    if (!f.has("model")) throw ConfigError("config: 'model' is required");
    c.model = parse_model(f.raw("model"), c.model_preset);
    c.model.seed = c.seed;
    c.model.validate();

    if (f.has("designs")) {
        const json& arr = f.raw("designs");
        if (!arr.is_array()) throw ConfigError("designs: expected an array");
        for (const auto& d : arr) c.designs.push_back(parse_design(d));
    } else {
        for (auto level : {ssd::PeLevel::kChannel, ssd::PeLevel::kDie}) {
            for (const char* nand : {"slc", "tlc"}) c.designs.push_back(ssd_preset(nand, level));
        }
    }

    if (f.has("dram")) c.pim = parse_dram(f.raw("dram"));
    if (f.has("energy")) c.energy = parse_energy(f.raw("energy"));

    if (f.has("sparsity")) c.sparsity = number_list(f.raw("sparsity"), "sparsity");
    check_fractions(c.sparsity, "sparsity");

    if (f.has("scheduler")) {
        std::string s;
        f.opt("scheduler", s);
        if (s == "pipelined") {
            c.scheduler = sys::Scheduler::kPipelined;
        } else if (s == "sequential") {
            c.scheduler = sys::Scheduler::kSequential;
        } else {
            throw ConfigError("scheduler: expected 'pipelined' or 'sequential'");
        }
    }
    f.opt("n_tokens", c.n_tokens);
    if (c.n_tokens == 0) throw ConfigError("n_tokens: must be >= 1");
    f.opt("weight_bits", c.weight_bits);
    if (c.weight_bits == 0 || c.weight_bits % 8 != 0) {
        throw ConfigError("weight_bits: must be a positive multiple of 8");
    }
    f.opt("dim_lr", c.sim_dim_lr);

    if (f.has("baselines")) {
        const json& arr = f.raw("baselines");
        if (!arr.is_array()) throw ConfigError("baselines: expected an array");
        for (const auto& b : arr) c.baselines.push_back(parse_baseline(b));
    } else {
        c.baselines = {sys::BaselineConfig::ssd_gpu(), sys::BaselineConfig::dram_gpu()};
    }

    if (f.has("train")) {
        Fields t(f.raw("train"), "train");
        t.opt("calib_tokens", c.train.calib_tokens);
        t.opt("heldout_tokens", c.train.heldout_tokens);
        t.opt("dim_lr", c.train.dim_lr);
        t.opt("epochs", c.train.options.epochs);
        t.opt("lr", c.train.options.lr);
        t.opt("divergence_factor", c.train.options.divergence_factor);
        if (t.has("targets")) c.train.targets = number_list(t.raw("targets"), "train.targets");
        t.finish();
    }
    check_fractions(c.train.targets, "train.targets");
    if (c.train.calib_tokens == 0 || c.train.heldout_tokens == 0) {
        throw ConfigError("train: token counts must be >= 1");
    }
    if (c.train.dim_lr > std::min(c.model.dim_e, c.model.dim_h)) {
        throw ConfigError("train.dim_lr: exceeds min(dim_e, dim_h)");
    }

    if (f.has("paths")) {
        Fields p(f.raw("paths"), "paths");
        p.opt("model", c.paths.model);
        p.opt("predictor", c.paths.predictor);
        p.opt("thresholds", c.paths.thresholds);
        p.finish();
        c.paths.model = resolve(c.paths.model, base_dir);
        c.paths.predictor = resolve(c.paths.predictor, base_dir);
        c.paths.thresholds = resolve(c.paths.thresholds, base_dir);
    }
    if (f.has("output")) {
        Fields o(f.raw("output"), "output");
        o.opt("dir", c.output.dir);
        o.opt("csv", c.output.csv);
        o.opt("json", c.output.json);
        o.opt("trace", c.output.trace);
        o.finish();
    }
    f.finish();
    return c;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_json_file(path), path.parent_path());
}

std::vector<ScenarioConfig> load_scenarios(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    std::vector<ScenarioConfig> out;
    if (doc.is_object() && doc.contains("scenarios")) {
        if (doc.size() != 1) throw ConfigError("config: 'scenarios' must be the only key");
        const json& arr = doc.at("scenarios");
        if (!arr.is_array() || arr.empty()) {
            throw ConfigError("scenarios: expected a non-empty array");
        }
        for (const auto& s : arr) out.push_back(parse_scenario(s, path.parent_path()));
    } else {
        out.push_back(parse_scenario(doc, path.parent_path()));
    }
    return out;
}

ordered_json resolved_json(const ScenarioConfig& c) {
    ordered_json j;
    j["scenario"] = c.scenario;
    j["seed"] = c.seed;
    const auto& m = c.model;
    j["model"] = {{"preset", c.model_preset},
                  {"n_dec", m.n_dec},
                  {"dim_e", m.dim_e},
                  {"dim_h", m.dim_h},
                  {"n_heads", m.n_heads},
                  {"n_expert", m.n_expert},
                  {"top_k", m.top_k},
                  {"seq_len", m.seq_len},
                  {"batch", m.batch},
                  {"attn_scale",
                   m.attn_scale == model::AttnScale::kHeadDim ? "head_dim" : "model_dim"}};
    ordered_json designs = ordered_json::array();
    for (const auto& d : c.designs) {
        designs.push_back(
            {{"name", d.name},
             {"nand", d.nand},
             {"pe_level", ssd::to_string(d.timing.pe_level)},
             {"geometry",
              {{"n_ch", d.geo.n_ch},
               {"chips_per_ch", d.geo.chips_per_ch},
               {"dies_per_chip", d.geo.dies_per_chip},
               {"planes_per_die", d.geo.planes_per_die},
               {"blocks_per_plane", d.geo.blocks_per_plane},
               {"pages_per_block", d.geo.pages_per_block},
               {"page_bytes", d.geo.page_bytes}}},
             {"timing",
              {{"t_r_us", d.timing.t_r_us},
               {"t_prog_us", d.timing.t_prog_us},
               {"ch_bus_mbps", d.timing.ch_bus_mbps},
               {"pe_macs", d.timing.pe_macs},
               {"pe_clock_ghz", d.timing.pe_clock_ghz},
               {"die_bw_gbps", d.timing.die_bw_gbps},
               {"ftl_us", d.timing.ftl_us},
               {"onchip_bus_gbps", d.timing.onchip_bus_gbps},
               {"psum_bytes", d.timing.psum_bytes}}}});
    }
    j["designs"] = designs;
    const auto& g = c.pim.geo;
    const auto& t = c.pim.timing;
    j["dram"] = {{"geometry",
                  {{"n_chips", g.n_chips},
                   {"bank_groups", g.bank_groups},
                   {"banks_per_group", g.banks_per_group},
                   {"rows", g.rows},
                   {"cols", g.cols},
                   {"page_bytes", g.page_bytes},
                   {"clock_ghz", g.clock_ghz},
                   {"dq_bits", g.dq_bits}}},
                 {"timing",
                  {{"nRCD", t.nRCD},
                   {"nRAS", t.nRAS},
                   {"nRP", t.nRP},
                   {"nCCD_S", t.nCCD_S},
                   {"nCCD_L", t.nCCD_L},
                   {"nFAW", t.nFAW},
                   {"nCL", t.nCL},
                   {"nWR", t.nWR},
                   {"nCCD", t.nCCD}}},
                 {"cost",
                  {{"c_mul", c.pim.cost.c_mul},
                   {"c_add", c.pim.cost.c_add},
                   {"softmax_cycles_per_elem", c.pim.cost.softmax_cycles_per_elem},
                   {"compare_cycles_per_elem", c.pim.cost.compare_cycles_per_elem}}}};
    const auto& k = c.energy;
    j["energy"] = {{"nand_read_pj_per_byte", k.nand_read_pj_per_byte},
                   {"ch_bus_pj_per_byte", k.ch_bus_pj_per_byte},
                   {"onchip_bus_pj_per_byte", k.onchip_bus_pj_per_byte},
                   {"pcie_pj_per_byte", k.pcie_pj_per_byte},
                   {"dram_rw_pj_per_byte", k.dram_rw_pj_per_byte},
                   {"pim_pj_per_bank_aap", k.pim_pj_per_bank_aap},
                   {"near_bank_pj_per_bank_cycle", k.near_bank_pj_per_bank_cycle},
                   {"pe_die_pj_per_mac", k.pe_die_pj_per_mac},
                   {"pe_ch_pj_per_mac", k.pe_ch_pj_per_mac},
                   {"host_watts", k.host_watts}};
    j["sparsity"] = c.sparsity;
    j["scheduler"] = sys::to_string(c.scheduler);
    j["n_tokens"] = c.n_tokens;
    j["weight_bits"] = c.weight_bits;
    j["dim_lr"] = c.sim_dim_lr;
    ordered_json baselines = ordered_json::array();
    for (const auto& b : c.baselines) {
        baselines.push_back({{"kind", sys::to_string(b.kind)},
                             {"link_gbps", b.link_gbps},
                             {"source_gbps", b.source_gbps},
                             {"gpu_tflops", b.gpu_tflops},
                             {"bytes_per_weight", b.bytes_per_weight}});
    }
    j["baselines"] = baselines;
    j["train"] = {{"calib_tokens", c.train.calib_tokens},
                  {"heldout_tokens", c.train.heldout_tokens},
                  {"dim_lr", c.train.dim_lr},
                  {"epochs", c.train.options.epochs},
                  {"lr", c.train.options.lr},
                  {"divergence_factor", c.train.options.divergence_factor},
                  {"targets", c.train.targets}};
    j["paths"] = {{"model", c.paths.model.generic_string()},
                  {"predictor", c.paths.predictor.generic_string()},
                  {"thresholds", c.paths.thresholds.generic_string()}};
    return j;
}

std::string config_hash(const ordered_json& resolved) {
    return report::hex64(report::fnv1a64(resolved.dump()));
}

}  // namespace slim::cli
