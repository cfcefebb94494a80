#include "slim/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "slim/error.hpp"

namespace slim {

namespace {

static_assert(std::numeric_limits<float>::is_iec559, "f32 payloads require IEEE-754 floats");

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("SLIMWT1: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError(std::string("SLIMWT1: ") + what + " exceeds u32");
    }
    return static_cast<std::uint32_t>(v);
}

std::string layer_key(std::size_t l, const char* name) {
    return "layer." + std::to_string(l) + "." + name;
}

std::string expert_key(std::size_t l, std::size_t e, const char* name) {
    return "layer." + std::to_string(l) + ".expert." + std::to_string(e) + "." + name;
}

const Matrix& need(const TensorMap& t, const std::string& key) {
    auto it = t.find(key);
    if (it == t.end()) throw FormatError("SLIMWT1: missing tensor '" + key + "'");
    return it->second;
}

}  // namespace

void write_tensors(std::ostream& out, const TensorMap& tensors) {
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, checked_u32(tensors.size(), "tensor count"));
    for (const auto& [name, m] : tensors) {
        put_u32(out, checked_u32(name.size(), "name length"));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, checked_u32(m.rows(), "rows"));
        put_u32(out, checked_u32(m.cols(), "cols"));
        for (double x : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
    if (!out) throw FormatError("SLIMWT1: write failed");
}

TensorMap read_tensors(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw FormatError("SLIMWT1: bad magic");
    }
    TensorMap tensors;
    const std::uint32_t count = get_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(in);
        if (name_len > 4096) throw FormatError("SLIMWT1: implausible name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw FormatError("SLIMWT1: truncated name");
        const std::uint32_t rows = get_u32(in);
        const std::uint32_t cols = get_u32(in);
        std::vector<double> data(static_cast<std::size_t>(rows) * cols);
        for (double& x : data) x = static_cast<double>(std::bit_cast<float>(get_u32(in)));
        if (!tensors.emplace(name, Matrix(rows, cols, std::move(data))).second) {
            throw FormatError("SLIMWT1: duplicate tensor '" + name + "'");
        }
    }
    return tensors;
}

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("SLIMWT1: cannot open " + path.string() + " for writing");
    write_tensors(out, tensors);
}

TensorMap load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("SLIMWT1: cannot open " + path.string());
    return read_tensors(in);
}

TensorMap model_to_tensors(const model::ModelConfig& cfg,
                           const std::vector<model::LayerWeights>& layers) {
    TensorMap t;
    // The seed is not stored; a loaded model is defined by its weights.
    t.emplace("config",
              Matrix(1, 9,
                     {static_cast<double>(cfg.n_dec), static_cast<double>(cfg.dim_e),
                      static_cast<double>(cfg.dim_h), static_cast<double>(cfg.n_heads),
                      static_cast<double>(cfg.n_expert), static_cast<double>(cfg.top_k),
                      static_cast<double>(cfg.seq_len), static_cast<double>(cfg.batch),
                      cfg.attn_scale == model::AttnScale::kHeadDim ? 0.0 : 1.0}));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l];
        t.emplace(layer_key(l, "w_q"), w.w_q);
        t.emplace(layer_key(l, "w_k"), w.w_k);
        t.emplace(layer_key(l, "w_v"), w.w_v);
        t.emplace(layer_key(l, "w_o"), w.w_o);
        if (w.router) t.emplace(layer_key(l, "router"), *w.router);
        for (std::size_t e = 0; e < w.experts.size(); ++e) {
            t.emplace(expert_key(l, e, "w_g"), w.experts[e].w_g);
            t.emplace(expert_key(l, e, "w_u"), w.experts[e].w_u);
            t.emplace(expert_key(l, e, "w_d"), w.experts[e].w_d);
        }
    }
    return t;
}

LoadedModel model_from_tensors(const TensorMap& tensors) {
    const Matrix& c = need(tensors, "config");
    if (c.rows() != 1 || c.cols() != 9) throw FormatError("SLIMWT1: malformed config tensor");
    LoadedModel m;
    auto& cfg = m.config;
    cfg.n_dec = static_cast<std::size_t>(c(0, 0));
    cfg.dim_e = static_cast<std::size_t>(c(0, 1));
    cfg.dim_h = static_cast<std::size_t>(c(0, 2));
    cfg.n_heads = static_cast<std::size_t>(c(0, 3));
    cfg.n_expert = static_cast<std::size_t>(c(0, 4));
    cfg.top_k = static_cast<std::size_t>(c(0, 5));
    cfg.seq_len = static_cast<std::size_t>(c(0, 6));
    cfg.batch = static_cast<std::size_t>(c(0, 7));
    cfg.attn_scale = c(0, 8) == 0.0 ? model::AttnScale::kHeadDim : model::AttnScale::kModelDim;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("SLIMWT1: ") + e.what());
    }

    auto check = [](const Matrix& mat, std::size_t rows, std::size_t cols, const std::string& k) {
        if (mat.rows() != rows || mat.cols() != cols) {
            throw FormatError("SLIMWT1: tensor '" + k + "' has wrong shape");
        }
        return mat;
    };
    m.layers.resize(cfg.n_dec);
    for (std::size_t l = 0; l < cfg.n_dec; ++l) {
        auto& w = m.layers[l];
        for (auto [dst, name] : {std::pair{&w.w_q, "w_q"}, std::pair{&w.w_k, "w_k"},
                                 std::pair{&w.w_v, "w_v"}, std::pair{&w.w_o, "w_o"}}) {
            const auto key = layer_key(l, name);
            *dst = check(need(tensors, key), cfg.dim_e, cfg.dim_e, key);
        }
        if (cfg.is_moe()) {
            const auto key = layer_key(l, "router");
            w.router = check(need(tensors, key), cfg.n_expert, cfg.dim_e, key);
        }
        w.experts.resize(cfg.n_expert);
        for (std::size_t e = 0; e < cfg.n_expert; ++e) {
            auto kg = expert_key(l, e, "w_g");
            auto ku = expert_key(l, e, "w_u");
            auto kd = expert_key(l, e, "w_d");
            w.experts[e].w_g = check(need(tensors, kg), cfg.dim_h, cfg.dim_e, kg);
            w.experts[e].w_u = check(need(tensors, ku), cfg.dim_h, cfg.dim_e, ku);
            w.experts[e].w_d = check(need(tensors, kd), cfg.dim_e, cfg.dim_h, kd);
        }
    }
    return m;
}

}  // namespace slim
