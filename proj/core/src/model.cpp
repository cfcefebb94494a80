#include "slim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "slim/error.hpp"

namespace slim::model {

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
    if (n_dec < 1 || dim_e < 1 || dim_h < 1 || n_heads < 1 || n_expert < 1 || top_k < 1 ||
        seq_len < 1 || batch < 1) {
        fail("all counts must be >= 1");
    }
    if (dim_e % n_heads != 0) fail("dim_e must be divisible by n_heads");
    if (top_k > n_expert) fail("top_k must not exceed n_expert");
}

namespace {

Matrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(rows * cols);
    for (double& x : data) x = dist(rng);
    return Matrix(rows, cols, std::move(data));
}

}  // namespace

std::vector<LayerWeights> synth_model(const ModelConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.dim_e));
    std::vector<LayerWeights> layers(cfg.n_dec);
    for (auto& layer : layers) {
        layer.w_q = gaussian(rng, cfg.dim_e, cfg.dim_e, sd);
        layer.w_k = gaussian(rng, cfg.dim_e, cfg.dim_e, sd);
        layer.w_v = gaussian(rng, cfg.dim_e, cfg.dim_e, sd);
        layer.w_o = gaussian(rng, cfg.dim_e, cfg.dim_e, sd);
        layer.experts.resize(cfg.n_expert);
        for (auto& e : layer.experts) {
            e.w_g = gaussian(rng, cfg.dim_h, cfg.dim_e, sd);
            e.w_u = gaussian(rng, cfg.dim_h, cfg.dim_e, sd);
            e.w_d = gaussian(rng, cfg.dim_e, cfg.dim_h, sd);
        }
        if (cfg.is_moe()) layer.router = gaussian(rng, cfg.n_expert, cfg.dim_e, sd);
    }
    return layers;
}

Matrix synth_embeddings(std::size_t n, std::size_t dim_e, std::uint64_t seed) {
    if (dim_e == 0) throw ShapeError("synth_embeddings: dim_e must be >= 1");
    std::mt19937_64 rng(seed);
    return gaussian(rng, n, dim_e, 1.0 / std::sqrt(static_cast<double>(dim_e)));
}

std::size_t NeuronMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<std::size_t> NeuronMask::active_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < bits_.size(); ++j) {
        if (bits_[j]) idx.push_back(j);
    }
    return idx;
}

NeuronMask& NeuronMask::operator|=(const NeuronMask& other) {
    if (other.size() != size()) throw ShapeError("NeuronMask: size mismatch in union");
    for (std::size_t j = 0; j < bits_.size(); ++j) bits_[j] = bits_[j] || other.bits_[j];
    return *this;
}

bool NeuronMask::is_subset_of(const NeuronMask& other) const {
    if (other.size() != size()) throw ShapeError("NeuronMask: size mismatch in subset test");
    for (std::size_t j = 0; j < bits_.size(); ++j) {
        if (bits_[j] && !other.bits_[j]) return false;
    }
    return true;
}

KVCache::KVCache(std::size_t n_layers, std::size_t dim_e, std::size_t capacity)
    : dim_e_(dim_e), capacity_(capacity), keys_(n_layers, Matrix(0, dim_e)),
      values_(n_layers, Matrix(0, dim_e)) {}

bool KVCache::full() const {
    return std::any_of(keys_.begin(), keys_.end(),
                       [&](const Matrix& k) { return k.rows() >= capacity_; });
}

void KVCache::append(std::size_t layer, const Matrix& k_row, const Matrix& v_row) {
    if (k_row.rows() != 1 || v_row.rows() != 1 || k_row.cols() != dim_e_ ||
        v_row.cols() != dim_e_) {
        throw ShapeError("KVCache::append: expected 1 x dim_e rows");
    }
    if (keys_.at(layer).rows() >= capacity_) {
        throw CapacityError("KVCache: layer " + std::to_string(layer) + " is at capacity " +
                            std::to_string(capacity_));
    }
    keys_[layer].append_rows(k_row);
    values_[layer].append_rows(v_row);
}

Matrix mha_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t n_heads,
                   AttnScale scale_mode) {
    if (n_heads == 0 || q.cols() % n_heads != 0) {
        throw ShapeError("mha_forward: dim_e not divisible by n_heads");
    }
    if (k.cols() != q.cols() || v.cols() != q.cols() || k.rows() != v.rows() || k.rows() == 0) {
        throw ShapeError("mha_forward: Q/K/V shape mismatch");
    }
    const std::size_t head_dim = q.cols() / n_heads;
    const double divisor =
        std::sqrt(static_cast<double>(scale_mode == AttnScale::kHeadDim ? head_dim : q.cols()));

    Matrix out(q.rows(), q.cols());
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * head_dim;
        const Matrix qh = q.col_block(off, head_dim);
        const Matrix kh = k.col_block(off, head_dim);
        const Matrix vh = v.col_block(off, head_dim);
        const Matrix probs = softmax(slim::scale(matmul_bt(qh, kh), 1.0 / divisor), Axis::kRow);
        const Matrix hv = matmul(probs, vh);
        for (std::size_t r = 0; r < out.rows(); ++r) {
            for (std::size_t c = 0; c < head_dim; ++c) out(r, off + c) = hv(r, c);
        }
    }
    return out;
}

Matrix ffn_forward(const Matrix& x, const Matrix& w_g, const Matrix& w_u, const Matrix& w_d) {
    if (w_g.cols() != x.cols() || w_u.cols() != x.cols() || w_g.rows() != w_u.rows() ||
        w_d.cols() != w_g.rows() || w_d.rows() != x.cols()) {
        throw ShapeError("ffn_forward: weight shapes inconsistent with input");
    }
    const Matrix hidden = hadamard(silu(matmul_bt(x, w_g)), matmul_bt(x, w_u));
    return matmul_bt(hidden, w_d);
}

Matrix ffn_forward(const Matrix& x, const ExpertWeights& e) {
    return ffn_forward(x, e.w_g, e.w_u, e.w_d);
}

Matrix ffn_forward_masked(const Matrix& x, const Matrix& w_g, const Matrix& w_u,
                          const Matrix& w_d, const NeuronMask& mask) {
    if (mask.size() != w_g.rows()) throw ShapeError("ffn_forward_masked: mask length != dim_h");
    if (w_d.rows() != x.cols()) throw ShapeError("ffn_forward_masked: W_d rows != dim_e");
    const auto active = mask.active_indices();
    if (active.empty()) return Matrix(x.rows(), x.cols());
    // Gate/up rows and down columns of the active neurons only.
    return ffn_forward(x, w_g.select_rows(active), w_u.select_rows(active),
                       w_d.select_cols(active));
}

Matrix ffn_forward_masked(const Matrix& x, const ExpertWeights& e, const NeuronMask& mask) {
    return ffn_forward_masked(x, e.w_g, e.w_u, e.w_d, mask);
}

std::vector<Route> route_token(std::span<const double> logits, std::size_t top_k) {
    if (top_k == 0 || top_k > logits.size()) throw ShapeError("route_token: bad top_k");
    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    std::vector<double> chosen(top_k);
    for (std::size_t i = 0; i < top_k; ++i) chosen[i] = logits[order[i]];
    const auto weights = softmax(chosen);
    std::vector<Route> routes(top_k);
    for (std::size_t i = 0; i < top_k; ++i) routes[i] = {order[i], weights[i]};
    return routes;
}

Matrix moe_forward(const Matrix& x, std::span<const ExpertWeights> experts, const Matrix& router,
                   std::size_t top_k, std::size_t layer, const MaskFn& mask) {
    if (router.rows() != experts.size() || router.cols() != x.cols()) {
        throw ShapeError("moe_forward: router shape mismatch");
    }
    const Matrix logits = matmul_bt(x, router);
    Matrix out(x.rows(), x.cols());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        const Matrix xt = x.row_block(t, 1);
        for (const Route& r : route_token(logits.row(t), top_k)) {
            const ExpertWeights& e = experts[r.expert];
            const Matrix y = mask ? ffn_forward_masked(xt, e, mask(layer, r.expert, xt))
                                  : ffn_forward(xt, e);
            auto dst = out.row(t);
            auto src = y.row(0);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += r.weight * src[c];
        }
    }
    return out;
}

Matrix decode_step(const Matrix& token_embed, std::span<const LayerWeights> weights,
                   const ModelConfig& cfg, KVCache& cache, const DecodeOptions& opts) {
    if (token_embed.rows() != 1 || token_embed.cols() != cfg.dim_e) {
        throw ShapeError("decode_step: token embedding must be 1 x dim_e");
    }
    if (weights.size() != cfg.n_dec || cache.n_layers() != cfg.n_dec) {
        throw ShapeError("decode_step: layer count mismatch");
    }
    if (cache.full()) {
        throw CapacityError("decode_step: KV cache full at " + std::to_string(cache.capacity()));
    }

    Matrix x = token_embed;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const LayerWeights& w = weights[l];
        const Matrix q = matmul_bt(x, w.w_q);
        cache.append(l, matmul_bt(x, w.w_k), matmul_bt(x, w.w_v));
        const Matrix attn = mha_forward(q, cache.keys(l), cache.values(l), cfg.n_heads,
                                        cfg.attn_scale);
        x = add(x, matmul_bt(attn, w.w_o));

        if (opts.ffn_tap) opts.ffn_tap(l, x);
        Matrix f;
        if (w.router) {
            f = moe_forward(x, w.experts, *w.router, cfg.top_k, l, opts.mask);
        } else if (opts.mask) {
            f = ffn_forward_masked(x, w.experts.front(), opts.mask(l, 0, x));
        } else {
            f = ffn_forward(x, w.experts.front());
        }
        x = add(x, f);
    }
    return x;
}

}  // namespace slim::model
