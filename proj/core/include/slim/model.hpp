#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slim/numerics.hpp"

namespace slim::model {

// Divisor applied to attention scores: sqrt(dim_e / n_heads) or sqrt(dim_e).
enum class AttnScale { kHeadDim, kModelDim };

struct ModelConfig {
    std::size_t n_dec = 4;
    std::size_t dim_e = 64;
    std::size_t dim_h = 256;
    std::size_t n_heads = 4;
    std::size_t n_expert = 1;
    std::size_t top_k = 1;
    std::size_t seq_len = 128;
    std::size_t batch = 1;
    std::uint64_t seed = 1;
    AttnScale attn_scale = AttnScale::kHeadDim;

    std::size_t head_dim() const noexcept { return dim_e / n_heads; }
    bool is_moe() const noexcept { return n_expert > 1; }

    // Throws ConfigError when an invariant is violated.
    void validate() const;
};

// All projections follow the y = x * W^T convention.
struct ExpertWeights {
    Matrix w_g;  // dim_h x dim_e
    Matrix w_u;  // dim_h x dim_e
    Matrix w_d;  // dim_e x dim_h
};

struct LayerWeights {
    Matrix w_q;  // dim_e x dim_e
    Matrix w_k;
    Matrix w_v;
    Matrix w_o;
    std::vector<ExpertWeights> experts;
    std::optional<Matrix> router;  // n_expert x dim_e, absent for plain FFN
};

// Seeded Gaussian weights with std 1/sqrt(dim_e). Deterministic in cfg.seed.
std::vector<LayerWeights> synth_model(const ModelConfig& cfg);

// n token embeddings with entries N(0, 1/dim_e), so each row has norm ~1.
// Unit-variance entries push the residual stream past the point where the
// quadratic gate*up product grows layer over layer.
Matrix synth_embeddings(std::size_t n, std::size_t dim_e, std::uint64_t seed);

// One bit per FFN hidden neuron; a set bit means the neuron is computed.
class NeuronMask {
public:
    NeuronMask() = default;
    explicit NeuronMask(std::size_t size, bool value = false) : bits_(size, value) {}
    explicit NeuronMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

    static NeuronMask all(std::size_t size) { return NeuronMask(size, true); }
    static NeuronMask none(std::size_t size) { return NeuronMask(size, false); }

    std::size_t size() const noexcept { return bits_.size(); }
    bool test(std::size_t j) const { return bits_.at(j); }
    void set(std::size_t j, bool value = true) { bits_.at(j) = value; }
    std::size_t count() const noexcept;
    std::vector<std::size_t> active_indices() const;

    NeuronMask& operator|=(const NeuronMask& other);
    bool is_subset_of(const NeuronMask& other) const;

    friend bool operator==(const NeuronMask&, const NeuronMask&) = default;

private:
    std::vector<bool> bits_;
};

// Per-layer K and V rows for one sequence. Append-only.
class KVCache {
public:
    KVCache(std::size_t n_layers, std::size_t dim_e, std::size_t capacity);

    std::size_t length(std::size_t layer) const { return keys_.at(layer).rows(); }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t n_layers() const noexcept { return keys_.size(); }
    bool full() const;

    void append(std::size_t layer, const Matrix& k_row, const Matrix& v_row);
    const Matrix& keys(std::size_t layer) const { return keys_.at(layer); }
    const Matrix& values(std::size_t layer) const { return values_.at(layer); }

private:
    std::size_t dim_e_;
    std::size_t capacity_;
    std::vector<Matrix> keys_;
    std::vector<Matrix> values_;
};

// Per-head softmax(Q_i K_i^T / scale) V_i, heads concatenated. W_o is not
// applied here.
Matrix mha_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t n_heads,
                   AttnScale scale_mode = AttnScale::kHeadDim);

// (silu(x W_g^T) .* (x W_u^T)) W_d^T
Matrix ffn_forward(const Matrix& x, const Matrix& w_g, const Matrix& w_u, const Matrix& w_d);
Matrix ffn_forward(const Matrix& x, const ExpertWeights& e);

// Same as ffn_forward restricted to the neurons set in `mask`; the mask is
// shared by every row of x.
Matrix ffn_forward_masked(const Matrix& x, const Matrix& w_g, const Matrix& w_u,
                          const Matrix& w_d, const NeuronMask& mask);
Matrix ffn_forward_masked(const Matrix& x, const ExpertWeights& e, const NeuronMask& mask);

struct Route {
    std::size_t expert;
    double weight;
};

// Top-k by logit (ties go to the lower index), softmax over the selected
// logits only. Result is ordered by descending logit.
std::vector<Route> route_token(std::span<const double> logits, std::size_t top_k);

// Returns the FFN-input mask for (layer, expert) given the rows that reach
// that expert.
using MaskFn = std::function<NeuronMask(std::size_t layer, std::size_t expert, const Matrix& x)>;

Matrix moe_forward(const Matrix& x, std::span<const ExpertWeights> experts, const Matrix& router,
                   std::size_t top_k, std::size_t layer = 0, const MaskFn& mask = {});

struct DecodeOptions {
    MaskFn mask;
    // Observes the FFN/MoE input of every layer (calibration sampling).
    std::function<void(std::size_t layer, const Matrix& ffn_input)> ffn_tap;
};

// One generation step for a single sequence: token_embed is 1 x dim_e.
// Appends one K/V row per layer to `cache` and returns the next embedding.
Matrix decode_step(const Matrix& token_embed, std::span<const LayerWeights> weights,
                   const ModelConfig& cfg, KVCache& cache, const DecodeOptions& opts = {});

}  // namespace slim::model
