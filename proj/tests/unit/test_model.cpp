#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slim/error.hpp"
#include "slim/model.hpp"

using slim::Matrix;
namespace model = slim::model;

namespace {

// Per-head attention written with explicit loops; rows of q attend to the
// first `visible[i]` rows of k/v.
Matrix brute_mha(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                 double scale, const std::vector<std::size_t>& visible) {
    const std::size_t d = q.cols(), hd = d / heads;
    Matrix out(q.rows(), d);
    for (std::size_t i = 0; i < q.rows(); ++i) {
        for (std::size_t h = 0; h < heads; ++h) {
            std::vector<double> s(visible[i]);
            double mx = -1e300;
            for (std::size_t j = 0; j < visible[i]; ++j) {
                double dot = 0;
                for (std::size_t c = 0; c < hd; ++c) dot += q(i, h * hd + c) * k(j, h * hd + c);
                s[j] = dot / scale;
                mx = std::max(mx, s[j]);
            }
            double z = 0;
            for (double& x : s) z += (x = std::exp(x - mx));
            for (std::size_t c = 0; c < hd; ++c) {
                double acc = 0;
                for (std::size_t j = 0; j < visible[i]; ++j) acc += s[j] / z * v(j, h * hd + c);
                out(i, h * hd + c) = acc;
            }
        }
    }
    return out;
}

// Hidden neurons accumulated one column at a time, skipping masked ones.
Matrix column_ffn(const Matrix& x, const Matrix& wg, const Matrix& wu, const Matrix& wd,
                  const std::vector<bool>& keep) {
    Matrix y(x.rows(), wd.rows());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t j = 0; j < wg.rows(); ++j) {
            if (!keep[j]) continue;
            double g = 0, u = 0;
            for (std::size_t c = 0; c < x.cols(); ++c) {
                g += x(t, c) * wg(j, c);
                u += x(t, c) * wu(j, c);
            }
            const double a = oracle::silu(g) * u;
            for (std::size_t o = 0; o < wd.rows(); ++o) y(t, o) += a * wd(o, j);
        }
    }
    return y;
}

Matrix matmul_t(const Matrix& x, const Matrix& w) { return oracle::matmul(x, oracle::transpose(w)); }

// Whole-prefix causal forward pass without a KV cache. Row i of the result is
// the output for token i.
Matrix cache_free_forward(const Matrix& embeds, const std::vector<model::LayerWeights>& w,
                          const model::ModelConfig& cfg) {
    Matrix x = embeds;
    std::vector<std::size_t> visible(x.rows());
    for (std::size_t i = 0; i < visible.size(); ++i) visible[i] = i + 1;
    const double scale = std::sqrt(static_cast<double>(
        cfg.attn_scale == model::AttnScale::kHeadDim ? cfg.dim_e / cfg.n_heads : cfg.dim_e));
    for (std::size_t l = 0; l < cfg.n_dec; ++l) {
        const Matrix attn = brute_mha(matmul_t(x, w[l].w_q), matmul_t(x, w[l].w_k),
                                      matmul_t(x, w[l].w_v), cfg.n_heads, scale, visible);
        x = slim::add(x, matmul_t(attn, w[l].w_o));
        Matrix f(x.rows(), x.cols());
        for (std::size_t t = 0; t < x.rows(); ++t) {
            const Matrix xt = x.row_block(t, 1);
            std::vector<std::pair<double, std::size_t>> picks;
            if (w[l].router) {
                const Matrix logits = matmul_t(xt, *w[l].router);
                std::vector<std::size_t> idx(cfg.n_expert);
                for (std::size_t e = 0; e < idx.size(); ++e) idx[e] = e;
                std::stable_sort(idx.begin(), idx.end(),
                                 [&](auto a, auto b) { return logits(0, a) > logits(0, b); });
                double z = 0;
                for (std::size_t i = 0; i < cfg.top_k; ++i) z += std::exp(logits(0, idx[i]) - logits(0, idx[0]));
                for (std::size_t i = 0; i < cfg.top_k; ++i) {
                    picks.push_back({std::exp(logits(0, idx[i]) - logits(0, idx[0])) / z, idx[i]});
                }
            } else {
                picks.push_back({1.0, 0});
            }
            for (auto [weight, e] : picks) {
                const auto& ex = w[l].experts[e];
                const Matrix y =
                    column_ffn(xt, ex.w_g, ex.w_u, ex.w_d, std::vector<bool>(cfg.dim_h, true));
                for (std::size_t c = 0; c < x.cols(); ++c) f(t, c) += weight * y(0, c);
            }
        }
        x = slim::add(x, f);
    }
    return x;
}

model::ModelConfig small_cfg(std::size_t n_expert = 1, std::size_t top_k = 1) {
    model::ModelConfig c;
    c.n_dec = 2;
    c.dim_e = 16;
    c.dim_h = 24;
    c.n_heads = 4;
    c.n_expert = n_expert;
    c.top_k = top_k;
    c.seq_len = 8;
    c.seed = 5;
    return c;
}

}  // namespace

TEST(Config, Validation) {
    model::ModelConfig c;
    EXPECT_NO_THROW(c.validate());
    c.n_heads = 5;  // 64 not divisible by 5
    EXPECT_THROW(c.validate(), slim::ConfigError);
    c = {};
    c.top_k = 2;
    EXPECT_THROW(c.validate(), slim::ConfigError);
}

TEST(Mha, MatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t heads = 1 + seed % 4, hd = 3, d = heads * hd, L = 1 + seed % 9;
        const Matrix q = oracle::random_matrix(2, d, seed);
        const Matrix k = oracle::random_matrix(L, d, seed + 1);
        const Matrix v = oracle::random_matrix(L, d, seed + 2);
        const std::vector<std::size_t> all(2, L);
        EXPECT_LT(slim::max_abs_diff(model::mha_forward(q, k, v, heads),
                                     brute_mha(q, k, v, heads, std::sqrt(double(hd)), all)),
                  1e-12);
        EXPECT_LT(slim::max_abs_diff(model::mha_forward(q, k, v, heads, model::AttnScale::kModelDim),
                                     brute_mha(q, k, v, heads, std::sqrt(double(d)), all)),
                  1e-12);
    }
}

TEST(Mha, SingleKeyReturnsItsValue) {
    const Matrix q = oracle::random_matrix(1, 8, 1);
    const Matrix k = oracle::random_matrix(1, 8, 2);
    const Matrix v = oracle::random_matrix(1, 8, 3);
    EXPECT_LT(slim::max_abs_diff(model::mha_forward(q, k, v, 2), v), 1e-15);
}

TEST(Ffn, MatchesColumnOrderOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix x = oracle::random_matrix(3, 8, seed);
        const Matrix wg = oracle::random_matrix(20, 8, seed + 1);
        const Matrix wu = oracle::random_matrix(20, 8, seed + 2);
        const Matrix wd = oracle::random_matrix(8, 20, seed + 3);
        EXPECT_LT(slim::max_abs_diff(model::ffn_forward(x, wg, wu, wd),
                                     column_ffn(x, wg, wu, wd, std::vector<bool>(20, true))),
                  1e-12);
        std::mt19937 rng(seed);
        std::vector<bool> keep(20);
        model::NeuronMask mask(20);
        for (std::size_t j = 0; j < 20; ++j) {
            keep[j] = rng() % 2;
            mask.set(j, keep[j]);
        }
        EXPECT_LT(slim::max_abs_diff(model::ffn_forward_masked(x, wg, wu, wd, mask),
                                     column_ffn(x, wg, wu, wd, keep)),
                  1e-12);
    }
}

TEST(Ffn, EmptyMaskGivesZeroAndWrongLengthThrows) {
    const Matrix x = oracle::random_matrix(1, 4, 1);
    const Matrix wg = oracle::random_matrix(6, 4, 2), wu = oracle::random_matrix(6, 4, 3),
                 wd = oracle::random_matrix(4, 6, 4);
    EXPECT_EQ(model::ffn_forward_masked(x, wg, wu, wd, model::NeuronMask::none(6)), Matrix(1, 4));
    EXPECT_THROW(model::ffn_forward_masked(x, wg, wu, wd, model::NeuronMask::all(5)),
                 slim::ShapeError);
}

TEST(NeuronMask, SetOperations) {
    model::NeuronMask a(5), b(5);
    a.set(1);
    b.set(1);
    b.set(3);
    EXPECT_TRUE(a.is_subset_of(b));
    EXPECT_FALSE(b.is_subset_of(a));
    a |= b;
    EXPECT_EQ(a, b);
    EXPECT_EQ(b.count(), 2u);
    EXPECT_EQ(b.active_indices(), (std::vector<std::size_t>{1, 3}));
}

TEST(Routing, TopKSoftmaxAndTies) {
    const std::vector<double> logits{0.5, 2.0, 2.0, -1.0};
    const auto r = model::route_token(logits, 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].expert, 1u);
    EXPECT_EQ(r[1].expert, 2u);
    EXPECT_NEAR(r[0].weight, 0.5, 1e-15);
    EXPECT_NEAR(r[0].weight + r[1].weight, 1.0, 1e-15);
    EXPECT_THROW(model::route_token(logits, 5), slim::ShapeError);
}

TEST(Decode, MatchesCacheFreeRecomputation) {
    for (auto cfg : {small_cfg(), small_cfg(4, 2)}) {
        const auto w = model::synth_model(cfg);
        const Matrix embeds = oracle::random_matrix(6, cfg.dim_e, 42);
        model::KVCache cache(cfg.n_dec, cfg.dim_e, cfg.seq_len);
        const Matrix ref = cache_free_forward(embeds, w, cfg);
        for (std::size_t t = 0; t < embeds.rows(); ++t) {
            const Matrix y = model::decode_step(embeds.row_block(t, 1), w, cfg, cache);
            EXPECT_LT(slim::max_abs_diff(y, ref.row_block(t, 1)), 1e-10) << "token " << t;
        }
        EXPECT_EQ(cache.length(0), embeds.rows());
    }
}

TEST(Decode, AllOnesMaskMatchesDense) {
    const auto cfg = small_cfg(4, 2);
    const auto w = model::synth_model(cfg);
    model::KVCache c1(cfg.n_dec, cfg.dim_e, cfg.seq_len), c2(cfg.n_dec, cfg.dim_e, cfg.seq_len);
    model::DecodeOptions opts;
    opts.mask = [&](std::size_t, std::size_t, const Matrix&) { return model::NeuronMask::all(cfg.dim_h); };
    const Matrix x = oracle::random_matrix(1, cfg.dim_e, 3);
    EXPECT_LT(slim::max_abs_diff(model::decode_step(x, w, cfg, c1),
                                 model::decode_step(x, w, cfg, c2, opts)),
              1e-12);
}

TEST(Decode, CacheCapacityIsEnforced) {
    auto cfg = small_cfg();
    cfg.seq_len = 2;
    const auto w = model::synth_model(cfg);
    model::KVCache cache(cfg.n_dec, cfg.dim_e, cfg.seq_len);
    const Matrix x = oracle::random_matrix(1, cfg.dim_e, 1);
    model::decode_step(x, w, cfg, cache);
    model::decode_step(x, w, cfg, cache);
    EXPECT_TRUE(cache.full());
    EXPECT_THROW(model::decode_step(x, w, cfg, cache), slim::CapacityError);
}

TEST(Synth, DeterministicAndShaped) {
    const auto cfg = small_cfg(3, 2);
    const auto a = model::synth_model(cfg);
    const auto b = model::synth_model(cfg);
    ASSERT_EQ(a.size(), cfg.n_dec);
    EXPECT_EQ(a[1].experts[2].w_d, b[1].experts[2].w_d);
    EXPECT_EQ(a[0].experts.size(), 3u);
    ASSERT_TRUE(a[0].router.has_value());
    EXPECT_EQ(a[0].router->rows(), 3u);
    EXPECT_EQ(a[0].experts[0].w_g.rows(), cfg.dim_h);
    EXPECT_EQ(a[0].experts[0].w_d.cols(), cfg.dim_h);
    auto other = cfg;
    other.seed = 6;
    EXPECT_NE(model::synth_model(other)[0].w_q, a[0].w_q);
}
