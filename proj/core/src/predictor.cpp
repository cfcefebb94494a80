#include "slim/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>

#include <json.hpp>

#include "slim/error.hpp"

namespace slim::pred {

Matrix Predictor::scores(const Matrix& x) const { return matmul(matmul(x, l), r); }

Predictor init_from_svd(const Matrix& w_g, std::size_t dim_lr) {
    const SvdResult svd = truncated_svd(w_g.transposed(), dim_lr);
    Matrix l = svd.u;
    for (std::size_t i = 0; i < l.rows(); ++i) {
        for (std::size_t k = 0; k < dim_lr; ++k) l(i, k) *= svd.s[k];
    }
    return {std::move(l), svd.v.transposed()};
}

namespace {

void check_shapes(const Predictor& p, const Matrix& x, const Matrix& w_g) {
    if (x.cols() != p.dim_e() || w_g.cols() != p.dim_e() || w_g.rows() != p.dim_h() ||
        p.r.rows() != p.dim_lr()) {
        throw ShapeError("predictor: inconsistent shapes between X, W_g, L and R");
    }
}

Matrix residual(const Predictor& p, const Matrix& x, const Matrix& w_g) {
    return subtract(p.scores(x), matmul_bt(x, w_g));
}

double squared_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return s;
}

}  // namespace

double loss(const Predictor& p, const Matrix& x, const Matrix& w_g) {
    check_shapes(p, x, w_g);
    return squared_norm(residual(p, x, w_g));
}

Gradient loss_gradient(const Predictor& p, const Matrix& x, const Matrix& w_g) {
    check_shapes(p, x, w_g);
    const Matrix e = residual(p, x, w_g);
    const Matrix xt = x.transposed();
    // dL/dL = 2 X^T E R^T,  dL/dR = 2 (X L)^T E
    Matrix d_l = scale(matmul_bt(matmul(xt, e), p.r), 2.0);
    Matrix d_r = scale(matmul(matmul(x, p.l).transposed(), e), 2.0);
    return {std::move(d_l), std::move(d_r)};
}

TrainResult train(const Predictor& init, const Matrix& calib, const Matrix& w_g,
                  const TrainOptions& opts) {
    if (calib.rows() == 0) throw ShapeError("train: empty calibration set");
    TrainResult out{init, {}};
    Predictor p = init;
    const double initial = loss(p, calib, w_g);
    out.history.push_back(initial);
    double best = initial;
    const double step = opts.lr / static_cast<double>(calib.rows());

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        const Gradient g = loss_gradient(p, calib, w_g);
        p.l = subtract(p.l, scale(g.d_l, step));
        p.r = subtract(p.r, scale(g.d_r, step));
        const double cur = loss(p, calib, w_g);
        out.history.push_back(cur);
        if (!std::isfinite(cur) || cur > opts.divergence_factor * std::max(initial, 1e-300)) {
            throw TrainingError("train: diverged at epoch " + std::to_string(epoch + 1),
                                out.history);
        }
        if (cur < best) {
            best = cur;
            out.predictor = p;
        }
    }
    return out;
}

double ThresholdTable::threshold_for(double sparsity) const {
    double t = 0.0;
    for (const auto& [s, thr] : entries) {
        if (s <= sparsity) t = thr;
    }
    return t;
}

double lower_quantile(std::vector<double> scores, double s) {
    if (scores.empty()) throw ShapeError("lower_quantile: no scores");
    if (!(s >= 0.0 && s < 1.0)) throw ShapeError("lower_quantile: target outside [0, 1)");
    std::sort(scores.begin(), scores.end());
    const auto k = static_cast<std::size_t>(std::floor(s * static_cast<double>(scores.size())));
    if (k == 0) return 0.0;
    // Step down past ties so no more than k scores sit at or below the result.
    std::size_t i = k;
    while (i > 0 && i < scores.size() && scores[i - 1] == scores[i]) --i;
    return i == 0 ? 0.0 : scores[i - 1];
}

ThresholdTable build_threshold_table(const Predictor& p, const Matrix& calib,
                                     std::span<const double> targets, std::size_t layer,
                                     std::size_t expert) {
    if (calib.rows() == 0) throw ShapeError("build_threshold_table: empty calibration set");
    const Matrix sc = p.scores(calib);
    std::vector<double> pooled(sc.size());
    std::transform(sc.data().begin(), sc.data().end(), pooled.begin(),
                   [](double v) { return std::abs(v); });

    std::vector<double> sorted_targets(targets.begin(), targets.end());
    std::sort(sorted_targets.begin(), sorted_targets.end());
    ThresholdTable table{layer, expert, {}};
    for (double s : sorted_targets) table.entries.emplace_back(s, lower_quantile(pooled, s));
    return table;
}

std::vector<model::NeuronMask> predict_mask(const Predictor& p, const Matrix& x, double threshold) {
    if (x.cols() != p.dim_e()) throw ShapeError("predict_mask: x width != dim_e");
    const Matrix sc = p.scores(x);
    std::vector<model::NeuronMask> masks;
    masks.reserve(sc.rows());
    for (std::size_t t = 0; t < sc.rows(); ++t) {
        model::NeuronMask m(sc.cols());
        for (std::size_t j = 0; j < sc.cols(); ++j) {
            if (std::abs(sc(t, j)) > threshold) m.set(j);
        }
        masks.push_back(std::move(m));
    }
    return masks;
}

model::NeuronMask predict_mask_union(const Predictor& p, const Matrix& x, double threshold) {
    model::NeuronMask out(p.dim_h());
    for (const auto& m : predict_mask(p, x, threshold)) out |= m;
    return out;
}

double measured_sparsity(const model::NeuronMask& mask) {
    if (mask.size() == 0) return 0.0;
    return static_cast<double>(mask.size() - mask.count()) / static_cast<double>(mask.size());
}

std::vector<Matrix> collect_calibration(std::span<const model::LayerWeights> weights,
                                        const model::ModelConfig& cfg, std::size_t n_tokens,
                                        std::uint64_t seed) {
    if (n_tokens == 0) throw ShapeError("collect_calibration: n_tokens must be >= 1");
    std::vector<Matrix> samples(cfg.n_dec, Matrix(0, cfg.dim_e));
    const Matrix embeds = model::synth_embeddings(n_tokens, cfg.dim_e, seed);

    model::DecodeOptions opts;
    opts.ffn_tap = [&](std::size_t layer, const Matrix& x) { samples[layer].append_rows(x); };

    std::size_t produced = 0;
    while (produced < n_tokens) {
        // Fresh sequence whenever the context window fills.
        model::KVCache cache(cfg.n_dec, cfg.dim_e, cfg.seq_len);
        for (std::size_t t = 0; t < cfg.seq_len && produced < n_tokens; ++t, ++produced) {
            model::decode_step(embeds.row_block(produced, 1), weights, cfg, cache, opts);
        }
    }
    return samples;
}

namespace {

std::string pred_key(std::size_t l, std::size_t e, const char* part) {
    return "layer." + std::to_string(l) + ".expert." + std::to_string(e) + ".pred." + part;
}

}  // namespace

TensorMap predictors_to_tensors(const PredictorSet& set) {
    TensorMap t;
    for (const auto& [key, p] : set) {
        t.emplace(pred_key(key.first, key.second, "L"), p.l);
        t.emplace(pred_key(key.first, key.second, "R"), p.r);
    }
    return t;
}

PredictorSet predictors_from_tensors(const TensorMap& tensors) {
    static const std::regex kName(R"(layer\.(\d+)\.expert\.(\d+)\.pred\.L)");
    PredictorSet set;
    for (const auto& [name, m] : tensors) {
        std::smatch match;
        if (!std::regex_match(name, match, kName)) continue;
        const std::size_t l = std::stoul(match[1]);
        const std::size_t e = std::stoul(match[2]);
        auto r_it = tensors.find(pred_key(l, e, "R"));
        if (r_it == tensors.end()) throw FormatError("predictor: missing R for " + name);
        if (r_it->second.rows() != m.cols()) throw FormatError("predictor: L/R rank mismatch");
        set.emplace(PredictorKey{l, e}, Predictor{m, r_it->second});
    }
    return set;
}

std::string thresholds_to_json(std::span<const ThresholdTable> tables) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& t : tables) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [s, thr] : t.entries) entries.push_back({s, thr});
        doc.push_back({{"layer", t.layer}, {"expert", t.expert}, {"entries", entries}});
    }
    return doc.dump(2) + "\n";
}

std::vector<ThresholdTable> thresholds_from_json(const std::string& text) {
    std::vector<ThresholdTable> tables;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& j : doc) {
            ThresholdTable t;
            t.layer = j.at("layer").get<std::size_t>();
            t.expert = j.at("expert").get<std::size_t>();
            for (const auto& e : j.at("entries")) {
                t.entries.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
            }
            tables.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("threshold table: ") + e.what());
    }
    return tables;
}

}  // namespace slim::pred
