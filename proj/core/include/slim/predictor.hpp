#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slim/checkpoint.hpp"
#include "slim/model.hpp"
#include "slim/numerics.hpp"

namespace slim::pred {

// Low-rank stand-in for the gate projection: scores = x * L * R ~ x * W_g^T.
struct Predictor {
    Matrix l;  // dim_e x dim_lr
    Matrix r;  // dim_lr x dim_h

    std::size_t dim_lr() const noexcept { return l.cols(); }
    std::size_t dim_e() const noexcept { return l.rows(); }
    std::size_t dim_h() const noexcept { return r.cols(); }
    std::size_t param_count() const noexcept { return l.size() + r.size(); }

    Matrix scores(const Matrix& x) const;
};

inline std::size_t default_rank(std::size_t dim_e) { return dim_e / 4 > 0 ? dim_e / 4 : 1; }

// L = U_r diag(S_r), R = V_r^T from the rank-r SVD of w_g^T.
Predictor init_from_svd(const Matrix& w_g, std::size_t dim_lr);

// ||X W_g^T - X L R||_F^2 summed over samples.
double loss(const Predictor& p, const Matrix& x, const Matrix& w_g);

struct Gradient {
    Matrix d_l;
    Matrix d_r;
};

// Exact gradient of loss() with respect to L and R.
Gradient loss_gradient(const Predictor& p, const Matrix& x, const Matrix& w_g);

struct TrainOptions {
    std::size_t epochs = 50;
    double lr = 1e-3;
    double divergence_factor = 10.0;
};

struct TrainResult {
    Predictor predictor;
    // history[0] is the loss before the first step; one entry per epoch after.
    std::vector<double> history;
};

// Full-batch gradient descent. Each step moves by lr times the gradient of the
// per-sample mean loss. Returns the lowest-loss iterate seen. Throws
// TrainingError (with the history so far) if the loss exceeds
// divergence_factor times the initial loss or stops being finite.
TrainResult train(const Predictor& init, const Matrix& calib, const Matrix& w_g,
                  const TrainOptions& opts = {});

struct ThresholdTable {
    std::size_t layer = 0;
    std::size_t expert = 0;
    // (target sparsity, threshold), ascending in sparsity.
    std::vector<std::pair<double, double>> entries;

    // Threshold of the largest target not above `sparsity` (0 if none).
    double threshold_for(double sparsity) const;
};

// Largest pooled score t such that at most floor(s * n) scores are <= t.
// Returns 0 when no score qualifies.
double lower_quantile(std::vector<double> scores, double s);

ThresholdTable build_threshold_table(const Predictor& p, const Matrix& calib,
                                     std::span<const double> targets, std::size_t layer = 0,
                                     std::size_t expert = 0);

// One mask per row of x: bit j set iff |(x L R)_j| > threshold.
std::vector<model::NeuronMask> predict_mask(const Predictor& p, const Matrix& x, double threshold);

// Union over the rows of x, used when one weight fetch serves a whole batch.
model::NeuronMask predict_mask_union(const Predictor& p, const Matrix& x, double threshold);

double measured_sparsity(const model::NeuronMask& mask);

// Decoder FFN inputs harvested while decoding seeded random embeddings.
// Result has one n_tokens x dim_e matrix per layer.
std::vector<Matrix> collect_calibration(std::span<const model::LayerWeights> weights,
                                        const model::ModelConfig& cfg, std::size_t n_tokens,
                                        std::uint64_t seed);

using PredictorKey = std::pair<std::size_t, std::size_t>;  // (layer, expert)
using PredictorSet = std::map<PredictorKey, Predictor>;

// Tensors "layer.<l>.expert.<e>.pred.L" / ".R".
TensorMap predictors_to_tensors(const PredictorSet& set);
PredictorSet predictors_from_tensors(const TensorMap& tensors);

// [{"layer":l,"expert":e,"entries":[[s,t],...]}, ...]
std::string thresholds_to_json(std::span<const ThresholdTable> tables);
std::vector<ThresholdTable> thresholds_from_json(const std::string& text);

}  // namespace slim::pred
