#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scenario.hpp"
#include "slim/predictor.hpp"
#include "slim/report.hpp"

namespace slim::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumeric = 3 };

// Maps a library exception onto the documented exit codes.
int exit_code_for(const std::exception& e);

struct TrainOutput {
    pred::PredictorSet predictors;
    std::vector<pred::ThresholdTable> thresholds;
    std::map<pred::PredictorKey, std::vector<double>> history;
};

// Calibrate, train and threshold one predictor per (layer, expert). Writes
// model.slimwt (when synthesized), predictor.slimwt, thresholds.json and
// train_log.json into cfg.output.dir.
TrainOutput cmd_train(const ScenarioConfig& cfg);

struct InferRow {
    double target = 0.0;
    double mse = 0.0;
    std::vector<double> layer_sparsity;  // measured on held-out tokens
};

// Dense vs masked decode of held-out tokens at target 0 and every training
// target. Writes infer.json and infer.csv.
std::vector<InferRow> cmd_infer(const ScenarioConfig& cfg);

// Every design x sparsity point, then every baseline x sparsity point, in
// that order. simulate runs them on the calling thread and can emit traces;
// sweep spreads points over `threads` workers (0 = hardware concurrency).
std::vector<report::Row> cmd_simulate(const ScenarioConfig& cfg);
std::vector<report::Row> cmd_sweep(const std::vector<ScenarioConfig>& cfgs, std::size_t threads = 0);

// Writes report.csv / report.json / summary.json as enabled in `out`.
void write_reports(const std::vector<report::Row>& rows, const OutputSpec& out);

}  // namespace slim::cli
