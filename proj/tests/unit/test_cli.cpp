#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "scenario.hpp"
#include "slim/error.hpp"

namespace cli = slim::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("slim_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

cli::ScenarioConfig toy(const fs::path& out) {
    auto cfg = cli::parse_scenario(json::parse(R"({
        "scenario": "toy", "seed": 3, "model": "toy",
        "train": {"calib_tokens": 128, "heldout_tokens": 32, "dim_lr": 16, "epochs": 30}
    })"));
    cfg.output.dir = out;
    return cfg;
}

int run_binary(const std::string& args) {
    const char* bin = std::getenv("SLIM_BIN");
    if (!bin) return -1;
    const int status = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Scenario, UnknownKeysAndBadTypesAreRejected) {
    EXPECT_THROW(cli::parse_scenario(json::parse(R"({"model": "toy", "sparsty": [0.1]})")),
                 slim::ConfigError);
    EXPECT_THROW(cli::parse_scenario(json::parse(R"({"model": {"preset": "toy", "dim_q": 3}})")),
                 slim::ConfigError);
    EXPECT_THROW(cli::parse_scenario(json::parse(R"({"model": "toy", "n_tokens": "many"})")),
                 slim::ConfigError);
    EXPECT_THROW(cli::parse_scenario(json::parse(R"({"model": "gpt9"})")), slim::ConfigError);
    EXPECT_THROW(cli::parse_scenario(json::parse(R"({"model": "toy", "sparsity": [1.0]})")),
                 slim::ConfigError);
    EXPECT_THROW(cli::parse_scenario(json::parse(R"({"seed": 1})")), slim::ConfigError);
}

TEST(Scenario, PresetsResolve) {
    const auto c = cli::parse_scenario(json::parse(R"({"model": "model.llama2_7b"})"));
    EXPECT_EQ(c.model.dim_e, 4096u);
    EXPECT_EQ(c.model.dim_h, 11008u);
    EXPECT_EQ(c.model.n_dec, 32u);
    EXPECT_EQ(c.designs.size(), 4u);
    EXPECT_EQ(c.baselines.size(), 2u);
    const auto m = cli::parse_scenario(json::parse(R"({"model": {"preset": "mixtral_8x7b", "seq_len": 512},
        "designs": ["channel.tlc", {"pe_level": "die", "ssd": "ssd.slc", "timing": {"t_r_us": 5}}]})"));
    EXPECT_EQ(m.model.n_expert, 8u);
    EXPECT_EQ(m.model.top_k, 2u);
    EXPECT_EQ(m.model.seq_len, 512u);
    ASSERT_EQ(m.designs.size(), 2u);
    EXPECT_EQ(m.designs[0].timing.pe_level, slim::ssd::PeLevel::kChannel);
    EXPECT_EQ(m.designs[1].timing.t_r_us, 5.0);
    for (const auto& name : cli::model_preset_names()) EXPECT_NO_THROW(cli::model_preset(name));
}

TEST(Scenario, HashIsStableAndSensitive) {
    const auto a = cli::parse_scenario(json::parse(R"({"model": "llama2_7b"})"));
    auto b = cli::parse_scenario(json::parse(R"({"model": "llama2_7b", "output": {"dir": "elsewhere"}})"));
    EXPECT_EQ(cli::config_hash(cli::resolved_json(a)), cli::config_hash(cli::resolved_json(b)));
    const auto c = cli::parse_scenario(json::parse(R"({"model": "llama2_7b", "seed": 2})"));
    EXPECT_NE(cli::config_hash(cli::resolved_json(a)), cli::config_hash(cli::resolved_json(c)));
    EXPECT_EQ(cli::config_hash(cli::resolved_json(a)).size(), 16u);
}

TEST(Scenario, FixturePathsResolveAgainstConfigDir) {
    const auto dir = scratch("paths");
    std::ofstream(dir / "cfg.json") << R"({
        // comments are allowed
        "model": "toy", "paths": {"model": "m.slimwt", "predictor": "/abs/p.slimwt"}
    })";
    const auto c = cli::load_scenario(dir / "cfg.json");
    EXPECT_EQ(c.paths.model, dir / "m.slimwt");
    EXPECT_EQ(c.paths.predictor, fs::path("/abs/p.slimwt"));
    std::ofstream(dir / "multi.json") << R"({"scenarios": [{"model": "toy"}, {"model": "llama2_13b"}]})";
    EXPECT_EQ(cli::load_scenarios(dir / "multi.json").size(), 2u);
}

TEST(Commands, TrainThenInferOnToyModel) {
    const auto dir = scratch("train");
    const auto cfg = toy(dir);
    const auto out = cli::cmd_train(cfg);
    ASSERT_EQ(out.predictors.size(), cfg.model.n_dec);
    for (const auto& [key, p] : out.predictors) {
        EXPECT_EQ(p.dim_e(), 64u);
        EXPECT_EQ(p.dim_lr(), 16u);
        const auto& h = out.history.at(key);
        EXPECT_LT(*std::min_element(h.begin(), h.end()), h.front());
    }
    for (const char* f : {"model.slimwt", "predictor.slimwt", "thresholds.json", "train_log.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const std::string pred_bytes = slurp(dir / "predictor.slimwt");
    const std::string thr_bytes = slurp(dir / "thresholds.json");

    const auto dir2 = scratch("train2");
    cli::cmd_train(toy(dir2));
    EXPECT_EQ(slurp(dir2 / "predictor.slimwt"), pred_bytes);
    EXPECT_EQ(slurp(dir2 / "thresholds.json"), thr_bytes);

    const auto rows = cli::cmd_infer(cfg);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].target, 0.0);
    EXPECT_LT(rows[0].mse, 1e-20);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_GE(rows[i].mse, rows[i - 1].mse);
        ASSERT_EQ(rows[i].layer_sparsity.size(), cfg.model.n_dec);
    }
    EXPECT_TRUE(fs::exists(dir / "infer.json"));
    EXPECT_TRUE(fs::exists(dir / "infer.csv"));
}

TEST(Commands, InferWithoutTrainingIsAConfigError) {
    const auto dir = scratch("infer_missing");
    EXPECT_THROW(cli::cmd_infer(toy(dir)), slim::ConfigError);
}

TEST(Commands, SweepMatchesSimulateRowForRow) {
    auto a = cli::parse_scenario(json::parse(R"({"scenario": "a", "model": "toy", "sparsity": [0, 0.5]})"));
    auto b = cli::parse_scenario(
        json::parse(R"({"scenario": "b", "model": {"preset": "toy", "n_expert": 4, "top_k": 2}, "sparsity": [0.25]})"));
    auto serial = cli::cmd_simulate(a);
    const auto sb = cli::cmd_simulate(b);
    serial.insert(serial.end(), sb.begin(), sb.end());
    const auto parallel = cli::cmd_sweep({a, b}, 4);
    ASSERT_EQ(serial.size(), parallel.size());
    EXPECT_EQ(slim::report::to_csv(serial), slim::report::to_csv(parallel));
    EXPECT_EQ(serial.size(), (4u + 2u) * 2u + (4u + 2u) * 1u);
}

TEST(Commands, ReportsAreByteIdenticalAcrossRuns) {
    const auto d1 = scratch("rep1");
    const auto d2 = scratch("rep2");
    auto cfg = cli::parse_scenario(json::parse(R"({"model": "toy", "output": {"trace": true}})"));
    cfg.output.dir = d1;
    cli::write_reports(cli::cmd_simulate(cfg), cfg.output);
    cfg.output.dir = d2;
    cli::write_reports(cli::cmd_simulate(cfg), cfg.output);
    EXPECT_EQ(slurp(d1 / "report.csv"), slurp(d2 / "report.csv"));
    EXPECT_EQ(slurp(d1 / "summary.json"), slurp(d2 / "summary.json"));
    EXPECT_FALSE(fs::is_empty(d1 / "trace"));
}

TEST(ExitCodes, MapExceptions) {
    EXPECT_EQ(cli::exit_code_for(slim::ConfigError("x")), cli::kExitConfig);
    EXPECT_EQ(cli::exit_code_for(slim::FormatError("x")), cli::kExitConfig);
    EXPECT_EQ(cli::exit_code_for(slim::NumericError("x")), cli::kExitNumeric);
    EXPECT_EQ(cli::exit_code_for(slim::TrainingError("x", {1.0})), cli::kExitNumeric);
    EXPECT_EQ(cli::exit_code_for(std::runtime_error("x")), cli::kExitFailure);
}

TEST(ExitCodes, BinaryReportsConfigProblems) {
    if (!std::getenv("SLIM_BIN")) GTEST_SKIP() << "SLIM_BIN not set";
    const auto dir = scratch("bin");
    std::ofstream(dir / "bad.json") << R"({"model": "toy", "bogus": 1})";
    std::ofstream(dir / "nofixture.json") << R"({"model": "toy", "paths": {"model": "missing.slimwt"}})";
    EXPECT_EQ(run_binary("simulate --config " + (dir / "bad.json").string()), 2);
    EXPECT_EQ(run_binary("train --config " + (dir / "nofixture.json").string() + " --out " +
                         (dir / "o").string()),
              2);
    EXPECT_EQ(run_binary("simulate --config " + (dir / "absent.json").string()), 2);
    EXPECT_EQ(run_binary("frobnicate"), 2);
    EXPECT_EQ(run_binary("simulate --config " + (dir / "bad.json").string() + " --threads 2"), 2);
}
