#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "scenario.hpp"
#include "slim/error.hpp"

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("slim");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SLIM_LOG")) {
        const auto lvl = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept "off" when spelled out.
        if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
    }
}

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Scenario config (JSON)")->required();
    cmd->add_option("--out", c.out, "Output directory (overrides output.dir)");
    cmd->add_option("--seed", c.seed, "Seed (overrides the config seed)")
        ->each([&c](const std::string&) { c.seed_set = true; });
}

void apply_overrides(slim::cli::ScenarioConfig& cfg, const Common& c) {
    if (!c.out.empty()) cfg.output.dir = c.out;
    if (c.seed_set) {
        cfg.seed = c.seed;
        cfg.model.seed = c.seed;
    }
}

void print_rows(const std::vector<slim::report::Row>& rows) {
    for (const auto& r : rows) {
        std::cout << r.scenario << ' ' << r.design_level << '/' << r.nand << " s=" << r.sparsity
                  << " tok/s=" << r.tok_per_s << " eff_gbps=" << r.eff_gbps
                  << " energy_mj=" << r.energy_mj_per_token << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Sparse LLM inference on an SSD-NSP + DRAM-PIM accelerator model"};
    app.require_subcommand(1);

    Common train_o, infer_o, sim_o, sweep_o;
    std::size_t threads = 0;
    auto* train = app.add_subcommand("train", "Train sparsity predictors and threshold tables");
    auto* infer = app.add_subcommand("infer", "Dense vs predicted-sparse decode on held-out tokens");
    auto* simulate = app.add_subcommand("simulate", "Simulate every design point of one scenario");
    auto* sweep = app.add_subcommand("sweep", "Simulate one or more scenarios on a worker pool");
    add_common(train, train_o);
    add_common(infer, infer_o);
    add_common(simulate, sim_o);
    add_common(sweep, sweep_o);
    sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : slim::cli::kExitConfig;
    }

    namespace cli = slim::cli;
    try {
        if (*train) {
            auto cfg = cli::load_scenario(train_o.config);
            apply_overrides(cfg, train_o);
            const auto out = cli::cmd_train(cfg);
            for (const auto& [key, hist] : out.history) {
                std::cout << "layer " << key.first << " expert " << key.second << " loss";
                for (double v : hist) std::cout << ' ' << v;
                std::cout << '\n';
            }
        } else if (*infer) {
            auto cfg = cli::load_scenario(infer_o.config);
            apply_overrides(cfg, infer_o);
            for (const auto& r : cli::cmd_infer(cfg)) {
                std::cout << "target " << r.target << " mse " << r.mse << " sparsity";
                for (double s : r.layer_sparsity) std::cout << ' ' << s;
                std::cout << '\n';
            }
        } else if (*simulate) {
            auto cfg = cli::load_scenario(sim_o.config);
            apply_overrides(cfg, sim_o);
            const auto rows = cli::cmd_simulate(cfg);
            cli::write_reports(rows, cfg.output);
            print_rows(rows);
        } else if (*sweep) {
            auto cfgs = cli::load_scenarios(sweep_o.config);
            for (auto& c : cfgs) apply_overrides(c, sweep_o);
            const auto rows = cli::cmd_sweep(cfgs, threads);
            cli::write_reports(rows, cfgs.front().output);
            print_rows(rows);
        }
    } catch (const slim::TrainingError& e) {
        spdlog::error("{}", e.what());
        std::cerr << "loss history:";
        for (double v : e.history()) std::cerr << ' ' << v;
        std::cerr << '\n';
        return cli::kExitNumeric;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return cli::exit_code_for(e);
    }
    return cli::kExitOk;
}
