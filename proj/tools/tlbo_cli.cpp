// Experiment harness for transfer-learning Bayesian optimization:
// generate-historic writes per-task datasets from standard BO runs,
// run executes the configured (method x task x seed) grid, and
// analyze exports regret/rank/overlap tables from the persisted records.

#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "tlbo/experiment.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
};

tlbo::ExperimentConfig load(const CommonOpts& opts) {
    auto cfg = tlbo::load_experiment_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.output_dir = opts.out_dir;
    if (opts.seed_set) cfg.master_seed = opts.seed;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_workers) {
    cmd->add_option("--config", opts.config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "master seed (overrides config)")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    if (with_workers)
        cmd->add_option("--workers", opts.workers, "parallel worker count")
            ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"transfer-learning Bayesian optimization experiment harness"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* gen = app.add_subcommand("generate-historic",
                                   "run standard BO per task and persist the datasets");
    add_common(gen, opts, false);
    auto* run = app.add_subcommand("run", "execute every (method, task, seed) cell");
    add_common(run, opts, true);
    auto* analyze = app.add_subcommand("analyze", "export analysis tables from run records");
    add_common(analyze, opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load(opts);
        if (gen->parsed()) return tlbo::cmd_generate_historic(cfg);
        if (run->parsed()) return tlbo::cmd_run(cfg, opts.workers);
        if (analyze->parsed()) return tlbo::cmd_analyze(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
