#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "moc/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"MoE checkpointing simulator"};
    app.require_subcommand(1);

    std::string config;
    moc::RunOverrides overrides;

    auto add_overrides = [&](CLI::App* cmd) {
        cmd->add_option("config", config, "scenario JSON file")->required();
        cmd->add_option("--seed", overrides.seed, "override rng_seed");
        cmd->add_option("--i-ckpt", overrides.i_ckpt, "override i_ckpt");
        cmd->add_option("--k-pec", overrides.k_pec, "override K (snapshot and persist)");
        cmd->add_option("--strategy", overrides.strategy, "baseline|equal_full|equal_pec|adaptive_pec");
    };

    CLI::App* run = app.add_subcommand("run", "simulate a scenario and emit the report");
    add_overrides(run);
    run->add_option("--report", overrides.report, "report JSON path (stdout when unset)");
    run->add_option("--timeline", overrides.timeline, "timeline CSV path");
    run->add_flag("--dump-plan", overrides.dump_plan, "print the shard plan to stderr");

    CLI::App* compare = app.add_subcommand("compare", "blocking, base-async and PEC-async side by side");
    compare->add_option("config", config, "scenario JSON file")->required();

    const char* env_root = std::getenv("MOC_STORE_ROOT");
    std::string root = env_root && *env_root ? env_root : "moc_store";
    std::uint64_t trials = 100;
    std::uint64_t seed = 1;
    CLI::App* crash = app.add_subcommand("crashtest", "crash-inject persists and check recovery");
    crash->add_option("--root", root, "scratch store directory (default $MOC_STORE_ROOT or ./moc_store)");
    crash->add_option("--trials", trials, "number of trials");
    crash->add_option("--seed", seed, "RNG seed");

    CLI::App* dump = app.add_subcommand("dump-plan", "print the shard plan as JSON");
    add_overrides(dump);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : moc::kExitValidation;
    }

    if (*run) return moc::cmd_run(config, overrides, std::cout, std::cerr);
    if (*compare) return moc::cmd_compare(config, std::cout, std::cerr);
    if (*crash) return moc::cmd_crashtest(root, trials, seed, std::cout, std::cerr);
    return moc::cmd_dump_plan(config, overrides, std::cout, std::cerr);
}
