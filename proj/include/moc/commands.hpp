#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace moc {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSimulation = 3;

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> i_ckpt;
    std::optional<std::uint32_t> k_pec;  // sets K_snapshot and K_persist too
    std::optional<std::string> strategy;
    std::optional<std::string> report;
    std::optional<std::string> timeline;
    bool dump_plan = false;
};

/// Runs a scenario file. The report goes to the configured path, or to `out`
/// when none is set; the timeline CSV is written only when a path is set.
int cmd_run(const std::filesystem::path& config, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err);

/// Blocking full, async full and async PEC runs of one scenario, side by side,
/// plus the analytic verdict.
int cmd_compare(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

int cmd_crashtest(const std::filesystem::path& root, std::uint64_t trials, std::uint64_t seed, std::ostream& out,
                  std::ostream& err);

int cmd_dump_plan(const std::filesystem::path& config, const RunOverrides& overrides, std::ostream& out,
                  std::ostream& err);

}  // namespace moc
