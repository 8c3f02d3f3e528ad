#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace moc {

struct CrashTestResult {
    std::uint64_t trials = 0;
    std::uint64_t failures = 0;
    std::uint64_t new_loaded = 0;    // crash came after the COMPLETE rename
    std::uint64_t prior_loaded = 0;  // crash left the new version incomplete
    std::vector<std::string> messages;
};

/// Persists a baseline version, then per trial persists a new version with
/// a random crash budget and checks that the newest COMPLETE version loads
/// bit-exactly. Works inside `root`, which is created if needed.
CrashTestResult run_crashtest(const std::filesystem::path& root, std::uint64_t trials, std::uint64_t seed);

}  // namespace moc
