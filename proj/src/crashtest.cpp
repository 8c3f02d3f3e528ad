#include "moc/crashtest.hpp"

#include <random>

#include "moc/errors.hpp"
#include "moc/store.hpp"

namespace fs = std::filesystem;

namespace moc {

namespace {

struct EntryShape {
    std::string key;
    Rank rank;
    std::uint64_t size;
};

std::vector<EntryShape> make_shapes(std::mt19937_64& rng) {
    std::vector<EntryShape> shapes;
    const std::uint32_t ranks = 2 + rng() % 3;
    for (Rank r = 0; r < ranks; ++r) {
        const std::uint32_t files = 1 + rng() % 3;
        for (std::uint32_t f = 0; f < files; ++f) {
            shapes.push_back({"r" + std::to_string(r) + "_u" + std::to_string(f), r, 1 + rng() % 4096});
        }
    }
    return shapes;
}

std::vector<PendingEntry> materialize(const std::vector<EntryShape>& shapes, std::uint64_t version) {
    std::vector<PendingEntry> out;
    for (const auto& s : shapes) out.push_back({s.key, s.rank, make_payload(s.key, version, 0, s.size)});
    return out;
}

// Empty string when `version` loads and matches the regenerated payload.
std::string verify(const DiskStore& store, std::uint64_t version, const std::vector<EntryShape>& shapes) {
    std::map<std::string, Bytes> loaded;
    try {
        loaded = store.load(version);
    } catch (const StoreError& e) {
        return e.what();
    }
    if (loaded.size() != shapes.size()) return "entry count differs";
    for (const auto& s : shapes) {
        auto it = loaded.find(s.key);
        if (it == loaded.end()) return "missing key " + s.key;
        if (it->second != make_payload(s.key, version, 0, s.size)) return "payload differs for " + s.key;
    }
    return {};
}

void prune(const DiskStore& store, std::uint64_t keep) {
    for (std::uint64_t v : store.versions()) {
        if (v != keep) fs::remove_all(store.version_dir(v));
    }
}

}  // namespace

CrashTestResult run_crashtest(const fs::path& root, std::uint64_t trials, std::uint64_t seed) {
    CrashTestResult result;
    result.trials = trials;
    fs::create_directories(root);
    DiskStore store(root, StoreOptions{.fsync = false});
    for (std::uint64_t v : store.versions()) fs::remove_all(store.version_dir(v));

    std::mt19937_64 rng(seed);
    const std::vector<EntryShape> shapes = make_shapes(rng);
    std::uint64_t version = 1;
    CrashInjector meter;
    store.persist(version, 0, materialize(shapes, version), &meter);
    // Budgets beyond the cost let some persists finish. The slack also covers
    // manifest header digits growing with the version.
    const std::uint64_t cost = meter.consumed() + meter.consumed() / 4 + 16;

    std::uint64_t prior = version;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const std::uint64_t next = version + 1 + t;
        CrashInjector crash(rng() % (cost + 1));
        bool crashed = false;
        try {
            store.persist(next, next, materialize(shapes, next), &crash);
        } catch (const SimulatedCrash&) {
            crashed = true;
        }
        const auto latest = store.latest_complete();
        std::string problem;
        if (!latest) {
            problem = "no complete version";
        } else if (*latest != next && *latest != prior) {
            problem = "unexpected latest version " + std::to_string(*latest);
        } else if (!crashed && *latest != next) {
            problem = "uncrashed persist is not complete";
        } else {
            problem = verify(store, *latest, shapes);
        }
        if (!problem.empty()) {
            ++result.failures;
            result.messages.push_back("trial " + std::to_string(t) + ": " + problem);
            continue;
        }
        if (*latest == next) {
            ++result.new_loaded;
        } else {
            ++result.prior_loaded;
        }
        prior = *latest;
        prune(store, prior);
    }
    return result;
}

}  // namespace moc
