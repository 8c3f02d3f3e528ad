#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moc/planner.hpp"
#include "moc/store.hpp"
#include "moc/topology.hpp"

namespace moc {

enum class SourceKind : std::uint8_t { Initial, MemorySnapshot, PersistentStore };

const char* to_string(SourceKind k);

struct UnitSource {
    SourceKind kind = SourceKind::Initial;
    NodeId node = 0;              // MemorySnapshot: node holding the first piece
    std::uint64_t version = 0;    // 0 for Initial
    std::uint64_t restored_iteration = 0;

    bool operator==(const UnitSource&) const = default;
};

struct RecoveryPlan {
    std::vector<UnitSource> units;  // indexed like RankLayout::units()
    std::uint64_t resume_iteration = 0;  // min over non-expert units
    std::uint64_t version_skew = 0;      // max - min over non-expert units
};

/// A completed snapshot still held in host memory across the ranks.
struct MemorySnapshotView {
    std::uint64_t version = 0;
    std::uint64_t iteration = 0;
    const PhasePlan* content = nullptr;  // which rank holds which ranges
};

/// Picks, for every unit, the newest copy it can be rebuilt from: a memory
/// snapshot whose pieces all sit on surviving nodes, or the newest stored
/// version holding it. Experts with neither restart from their initial
/// state. Throws MissingUnit when a non-expert unit has no source while
/// some checkpoint exists.
RecoveryPlan resolve_recovery(const RankLayout& layout, const std::vector<NodeId>& failed_nodes,
                              const VersionCatalog& store, std::span<const MemorySnapshotView> memory);

}  // namespace moc
