#include "moc/recovery.hpp"

#include <algorithm>
#include <limits>

#include "moc/errors.hpp"

namespace moc {

const char* to_string(SourceKind k) {
    switch (k) {
        case SourceKind::Initial: return "initial";
        case SourceKind::MemorySnapshot: return "memory";
        case SourceKind::PersistentStore: return "storage";
    }
    return "?";
}

namespace {

bool newer(const UnitSource& a, const UnitSource& b) {
    if (a.restored_iteration != b.restored_iteration) return a.restored_iteration > b.restored_iteration;
    return a.version > b.version;
}

}  // namespace

RecoveryPlan resolve_recovery(const RankLayout& layout, const std::vector<NodeId>& failed_nodes,
                              const VersionCatalog& store, std::span<const MemorySnapshotView> memory) {
    const auto& units = layout.units();
    std::vector<bool> rank_alive(layout.rank_count(), true);
    for (Rank r = 0; r < layout.rank_count(); ++r) {
        rank_alive[r] = std::find(failed_nodes.begin(), failed_nodes.end(), layout.node_of(r)) == failed_nodes.end();
    }

    RecoveryPlan plan;
    plan.units.assign(units.size(), UnitSource{});
    std::vector<bool> found(units.size(), false);

    for (std::size_t u = 0; u < units.size(); ++u) {
        if (auto v = store.latest_for_unit(u)) {
            plan.units[u] = UnitSource{SourceKind::PersistentStore, 0, *v, store.iteration_of(*v)};
            found[u] = true;
        }
    }

    // state per unit while scanning one snapshot: 0 absent, 1 intact, 2 lost
    std::vector<std::uint8_t> state(units.size());
    std::vector<NodeId> holder(units.size());
    for (const auto& snap : memory) {
        std::fill(state.begin(), state.end(), 0);
        const auto& per_rank = snap.content->per_rank;
        for (Rank r = 0; r < per_rank.size(); ++r) {
            for (const auto& a : per_rank[r]) {
                if (!rank_alive[r]) {
                    state[a.unit] = 2;
                } else if (state[a.unit] == 0) {
                    state[a.unit] = 1;
                    holder[a.unit] = layout.node_of(r);
                }
            }
        }
        for (std::size_t u = 0; u < units.size(); ++u) {
            if (state[u] != 1) continue;
            const UnitSource cand{SourceKind::MemorySnapshot, holder[u], snap.version, snap.iteration};
            if (!found[u] || newer(cand, plan.units[u]) ||
                (cand.version == plan.units[u].version && plan.units[u].kind == SourceKind::PersistentStore)) {
                plan.units[u] = cand;
                found[u] = true;
            }
        }
    }

    const bool any_checkpoint = !store.empty() || !memory.empty();
    std::uint64_t lo = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t hi = 0;
    for (std::size_t u = 0; u < units.size(); ++u) {
        if (is_expert_kind(units[u].kind)) continue;
        if (!found[u] && any_checkpoint) throw MissingUnit(units[u].key);
        lo = std::min(lo, plan.units[u].restored_iteration);
        hi = std::max(hi, plan.units[u].restored_iteration);
    }
    plan.resume_iteration = lo;
    plan.version_skew = hi - lo;
    return plan;
}

}  // namespace moc
