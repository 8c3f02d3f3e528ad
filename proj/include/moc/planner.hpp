#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "moc/selector.hpp"
#include "moc/topology.hpp"

namespace moc {

enum class Strategy { Baseline, EqualShardedFull, EqualShardedPec, AdaptivePec };
enum class SelectionKind { Sequential, LoadAware };

const char* to_string(Strategy s);
const char* to_string(SelectionKind s);
bool uses_pec(Strategy s);

struct PecConfig {
    std::uint32_t k_pec = 1;
    SelectionKind selection = SelectionKind::Sequential;
    std::uint32_t k_snapshot = 1;
    std::uint32_t k_persist = 1;

    static PecConfig uniform(std::uint32_t k, SelectionKind sel = SelectionKind::Sequential) {
        return PecConfig{k, sel, k, k};
    }
    void validate(std::uint32_t n_experts) const;

    bool operator==(const PecConfig&) const = default;
};

struct ByteRange {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    std::uint64_t length() const { return end - begin; }
    bool operator==(const ByteRange&) const = default;
};

/// One contiguous byte range of a unit, saved by one rank. `parts` > 1 when the
/// unit is split across ranks; `part` is this range's position.
struct Assignment {
    std::uint32_t unit = 0;
    ByteRange range;
    std::uint32_t part = 0;
    std::uint32_t parts = 1;

    bool operator==(const Assignment&) const = default;
};

/// Per-rank save assignment for one checkpoint.
struct PhasePlan {
    std::vector<std::vector<Assignment>> per_rank;
    std::vector<std::uint64_t> workload;

    std::uint64_t total_bytes() const;
    void recompute_workload();
};

struct ShardPlan {
    Strategy strategy = Strategy::Baseline;
    std::vector<PhasePlan> phases;  // indexed by checkpoint index modulo period

    std::uint32_t period() const { return static_cast<std::uint32_t>(phases.size()); }
    const PhasePlan& phase(std::uint64_t checkpoint) const { return phases[checkpoint % phases.size()]; }
    std::uint64_t workload_bytes(std::uint32_t phase, Rank r) const { return phases.at(phase).workload.at(r); }
};

/// C_full (exact integer form, including other-state bytes).
std::uint64_t full_checkpoint_size(const ModelSpec& model);
/// C_pec for K saved experts per MoE layer.
std::uint64_t pec_checkpoint_size(const ModelSpec& model, std::uint32_t k);
/// Ideal per-rank workload under full sharding.
double ideal_rank_workload(const ModelSpec& model, const ParallelSpec& parallel);
/// True when PEC with K experts per layer cannot spread expert saves evenly.
bool pec_imbalance(const ModelSpec& model, const ParallelSpec& parallel, std::uint32_t k);

LayerSelection all_experts(const ModelSpec& model);

/// Assignment for one checkpoint saving the experts in `selection`.
PhasePlan assign_checkpoint(const RankLayout& layout, Strategy strategy, const LayerSelection& selection);

/// Drops expert units whose expert is not in `keep`; non-expert entries stay.
PhasePlan restrict_experts(const RankLayout& layout, const PhasePlan& plan, const LayerSelection& keep);

ShardPlan plan_baseline(const RankLayout& layout);
ShardPlan plan_equal(const RankLayout& layout, const std::optional<SequentialSchedule>& schedule);
ShardPlan plan_adaptive(const RankLayout& layout, const SequentialSchedule& schedule);

/// Plan for `strategy`; full strategies ignore `schedule`.
ShardPlan make_plan(const RankLayout& layout, Strategy strategy, const SequentialSchedule& schedule);

/// Heaviest rank at `phase` (lowest rank on ties) and its bytes.
std::pair<Rank, std::uint64_t> bottleneck_workload(const ShardPlan& plan, std::uint32_t phase);
std::pair<Rank, std::uint64_t> bottleneck_workload(const PhasePlan& phase);

/// Throws std::logic_error unless every unit due under `selection` is covered
/// exactly once (no gap, no overlap), nothing else is assigned, and the
/// workloads match the ranges.
void check_coverage(const RankLayout& layout, const PhasePlan& phase, const LayerSelection& selection);

}  // namespace moc
