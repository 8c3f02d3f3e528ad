#include "moc/planner.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "moc/errors.hpp"

namespace moc {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::Baseline: return "baseline";
        case Strategy::EqualShardedFull: return "equal_full";
        case Strategy::EqualShardedPec: return "equal_pec";
        case Strategy::AdaptivePec: return "adaptive_pec";
    }
    return "?";
}

const char* to_string(SelectionKind s) {
    return s == SelectionKind::Sequential ? "sequential" : "load_aware";
}

bool uses_pec(Strategy s) {
    return s == Strategy::EqualShardedPec || s == Strategy::AdaptivePec;
}

void PecConfig::validate(std::uint32_t n_experts) const {
    if (k_pec < 1 || k_pec > n_experts) {
        throw ValidationError("pec.k_pec", "K_pec must satisfy 1 <= K_pec <= N");
    }
    if (k_persist < 1 || k_persist > k_snapshot || k_snapshot > n_experts) {
        throw ValidationError("pec.k_order", "need 1 <= K_persist <= K_snapshot <= N (got K_persist=" +
                                                 std::to_string(k_persist) + ", K_snapshot=" +
                                                 std::to_string(k_snapshot) + ")");
    }
}

std::uint64_t PhasePlan::total_bytes() const {
    return std::accumulate(workload.begin(), workload.end(), std::uint64_t{0});
}

void PhasePlan::recompute_workload() {
    workload.assign(per_rank.size(), 0);
    for (std::size_t r = 0; r < per_rank.size(); ++r) {
        for (const auto& a : per_rank[r]) workload[r] += a.range.length();
    }
}

std::uint64_t full_checkpoint_size(const ModelSpec& model) {
    return (model.non_expert_params + model.expert_params_total()) *
               (model.bytes_weight + model.bytes_optim) +
           model.other_states_bytes;
}

std::uint64_t pec_checkpoint_size(const ModelSpec& model, std::uint32_t k) {
    if (k < 1 || k > model.experts_per_layer) {
        throw ValidationError("pec.k", "K must satisfy 1 <= K <= N");
    }
    // (K/N) * P_e is exact: P_e = N * N_moe * params_per_expert.
    const std::uint64_t saved_expert_params =
        static_cast<std::uint64_t>(k) * model.num_moe_layers * model.expert_params_per_expert;
    return (model.non_expert_params + saved_expert_params) * (model.bytes_weight + model.bytes_optim) +
           model.other_states_bytes;
}

double ideal_rank_workload(const ModelSpec& model, const ParallelSpec& parallel) {
    const double p_ne = static_cast<double>(model.non_expert_params);
    const double p_e = static_cast<double>(model.expert_params_total());
    const double dp = parallel.dp_degree;
    const double ep = parallel.ep_degree;
    return (p_ne + p_e) * model.bytes_optim / ep + p_ne * model.bytes_weight / dp +
           p_e * model.bytes_weight / ep;
}

bool pec_imbalance(const ModelSpec& model, const ParallelSpec& parallel, std::uint32_t k) {
    const std::uint64_t picks = static_cast<std::uint64_t>(k) * model.num_moe_layers;
    if (picks % parallel.ep_degree != 0) return true;
    return (picks / parallel.ep_degree) % parallel.ep_groups() != 0;
}

LayerSelection all_experts(const ModelSpec& model) {
    LayerSelection sel(model.num_moe_layers, std::vector<std::uint32_t>(model.experts_per_layer));
    for (auto& layer : sel) std::iota(layer.begin(), layer.end(), 0u);
    return sel;
}

namespace {

void add(PhasePlan& plan, Rank r, Assignment a) {
    plan.per_rank[r].push_back(a);
    plan.workload[r] += a.range.length();
}

void add_whole(PhasePlan& plan, const RankLayout& layout, Rank r, std::size_t unit) {
    add(plan, r, Assignment{static_cast<std::uint32_t>(unit), {0, layout.unit(unit).size_bytes}, 0, 1});
}

// Module indices in descending size order, ties by index.
std::vector<std::uint32_t> modules_by_size(const RankLayout& layout) {
    const auto& mods = layout.model().non_expert_modules;
    std::vector<std::uint32_t> order(mods.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return mods[a].params > mods[b].params; });
    return order;
}

std::vector<Rank> round_robin_modules(const RankLayout& layout) {
    const auto order = modules_by_size(layout);
    std::vector<Rank> owner(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        owner[order[i]] = static_cast<Rank>(i % layout.rank_count());
    }
    return owner;
}

std::vector<Rank> greedy_modules(const RankLayout& layout, std::vector<std::uint64_t> load) {
    const auto order = modules_by_size(layout);
    std::vector<Rank> owner(order.size());
    for (std::uint32_t m : order) {
        const auto it = std::min_element(load.begin(), load.end());
        const Rank r = static_cast<Rank>(it - load.begin());
        owner[m] = r;
        load[r] += layout.unit(layout.non_expert_unit(m)).size_bytes;
    }
    return owner;
}

std::uint64_t bottleneck_with(const RankLayout& layout, std::vector<std::uint64_t> load,
                              const std::vector<Rank>& owner) {
    for (std::uint32_t m = 0; m < owner.size(); ++m) {
        load[owner[m]] += layout.unit(layout.non_expert_unit(m)).size_bytes;
    }
    return *std::max_element(load.begin(), load.end());
}

}  // namespace

PhasePlan assign_checkpoint(const RankLayout& layout, Strategy strategy, const LayerSelection& selection) {
    const std::uint32_t dp = layout.rank_count();
    const std::uint32_t groups = layout.parallel().ep_groups();
    const bool split = strategy != Strategy::Baseline && groups > 1;

    PhasePlan plan;
    plan.per_rank.resize(dp);
    plan.workload.assign(dp, 0);

    for (std::uint32_t l = 0; l < selection.size(); ++l) {
        for (std::uint32_t e : selection[l]) {
            const std::size_t w = layout.expert_weight_unit(l, e);
            const std::uint64_t size = layout.unit(w).size_bytes;
            if (split) {
                const std::uint64_t share = size / groups;
                for (std::uint32_t g = 0; g < groups; ++g) {
                    const std::uint64_t begin = share * g;
                    const std::uint64_t end = g + 1 == groups ? size : begin + share;
                    add(plan, layout.host_rank(e, g), Assignment{static_cast<std::uint32_t>(w), {begin, end}, g, groups});
                }
            } else {
                add_whole(plan, layout, layout.host_rank(e, 0), w);
            }
            add_whole(plan, layout, layout.host_rank(e, 0), layout.expert_optim_unit(l, e));
        }
    }
    for (Rank r = 0; r < dp; ++r) {
        add_whole(plan, layout, r, layout.optim_shard_unit(r));
        add_whole(plan, layout, r, layout.other_states_unit(r));
    }

    const std::uint32_t n_modules = static_cast<std::uint32_t>(layout.model().non_expert_modules.size());
    std::vector<Rank> owner;
    switch (strategy) {
        case Strategy::Baseline:
            owner.assign(n_modules, 0);
            break;
        case Strategy::EqualShardedFull:
        case Strategy::EqualShardedPec:
            owner = round_robin_modules(layout);
            break;
        case Strategy::AdaptivePec: {
            owner = greedy_modules(layout, plan.workload);
            auto rr = round_robin_modules(layout);
            if (bottleneck_with(layout, plan.workload, rr) < bottleneck_with(layout, plan.workload, owner)) {
                owner = std::move(rr);
            }
            break;
        }
    }
    for (std::uint32_t m = 0; m < n_modules; ++m) {
        add_whole(plan, layout, owner[m], layout.non_expert_unit(m));
    }
    return plan;
}

PhasePlan restrict_experts(const RankLayout& layout, const PhasePlan& plan, const LayerSelection& keep) {
    PhasePlan out;
    out.per_rank.resize(plan.per_rank.size());
    for (std::size_t r = 0; r < plan.per_rank.size(); ++r) {
        for (const auto& a : plan.per_rank[r]) {
            const StateUnit& u = layout.unit(a.unit);
            if (is_expert_kind(u.kind)) {
                const auto& layer = keep.at(u.layer);
                if (!std::binary_search(layer.begin(), layer.end(), u.expert)) continue;
            }
            out.per_rank[r].push_back(a);
        }
    }
    out.recompute_workload();
    return out;
}

ShardPlan plan_baseline(const RankLayout& layout) {
    ShardPlan plan;
    plan.strategy = Strategy::Baseline;
    plan.phases.push_back(assign_checkpoint(layout, Strategy::Baseline, all_experts(layout.model())));
    return plan;
}

ShardPlan plan_equal(const RankLayout& layout, const std::optional<SequentialSchedule>& schedule) {
    ShardPlan plan;
    if (!schedule) {
        plan.strategy = Strategy::EqualShardedFull;
        plan.phases.push_back(assign_checkpoint(layout, plan.strategy, all_experts(layout.model())));
        return plan;
    }
    plan.strategy = Strategy::EqualShardedPec;
    for (std::uint32_t c = 0; c < schedule->repeat_period(); ++c) {
        plan.phases.push_back(assign_checkpoint(layout, plan.strategy, schedule->snapshot_selection(c)));
    }
    return plan;
}

ShardPlan plan_adaptive(const RankLayout& layout, const SequentialSchedule& schedule) {
    ShardPlan plan;
    plan.strategy = Strategy::AdaptivePec;
    for (std::uint32_t c = 0; c < schedule.repeat_period(); ++c) {
        plan.phases.push_back(assign_checkpoint(layout, plan.strategy, schedule.snapshot_selection(c)));
    }
    return plan;
}

ShardPlan make_plan(const RankLayout& layout, Strategy strategy, const SequentialSchedule& schedule) {
    switch (strategy) {
        case Strategy::Baseline: return plan_baseline(layout);
        case Strategy::EqualShardedFull: return plan_equal(layout, std::nullopt);
        case Strategy::EqualShardedPec: return plan_equal(layout, schedule);
        case Strategy::AdaptivePec: return plan_adaptive(layout, schedule);
    }
    throw std::logic_error("unknown strategy");
}

std::pair<Rank, std::uint64_t> bottleneck_workload(const PhasePlan& phase) {
    const auto it = std::max_element(phase.workload.begin(), phase.workload.end());
    return {static_cast<Rank>(it - phase.workload.begin()), *it};
}

std::pair<Rank, std::uint64_t> bottleneck_workload(const ShardPlan& plan, std::uint32_t phase) {
    if (phase >= plan.period()) {
        throw ValidationError("plan.phase", "phase " + std::to_string(phase) + " outside period " +
                                                std::to_string(plan.period()));
    }
    return bottleneck_workload(plan.phases[phase]);
}

void check_coverage(const RankLayout& layout, const PhasePlan& phase, const LayerSelection& selection) {
    const auto& units = layout.units();
    std::vector<std::vector<ByteRange>> ranges(units.size());
    std::vector<bool> seen(units.size(), false);
    for (std::size_t r = 0; r < phase.per_rank.size(); ++r) {
        std::uint64_t sum = 0;
        for (const auto& a : phase.per_rank[r]) {
            if (a.range.begin > a.range.end || a.range.end > units.at(a.unit).size_bytes) {
                throw std::logic_error("range outside unit " + units[a.unit].key);
            }
            ranges[a.unit].push_back(a.range);
            seen[a.unit] = true;
            sum += a.range.length();
        }
        if (sum != phase.workload.at(r)) {
            throw std::logic_error("workload mismatch on rank " + std::to_string(r));
        }
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        const StateUnit& u = units[i];
        bool due = true;
        if (is_expert_kind(u.kind)) {
            const auto& layer = selection.at(u.layer);
            due = std::binary_search(layer.begin(), layer.end(), u.expert);
        }
        if (!due) {
            if (seen[i]) throw std::logic_error("unit not due but assigned: " + u.key);
            continue;
        }
        if (!seen[i]) throw std::logic_error("unit due but unassigned: " + u.key);
        auto& rs = ranges[i];
        std::sort(rs.begin(), rs.end(), [](const ByteRange& a, const ByteRange& b) {
            return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
        });
        std::uint64_t cursor = 0;
        for (const auto& br : rs) {
            if (br.begin != cursor) throw std::logic_error("gap or overlap in unit " + u.key);
            cursor = br.end;
        }
        if (cursor != u.size_bytes) throw std::logic_error("unit not fully covered: " + u.key);
    }
}

}  // namespace moc
