#include "moc/configure.hpp"

#include <algorithm>

namespace moc {

namespace {

struct Bottlenecks {
    std::uint64_t snapshot = 0;
    std::uint64_t persist = 0;
};

Bottlenecks worst_phase(const RankLayout& layout, Strategy strategy, std::uint32_t k_snapshot,
                        std::uint32_t k_persist) {
    const auto& model = layout.model();
    SequentialSchedule schedule(model.experts_per_layer, model.num_moe_layers, k_snapshot, k_persist);
    const ShardPlan plan = make_plan(layout, strategy, schedule);
    Bottlenecks b;
    for (std::uint32_t c = 0; c < plan.period(); ++c) {
        b.snapshot = std::max(b.snapshot, bottleneck_workload(plan.phases[c]).second);
        const PhasePlan persist = restrict_experts(layout, plan.phases[c], schedule.persist_selection(c));
        b.persist = std::max(b.persist, bottleneck_workload(persist).second);
    }
    return b;
}

Strategy pec_strategy(const Scenario& s) {
    return uses_pec(s.strategy) ? s.strategy : Strategy::AdaptivePec;
}

}  // namespace

std::pair<Ticks, Ticks> pec_durations(const Scenario& scenario, std::uint32_t k_snapshot, std::uint32_t k_persist) {
    const RankLayout layout = build_layout(scenario.model, scenario.parallel, scenario.cluster);
    const Bottlenecks b = worst_phase(layout, pec_strategy(scenario), k_snapshot, k_persist);
    return {transfer_ticks(b.snapshot, scenario.cluster.snapshot_bandwidth),
            transfer_ticks(b.persist, scenario.cluster.persist_bandwidth)};
}

ConfigureResult adaptive_configure(const Scenario& scenario) {
    const RankLayout layout = build_layout(scenario.model, scenario.parallel, scenario.cluster);
    const Strategy strategy = pec_strategy(scenario);
    const std::uint32_t n = scenario.model.experts_per_layer;
    const Ticks fb = seconds_to_ticks(scenario.cluster.fb_time);
    const Ticks iter = fb + seconds_to_ticks(scenario.cluster.update_time);
    const auto& cluster = scenario.cluster;

    const auto choose_persist = [&](std::uint32_t ks) {
        std::uint32_t kp = 1;
        if (scenario.persist_target) {
            const Ticks target = seconds_to_ticks(*scenario.persist_target);
            for (std::uint32_t k = ks; k >= 1; --k) {
                if (transfer_ticks(worst_phase(layout, strategy, ks, k).persist, cluster.persist_bandwidth) <= target) {
                    kp = k;
                    break;
                }
            }
        }
        if (pec_imbalance(scenario.model, scenario.parallel, kp)) {
            const std::uint64_t base = worst_phase(layout, strategy, ks, kp).persist;
            for (std::uint32_t k = ks; k > kp; --k) {
                if (worst_phase(layout, strategy, ks, k).persist == base) {
                    kp = k;
                    break;
                }
            }
        }
        return kp;
    };

    ConfigureResult out;
    out.infeasible = true;
    std::uint32_t ks = 1;
    std::uint32_t kp = 1;
    for (std::uint32_t k = n; k >= 1; --k) {
        const std::uint32_t p = choose_persist(k);
        const Bottlenecks b = worst_phase(layout, strategy, k, p);
        if (transfer_ticks(b.snapshot, cluster.snapshot_bandwidth) <= fb) {
            ks = k;
            kp = p;
            out.infeasible = false;
            break;
        }
    }
    if (out.infeasible) kp = choose_persist(1);

    const Bottlenecks b = worst_phase(layout, strategy, ks, kp);
    out.snapshot_time = transfer_ticks(b.snapshot, cluster.snapshot_bandwidth);
    out.persist_time = transfer_ticks(b.persist, cluster.persist_bandwidth);
    out.pec = PecConfig{kp, scenario.pec.selection, ks, kp};
    out.i_ckpt = std::max<std::uint64_t>(1, static_cast<std::uint64_t>((out.persist_time + iter - 1) / iter));
    return out;
}

}  // namespace moc
