#pragma once

#include <cstdint>

#include "moc/planner.hpp"
#include "moc/simulator.hpp"

namespace moc {

struct ConfigureResult {
    PecConfig pec;
    std::uint64_t i_ckpt = 1;
    bool infeasible = false;  // even K_snapshot = 1 cannot hide behind F&B
    Ticks snapshot_time = 0;
    Ticks persist_time = 0;
};

/// Worst-phase snapshot and persist durations of a (K_snapshot, K_persist)
/// pair under the scenario's PEC strategy (adaptive when it is a full one).
std::pair<Ticks, Ticks> pec_durations(const Scenario& scenario, std::uint32_t k_snapshot, std::uint32_t k_persist);

/// Picks the largest K_snapshot whose snapshot fits inside one F&B phase,
/// a small K_persist (the largest meeting `persist_target` when set, else 1,
/// raised to the largest K with the same persist bottleneck when the PEC
/// imbalance predicate holds), and I_ckpt = ceil(T_persist / T_iter).
ConfigureResult adaptive_configure(const Scenario& scenario);

}  // namespace moc
