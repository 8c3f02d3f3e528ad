#include <gtest/gtest.h>

#include <filesystem>

#include "moc/errors.hpp"
#include "moc/scenario_io.hpp"
#include "moc/simulator.hpp"
#include "test_support.hpp"

using namespace moc;
using moc::testing::make_cluster;
using moc::testing::make_model;
using moc::testing::make_parallel;

namespace {

// One MoE layer of four experts on a single rank, 100 tokens per iteration,
// fast storage so every persist lands well before the next checkpoint.
Scenario ledger_example() {
    Scenario s;
    s.model = make_model(1, 4, 100, {400});
    s.parallel = make_parallel(1, 1);
    s.cluster = make_cluster(1, 1);
    s.cluster.snapshot_bandwidth = 1e12;
    s.cluster.persist_bandwidth = 1e12;
    s.cluster.fb_time = 1.0;
    s.cluster.update_time = 0.1;
    s.cluster.restart_time = 5.0;
    s.strategy = Strategy::EqualShardedPec;
    s.pec = PecConfig::uniform(1);
    s.i_ckpt = 10;
    s.i_total = 100;
    s.tokens_per_iteration = 100;
    s.faults.events = {{35, {0}}};
    return s;
}

Ticks stall_sum(const SimReport& r, const std::string& cause) {
    Ticks sum = 0;
    for (const auto& s : r.stalls) {
        if (s.cause == cause) sum += s.ticks;
    }
    return sum;
}

}  // namespace

TEST(Ticks, ConversionsSnapAndRoundUp) {
    EXPECT_EQ(seconds_to_ticks(0.1), 100000);
    EXPECT_EQ(seconds_to_ticks(1.0000004), 1000001);
    EXPECT_EQ(seconds_to_ticks(3.0), 3000000);
    EXPECT_EQ(transfer_ticks(3, 1e6), 3);
    EXPECT_EQ(transfer_ticks(1, 3e6), 1);
    EXPECT_EQ(transfer_ticks(300, 1e8), 3);
    EXPECT_EQ(format_ticks(1234567), "1.234567");
    EXPECT_EQ(format_ticks(5), "0.000005");
}

TEST(PltLedger, RestoreCountsDifference) {
    PltLedger l(1, 2, 1000);
    l.absorb({10, 20});
    l.absorb({5, 5});
    EXPECT_EQ(l.absorbed(0, 0), 15u);
    EXPECT_EQ(l.unsaved_snapshot(0, 1), 25u);
    l.mark_snapshot(0, 1);
    EXPECT_EQ(l.unsaved_snapshot(0, 1), 0u);
    l.mark_persist(0, 0, 10);
    EXPECT_EQ(l.unsaved_persist(0, 0), 5u);
    EXPECT_EQ(l.restore(0, 0, 10), 5u);
    EXPECT_EQ(l.restore(0, 1, 0), 25u);
    EXPECT_EQ(l.lost(0), 30u);
    EXPECT_DOUBLE_EQ(l.plt(), 0.03);
}

TEST(Simulator, HandLedgerExample) {
    const SimReport r = run_scenario(ledger_example());
    ASSERT_EQ(r.faults.size(), 1u);
    const FaultRecord& f = r.faults[0];
    EXPECT_EQ(f.iteration, 35u);
    EXPECT_EQ(f.lost_tokens, 2000u);  // 625 + 375 + 125 + 875
    EXPECT_DOUBLE_EQ(f.plt_added, 0.2);
    EXPECT_EQ(f.resume_iteration, 30u);
    EXPECT_EQ(f.replayed_iterations, 5u);
    EXPECT_DOUBLE_EQ(r.plt, 0.2);
    EXPECT_EQ(r.lost_tokens_per_layer, std::vector<std::uint64_t>{2000});
}

TEST(Simulator, HandLedgerRestoredIterations) {
    Simulator sim(ledger_example());
    while (sim.iteration() < 35) sim.step();
    // E0 saved at 10, E1 at 20, E2 at 30, E3 never
    const VersionCatalog& c = sim.catalog();
    const RankLayout& layout = sim.layout();
    const std::uint64_t want[] = {10, 20, 30};
    for (std::uint32_t e = 0; e < 3; ++e) {
        const auto v = c.latest_for_unit(layout.expert_weight_unit(0, e));
        ASSERT_TRUE(v);
        EXPECT_EQ(c.iteration_of(*v), want[e]);
    }
    EXPECT_FALSE(c.latest_for_unit(layout.expert_weight_unit(0, 3)));
}

TEST(Simulator, TwoLevelRecoveryLosesLess) {
    // two nodes, one rank each; experts 0 and 2 on node 0, 1 and 3 on node 1
    Scenario s = ledger_example();
    s.parallel = make_parallel(2, 2);
    s.cluster = make_cluster(2, 1);
    s.cluster.snapshot_bandwidth = s.cluster.persist_bandwidth = 1e12;
    s.pec = PecConfig{1, SelectionKind::Sequential, 4, 1};
    const SimReport two = run_scenario(s);
    s.two_level_recovery = false;
    const SimReport one = run_scenario(s);
    EXPECT_GT(two.faults[0].from_memory, 0u);
    EXPECT_LT(two.plt, one.plt);
    EXPECT_DOUBLE_EQ(one.plt, 0.2);
}

TEST(Simulator, FaultBeforeFirstCheckpointLosesEverything) {
    Scenario s = ledger_example();
    s.faults.events = {{7, {0}}};
    const SimReport r = run_scenario(s);
    EXPECT_EQ(r.faults[0].resume_iteration, 0u);
    EXPECT_EQ(r.faults[0].lost_tokens, 700u);
    EXPECT_EQ(r.faults[0].from_initial, Simulator(s).layout().units().size());
}

TEST(Simulator, StallIsSnapshotOverhang) {
    // full snapshot of 3 s against a 2 s F&B: 1 s per checkpoint
    Scenario s = ledger_example();
    s.faults.events.clear();
    s.tokens_per_iteration = 0;
    s.strategy = Strategy::EqualShardedFull;
    s.cluster.fb_time = 2.0;
    const std::uint64_t bytes = full_checkpoint_size(s.model);
    s.cluster.snapshot_bandwidth = static_cast<double>(bytes) / 3.0;
    s.i_ckpt = 10;
    s.i_total = 50;
    const SimReport r = run_scenario(s);
    EXPECT_EQ(r.snapshot_time, 3 * kTicksPerSecond);
    EXPECT_EQ(r.checkpoints, 5u);
    EXPECT_EQ(stall_sum(r, "snapshot"), 4 * kTicksPerSecond);
    EXPECT_EQ(stall_sum(r, "final"), 1 * kTicksPerSecond);
    EXPECT_EQ(r.o_save, 5 * kTicksPerSecond);
}

TEST(Simulator, OverlappedSnapshotsCostNothing) {
    Scenario s = ledger_example();
    s.faults.events.clear();
    const SimReport r = run_scenario(s);
    EXPECT_EQ(r.o_save, 0);
    EXPECT_EQ(r.o_ckpt, 0);
    EXPECT_TRUE(r.stalls.empty());
    EXPECT_EQ(r.wall_time, 100 * seconds_to_ticks(1.1));
}

TEST(Simulator, BlockingSingleFaultClosedForm) {
    Scenario s = ledger_example();
    s.mode = CheckpointMode::Blocking;
    s.strategy = Strategy::Baseline;
    const std::uint64_t bytes = full_checkpoint_size(s.model);
    s.cluster.snapshot_bandwidth = static_cast<double>(bytes) / 0.5;
    s.cluster.persist_bandwidth = static_cast<double>(bytes) / 2.0;
    const SimReport r = run_scenario(s);
    const Ticks o_save = seconds_to_ticks(2.5);
    const Ticks expected = o_save * 10 + seconds_to_ticks(5.0) + 5 * seconds_to_ticks(1.1);
    EXPECT_EQ(r.checkpoints, 10u);
    EXPECT_EQ(r.o_save, o_save * 10);
    EXPECT_EQ(r.o_lost, 5 * seconds_to_ticks(1.1));
    EXPECT_EQ(r.o_ckpt, expected);
    EXPECT_EQ(r.o_ckpt, r.o_save + r.o_restart + r.o_lost);
}

TEST(Simulator, SlowPersistCausesBufferStall) {
    Scenario s = ledger_example();
    s.faults.events.clear();
    s.i_ckpt = 1;
    s.cluster.persist_bandwidth = static_cast<double>(full_checkpoint_size(s.model)) / 10.0;
    const SimReport r = run_scenario(s);
    EXPECT_GT(stall_sum(r, "buffer"), 0);
    EXPECT_GT(r.min_feasible_i_ckpt, 1u);
}

TEST(Simulator, IdenticalRunsGiveIdenticalReports) {
    Scenario s = ledger_example();
    s.routing.kind = RoutingKind::Zipf;
    s.model.top_k = 2;
    s.faults = FaultConfig{FaultKind::Poisson, {}};
    s.cluster.failure_rate = 0.03;
    s.rng_seed = 99;
    const std::string a = report_to_json(run_scenario(s)).dump();
    const std::string b = report_to_json(run_scenario(s)).dump();
    EXPECT_EQ(a, b);
    s.rng_seed = 100;
    EXPECT_NE(a, report_to_json(run_scenario(s)).dump());
}

TEST(Simulator, PoissonFaultsStrike) {
    Scenario s = ledger_example();
    s.faults = FaultConfig{FaultKind::Poisson, {}};
    s.cluster.failure_rate = 0.05;
    s.i_total = 400;
    const SimReport r = run_scenario(s);
    EXPECT_GT(r.faults.size(), 3u);
    EXPECT_GT(r.iterations_executed, 400u);
}

TEST(Simulator, DynamicKDoublesAfterCostlyFaults) {
    Scenario s = ledger_example();
    s.model = make_model(2, 16, 100, {400});
    s.i_total = 2000;
    s.pec = PecConfig::uniform(1);
    s.dynamic_k.enabled = true;
    s.faults.events.clear();
    for (std::uint64_t f = 150; f < 2000; f += 150) s.faults.events.push_back({f + 3, {0}});
    const SimReport r = run_scenario(s);
    ASSERT_EQ(r.k_trace.size(), s.faults.events.size() + 1);
    EXPECT_EQ(r.k_trace.front(), 1u);
    EXPECT_GT(r.k_trace.back(), 1u);
    for (std::size_t i = 1; i < r.k_trace.size(); ++i) {
        EXPECT_TRUE(r.k_trace[i] == r.k_trace[i - 1] || r.k_trace[i] == 2 * r.k_trace[i - 1]);
    }
}

TEST(Simulator, DiskStoreHoldsNewestVersion) {
    const auto root = std::filesystem::temp_directory_path() / "moc_sim_disk_test";
    std::filesystem::remove_all(root);
    Scenario s = ledger_example();
    s.store = StoreConfig{StoreKind::Disk, root.string()};
    s.i_total = 40;
    s.faults.events = {{25, {0}}};
    const SimReport r = run_scenario(s);
    DiskStore store(root);
    const auto latest = store.latest_complete();
    ASSERT_TRUE(latest);
    EXPECT_EQ(store.read_manifest(*latest).iteration, 40u);
    EXPECT_NO_THROW(store.load(*latest));
    EXPECT_EQ(r.failed_persists, 0u);
    std::filesystem::remove_all(root);
}

TEST(Simulator, TimelineRecordsEvents) {
    const SimReport r = run_scenario(ledger_example());
    bool fault = false, persist = false;
    for (const auto& e : r.timeline) {
        fault = fault || e.event == "fault";
        persist = persist || e.event == "persist_done";
    }
    EXPECT_TRUE(fault);
    EXPECT_TRUE(persist);
    const std::string csv = timeline_csv(r);
    EXPECT_EQ(csv.rfind("time,rank,event,detail\n", 0), 0u);
}

namespace {

std::string validation_of(const Scenario& s) {
    try {
        s.validate();
    } catch (const ValidationError& e) {
        return e.constraint();
    }
    return "";
}

}  // namespace

TEST(Scenario, ValidationNamesConstraint) {
    Scenario s = ledger_example();
    EXPECT_EQ(validation_of(s), "");
    s.i_total = 5;
    EXPECT_EQ(validation_of(s), "scenario.i_total");
    s = ledger_example();
    s.strategy = Strategy::AdaptivePec;
    s.pec.selection = SelectionKind::LoadAware;
    EXPECT_EQ(validation_of(s), "strategy.adaptive_selection");
    s = ledger_example();
    s.faults.events = {{20, {0}}, {10, {0}}};
    EXPECT_EQ(validation_of(s), "faults.events");
    s = ledger_example();
    s.capacity_factor = 0.0;
    EXPECT_EQ(validation_of(s), "scenario.capacity_factor");
    s = ledger_example();
    s.parallel = make_parallel(3, 2);
    EXPECT_NE(validation_of(s), "");
}

TEST(Simulator, LoadAwareSelectionRuns) {
    Scenario s = ledger_example();
    s.pec.selection = SelectionKind::LoadAware;
    s.routing.kind = RoutingKind::Zipf;
    const SimReport r = run_scenario(s);
    EXPECT_GT(r.plt, 0.0);
    EXPECT_LT(r.plt, 1.0);
}
