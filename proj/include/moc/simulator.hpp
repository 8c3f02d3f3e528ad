#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "moc/buffer.hpp"
#include "moc/planner.hpp"
#include "moc/recovery.hpp"
#include "moc/routing.hpp"
#include "moc/selector.hpp"
#include "moc/store.hpp"
#include "moc/topology.hpp"

namespace moc {

using Ticks = std::int64_t;  // microseconds
constexpr Ticks kTicksPerSecond = 1'000'000;

/// Seconds -> ticks, rounded up (values within 1e-6 of a tick snap to it).
Ticks seconds_to_ticks(double seconds);
/// Time to move `bytes` at `bandwidth` bytes/s, rounded up to a tick.
Ticks transfer_ticks(std::uint64_t bytes, double bandwidth);
double ticks_to_seconds(Ticks t);
/// Fixed 6-decimal rendering computed from the integer tick count.
std::string format_ticks(Ticks t);

enum class CheckpointMode : std::uint8_t { Async, Blocking };
enum class FaultKind : std::uint8_t { Scripted, Poisson };
enum class StoreKind : std::uint8_t { Memory, Disk };

const char* to_string(CheckpointMode m);

/// Fault "after iteration `iteration`": it strikes at the end of the F&B
/// phase of the next iteration and takes down `nodes`.
struct FaultEvent {
    std::uint64_t iteration = 0;
    std::vector<NodeId> nodes;

    bool operator==(const FaultEvent&) const = default;
};

struct FaultConfig {
    FaultKind kind = FaultKind::Scripted;
    std::vector<FaultEvent> events;  // Scripted; iterations strictly increasing

    bool operator==(const FaultConfig&) const = default;
};

struct DynamicKConfig {
    bool enabled = false;
    double threshold = 0.0375;

    bool operator==(const DynamicKConfig&) const = default;
};

struct StoreConfig {
    StoreKind kind = StoreKind::Memory;
    std::string root;  // Disk only; empty means $MOC_STORE_ROOT or ./moc_store

    bool operator==(const StoreConfig&) const = default;
};

struct OutputConfig {
    std::string report;
    std::string timeline;
    bool dump_plan = false;
    bool record_timeline = true;

    bool operator==(const OutputConfig&) const = default;
};

struct Scenario {
    ModelSpec model;
    ParallelSpec parallel;
    ClusterSpec cluster;
    PecConfig pec;
    DynamicKConfig dynamic_k;
    Strategy strategy = Strategy::AdaptivePec;
    CheckpointMode mode = CheckpointMode::Async;
    bool two_level_recovery = true;
    std::uint64_t i_ckpt = 1;
    std::uint64_t i_total = 1;
    RoutingConfig routing;
    std::uint64_t tokens_per_iteration = 0;
    std::optional<double> capacity_factor;
    FaultConfig faults;
    std::uint64_t rng_seed = 0;
    StoreConfig store;
    OutputConfig output;
    std::optional<double> persist_target;  // seconds, used by adaptive_configure

    /// Effective snapshot/persist widths: N for the full strategies.
    std::uint32_t k_snapshot() const;
    std::uint32_t k_persist() const;

    void validate() const;

    bool operator==(const Scenario&) const = default;
};

/// Token accounting for PLT. Every expert carries the number of token
/// assignments its current state has absorbed; a restore to a copy that had
/// absorbed fewer counts the difference as lost.
class PltLedger {
public:
    PltLedger() = default;
    PltLedger(std::uint32_t n_layers, std::uint32_t n_experts, std::uint64_t denominator_per_layer);

    std::uint32_t layers() const { return n_layers_; }
    std::uint32_t experts() const { return n_experts_; }
    std::size_t index(std::uint32_t l, std::uint32_t e) const { return static_cast<std::size_t>(l) * n_experts_ + e; }

    void absorb(const std::vector<std::uint64_t>& delivered);
    std::uint64_t absorbed(std::uint32_t l, std::uint32_t e) const { return absorbed_[index(l, e)]; }
    const std::vector<std::uint64_t>& absorbed_all() const { return absorbed_; }

    /// Tokens the current state holds beyond the last save at each tier.
    std::uint64_t unsaved_snapshot(std::uint32_t l, std::uint32_t e) const;
    std::uint64_t unsaved_persist(std::uint32_t l, std::uint32_t e) const;
    void mark_snapshot(std::uint32_t l, std::uint32_t e) { snap_last_[index(l, e)] = absorbed_[index(l, e)]; }
    void mark_persist(std::uint32_t l, std::uint32_t e, std::uint64_t saved) { persist_last_[index(l, e)] = saved; }
    LoadCounters snapshot_counters() const;
    LoadCounters persist_counters() const;

    /// Rolls the expert back to a copy that had absorbed `saved`; returns the
    /// tokens lost.
    std::uint64_t restore(std::uint32_t l, std::uint32_t e, std::uint64_t saved);

    std::uint64_t lost(std::uint32_t l) const { return lost_[l]; }
    std::uint64_t denominator() const { return denominator_; }
    double plt_layer(std::uint32_t l) const;
    double plt() const;

private:
    std::uint32_t n_layers_ = 0;
    std::uint32_t n_experts_ = 0;
    std::uint64_t denominator_ = 0;
    std::vector<std::uint64_t> absorbed_;
    std::vector<std::uint64_t> snap_last_;
    std::vector<std::uint64_t> persist_last_;
    std::vector<std::uint64_t> lost_;
};

struct StallRecord {
    std::uint64_t iteration = 0;  // checkpoint iteration the stall belongs to
    Ticks ticks = 0;
    std::string cause;  // snapshot | buffer | blocking | final
};

struct PhaseWorkload {
    std::uint32_t phase = 0;
    Rank snapshot_rank = 0;
    std::uint64_t snapshot_bytes = 0;
    Rank persist_rank = 0;
    std::uint64_t persist_bytes = 0;
};

struct FaultRecord {
    std::uint64_t iteration = 0;  // last completed iteration before the fault
    Ticks time = 0;
    std::vector<NodeId> nodes;
    std::uint64_t resume_iteration = 0;
    std::uint64_t version_skew = 0;
    std::uint64_t replayed_iterations = 0;
    std::uint64_t lost_tokens = 0;
    double plt_added = 0;
    std::uint32_t from_memory = 0;
    std::uint32_t from_storage = 0;
    std::uint32_t from_initial = 0;
    std::uint32_t k_after = 0;
};

struct TimelineEvent {
    Ticks time = 0;
    std::int64_t rank = -1;  // -1: not tied to one rank
    std::string event;
    std::string detail;
};

struct SimReport {
    Ticks o_save = 0;
    Ticks o_restart = 0;
    Ticks o_lost = 0;
    std::uint64_t o_lost_iterations = 0;
    Ticks o_ckpt = 0;
    Ticks wall_time = 0;
    std::vector<StallRecord> stalls;
    std::vector<double> plt_per_layer;
    double plt = 0;
    std::vector<std::uint64_t> lost_tokens_per_layer;
    std::vector<PhaseWorkload> bottlenecks;
    Ticks snapshot_time = 0;  // max over phases
    Ticks persist_time = 0;   // max over phases
    std::uint64_t min_feasible_i_ckpt = 1;
    std::uint64_t version_skew = 0;  // max over faults
    std::uint64_t iterations_executed = 0;
    std::uint64_t checkpoints = 0;
    std::uint64_t persisted_versions = 0;
    std::uint64_t failed_persists = 0;
    std::uint64_t dropped_tokens = 0;
    std::vector<std::uint32_t> k_trace;
    std::vector<FaultRecord> faults;
    std::vector<TimelineEvent> timeline;
};

/// Deterministic training simulation: iterations of F&B plus update, with
/// checkpoints every I_ckpt iterations through the triple-buffered engine,
/// faults, recovery and PLT accounting. Single-threaded.
class Simulator {
public:
    explicit Simulator(Scenario scenario);
    ~Simulator();
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    const Scenario& scenario() const { return scenario_; }
    const RankLayout& layout() const { return layout_; }
    const PltLedger& ledger() const { return ledger_; }
    const TripleBuffer& buffers() const { return buffers_; }
    const VersionCatalog& catalog() const { return catalog_; }
    std::uint64_t iteration() const { return iteration_; }
    Ticks now() const { return now_; }
    std::uint32_t current_k_snapshot() const { return k_snapshot_; }
    std::uint32_t current_k_persist() const { return k_persist_; }
    bool finished() const { return iteration_ >= scenario_.i_total; }

    /// Runs one iteration. When a fault is due it strikes at the end of the
    /// F&B phase and the iteration is abandoned; returns true in that case.
    bool step();

    /// Fault on `nodes` at the current time: recovery, rewind, accounting.
    FaultRecord inject_fault(const std::vector<NodeId>& nodes);

    /// Runs to I_total and closes the report.
    SimReport run();

    /// Report so far (closed by run()).
    const SimReport& report() const { return report_; }

private:
    struct SlotContent;
    struct PlanSet;

    const PlanSet& plans();
    void checkpoint();
    void advance_engine(Ticks until);
    void on_snapshot_done(Ticks at);
    void on_persist_done(Ticks at);
    void start_persist(int slot, Ticks at);
    void commit(int slot);
    void record(Ticks t, std::int64_t rank, std::string event, std::string detail);
    void add_stall(std::uint64_t ckpt_iteration, Ticks ticks, const char* cause);
    std::optional<std::vector<NodeId>> fault_due();
    void gc_versions();
    void finish();

    Scenario scenario_;
    RankLayout layout_;
    PltLedger ledger_;
    TripleBuffer buffers_;
    VersionCatalog catalog_;
    std::unique_ptr<DiskStore> disk_;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::unique_ptr<PlanSet>> plan_cache_;
    std::vector<std::unique_ptr<SlotContent>> slots_;
    std::map<std::uint64_t, std::vector<std::uint64_t>> version_absorbed_;

    std::uint32_t k_snapshot_ = 1;
    std::uint32_t k_persist_ = 1;
    std::optional<DynamicKState> dynamic_k_;
    std::uint64_t iteration_ = 0;
    Ticks now_ = 0;
    std::uint64_t next_version_ = 1;
    std::size_t next_fault_ = 0;
    std::mt19937_64 fault_rng_;

    std::optional<Ticks> snapshot_done_;
    int snapshot_slot_ = -1;
    std::uint64_t snapshot_ckpt_iteration_ = 0;
    std::optional<Ticks> persist_done_;
    int persist_slot_ = -1;

    Ticks fb_ = 0;
    Ticks update_ = 0;
    Ticks restart_ = 0;
    bool closed_ = false;
    SimReport report_;
};

/// Convenience: Simulator(scenario).run().
SimReport run_scenario(const Scenario& scenario);

}  // namespace moc
