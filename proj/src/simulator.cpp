#include "moc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "moc/errors.hpp"

namespace moc {

namespace {

Ticks snap_to_ticks(long double micros) {
    const long double r = std::round(micros);
    if (std::fabs(micros - r) <= 1e-6L) return static_cast<Ticks>(r);
    return static_cast<Ticks>(std::ceil(micros));
}

void require(bool ok, const char* constraint, const std::string& message) {
    if (!ok) throw ValidationError(constraint, message);
}

std::string join_nodes(const std::vector<NodeId>& nodes) {
    std::string out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(nodes[i]);
    }
    return out;
}

std::vector<std::uint32_t> units_of(const PhasePlan& plan) {
    std::vector<std::uint32_t> out;
    for (const auto& rank : plan.per_rank) {
        for (const auto& a : rank) out.push_back(a.unit);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

Ticks seconds_to_ticks(double seconds) {
    return snap_to_ticks(static_cast<long double>(seconds) * kTicksPerSecond);
}

Ticks transfer_ticks(std::uint64_t bytes, double bandwidth) {
    return snap_to_ticks(static_cast<long double>(bytes) * kTicksPerSecond / static_cast<long double>(bandwidth));
}

double ticks_to_seconds(Ticks t) {
    return static_cast<double>(t) / kTicksPerSecond;
}

std::string format_ticks(Ticks t) {
    const bool neg = t < 0;
    const std::uint64_t a = neg ? static_cast<std::uint64_t>(-t) : static_cast<std::uint64_t>(t);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%llu.%06llu", neg ? "-" : "", static_cast<unsigned long long>(a / 1000000),
                  static_cast<unsigned long long>(a % 1000000));
    return buf;
}

const char* to_string(CheckpointMode m) {
    return m == CheckpointMode::Async ? "async" : "blocking";
}

std::uint32_t Scenario::k_snapshot() const {
    return uses_pec(strategy) ? pec.k_snapshot : model.experts_per_layer;
}

std::uint32_t Scenario::k_persist() const {
    return uses_pec(strategy) ? pec.k_persist : model.experts_per_layer;
}

void Scenario::validate() const {
    model.validate();
    parallel.validate(model);
    cluster.validate(parallel);
    if (uses_pec(strategy)) pec.validate(model.experts_per_layer);
    require(!(strategy == Strategy::AdaptivePec && pec.selection == SelectionKind::LoadAware),
            "strategy.adaptive_selection", "adaptive_pec needs sequential selection (its plan is fixed up front)");
    require(i_ckpt >= 1, "scenario.i_ckpt", "must be >= 1");
    require(i_total >= i_ckpt, "scenario.i_total", "must be >= i_ckpt");
    require(!capacity_factor || *capacity_factor > 0, "scenario.capacity_factor", "must be > 0");
    if (routing.kind == RoutingKind::Zipf) {
        require(routing.zipf_s >= 0 && std::isfinite(routing.zipf_s), "routing.s", "must be a finite value >= 0");
    }
    if (routing.kind == RoutingKind::Scripted) {
        bool ok = routing.counts.size() == model.num_moe_layers;
        for (const auto& row : routing.counts) ok = ok && row.size() == model.experts_per_layer;
        require(ok, "routing.counts", "needs one row per MoE layer and one column per expert");
    }
    if (faults.kind == FaultKind::Scripted) {
        for (std::size_t i = 0; i < faults.events.size(); ++i) {
            const auto& f = faults.events[i];
            require(i == 0 || f.iteration > faults.events[i - 1].iteration, "faults.events",
                    "fault iterations must be strictly increasing");
            require(f.iteration < i_total, "faults.events", "fault iteration must be < i_total");
            require(!f.nodes.empty(), "faults.events", "each fault needs at least one node");
            for (auto n : f.nodes) {
                require(n < cluster.num_nodes, "faults.events",
                        "node " + std::to_string(n) + " outside 0.." + std::to_string(cluster.num_nodes - 1));
            }
        }
    }
    if (dynamic_k.enabled) {
        require(uses_pec(strategy), "pec.dynamic_k", "Dynamic-K needs a PEC strategy");
        require(dynamic_k.threshold > 0 && dynamic_k.threshold < 1, "pec.dynamic_k.threshold",
                "must satisfy 0 < threshold < 1");
    }
    require(!persist_target || *persist_target > 0, "scenario.persist_target", "must be > 0");
}

// ---------------------------------------------------------------- ledger

PltLedger::PltLedger(std::uint32_t n_layers, std::uint32_t n_experts, std::uint64_t denominator_per_layer)
    : n_layers_(n_layers),
      n_experts_(n_experts),
      denominator_(denominator_per_layer),
      absorbed_(static_cast<std::size_t>(n_layers) * n_experts, 0),
      snap_last_(absorbed_.size(), 0),
      persist_last_(absorbed_.size(), 0),
      lost_(n_layers, 0) {}

void PltLedger::absorb(const std::vector<std::uint64_t>& delivered) {
    for (std::size_t i = 0; i < absorbed_.size(); ++i) absorbed_[i] += delivered[i];
}

std::uint64_t PltLedger::unsaved_snapshot(std::uint32_t l, std::uint32_t e) const {
    return absorbed_[index(l, e)] - snap_last_[index(l, e)];
}

std::uint64_t PltLedger::unsaved_persist(std::uint32_t l, std::uint32_t e) const {
    return absorbed_[index(l, e)] - persist_last_[index(l, e)];
}

LoadCounters PltLedger::snapshot_counters() const {
    LoadCounters c(n_layers_, n_experts_);
    for (std::uint32_t l = 0; l < n_layers_; ++l) {
        for (std::uint32_t e = 0; e < n_experts_; ++e) c.at(l, e) = unsaved_snapshot(l, e);
    }
    return c;
}

LoadCounters PltLedger::persist_counters() const {
    LoadCounters c(n_layers_, n_experts_);
    for (std::uint32_t l = 0; l < n_layers_; ++l) {
        for (std::uint32_t e = 0; e < n_experts_; ++e) c.at(l, e) = unsaved_persist(l, e);
    }
    return c;
}

std::uint64_t PltLedger::restore(std::uint32_t l, std::uint32_t e, std::uint64_t saved) {
    const std::size_t i = index(l, e);
    const std::uint64_t lost = absorbed_[i] > saved ? absorbed_[i] - saved : 0;
    absorbed_[i] = saved;
    snap_last_[i] = std::min(snap_last_[i], saved);
    persist_last_[i] = std::min(persist_last_[i], saved);
    lost_[l] += lost;
    return lost;
}

double PltLedger::plt_layer(std::uint32_t l) const {
    return denominator_ == 0 ? 0.0 : static_cast<double>(lost_[l]) / static_cast<double>(denominator_);
}

double PltLedger::plt() const {
    if (n_layers_ == 0) return 0.0;
    double sum = 0;
    for (std::uint32_t l = 0; l < n_layers_; ++l) sum += plt_layer(l);
    return sum / n_layers_;
}

// ------------------------------------------------------------- simulator

struct Simulator::PlanSet {
    SequentialSchedule schedule;
    ShardPlan plan;
    std::vector<std::shared_ptr<const PhasePlan>> snapshot;
    std::vector<std::shared_ptr<const PhasePlan>> persist;
    std::vector<std::vector<std::uint32_t>> persist_units;
    std::vector<Ticks> snapshot_ticks;
    std::vector<Ticks> persist_ticks;
};

struct Simulator::SlotContent {
    std::uint64_t version = 0;
    std::uint64_t iteration = 0;
    std::shared_ptr<const PhasePlan> snapshot;
    std::shared_ptr<const PhasePlan> persist;
    std::vector<std::uint32_t> persist_units;
    LayerSelection persist_selection;
    Ticks persist_ticks = 0;
};

namespace {

std::mt19937_64 fault_engine(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xFA017u};
    return std::mt19937_64(seq);
}

}  // namespace

Simulator::Simulator(Scenario scenario)
    : scenario_((scenario.validate(), std::move(scenario))),
      layout_(scenario_.model, scenario_.parallel, scenario_.cluster),
      ledger_(scenario_.model.num_moe_layers, scenario_.model.experts_per_layer,
              scenario_.tokens_per_iteration * scenario_.model.top_k * scenario_.i_total),
      catalog_(layout_.units().size()),
      slots_(TripleBuffer::kSlots),
      k_snapshot_(scenario_.k_snapshot()),
      k_persist_(scenario_.k_persist()),
      fault_rng_(fault_engine(scenario_.rng_seed)) {
    fb_ = seconds_to_ticks(scenario_.cluster.fb_time);
    update_ = seconds_to_ticks(scenario_.cluster.update_time);
    restart_ = seconds_to_ticks(scenario_.cluster.restart_time);
    if (scenario_.store.kind == StoreKind::Disk) {
        std::string root = scenario_.store.root;
        if (root.empty()) {
            const char* env = std::getenv("MOC_STORE_ROOT");
            root = env && *env ? env : "moc_store";
        }
        disk_ = std::make_unique<DiskStore>(root);
    }
    if (scenario_.dynamic_k.enabled) {
        dynamic_k_ = DynamicKState::start(k_persist_, scenario_.model.experts_per_layer, scenario_.dynamic_k.threshold);
    }
    report_.k_trace.push_back(k_persist_);

    const PlanSet& ps = plans();
    for (std::uint32_t c = 0; c < ps.plan.period(); ++c) {
        const auto [sr, sb] = bottleneck_workload(*ps.snapshot[c]);
        const auto [pr, pb] = bottleneck_workload(*ps.persist[c]);
        report_.bottlenecks.push_back({c, sr, sb, pr, pb});
        report_.snapshot_time = std::max(report_.snapshot_time, ps.snapshot_ticks[c]);
        report_.persist_time = std::max(report_.persist_time, ps.persist_ticks[c]);
    }
    if (scenario_.mode == CheckpointMode::Async) {
        const Ticks iter = fb_ + update_;
        report_.min_feasible_i_ckpt =
            std::max<std::uint64_t>(1, static_cast<std::uint64_t>((report_.persist_time + iter - 1) / iter));
    }
}

Simulator::~Simulator() = default;

const Simulator::PlanSet& Simulator::plans() {
    auto& entry = plan_cache_[{k_snapshot_, k_persist_}];
    if (entry) return *entry;
    const auto& model = scenario_.model;
    SequentialSchedule schedule(model.experts_per_layer, model.num_moe_layers, k_snapshot_, k_persist_);
    auto ps = std::make_unique<PlanSet>(PlanSet{schedule, make_plan(layout_, scenario_.strategy, schedule), {}, {}, {}, {}, {}});
    for (std::uint32_t c = 0; c < ps->plan.period(); ++c) {
        auto snap = std::make_shared<const PhasePlan>(ps->plan.phases[c]);
        auto pers = std::make_shared<const PhasePlan>(restrict_experts(layout_, *snap, schedule.persist_selection(c)));
        ps->snapshot_ticks.push_back(transfer_ticks(bottleneck_workload(*snap).second, scenario_.cluster.snapshot_bandwidth));
        ps->persist_ticks.push_back(transfer_ticks(bottleneck_workload(*pers).second, scenario_.cluster.persist_bandwidth));
        ps->persist_units.push_back(units_of(*pers));
        ps->snapshot.push_back(std::move(snap));
        ps->persist.push_back(std::move(pers));
    }
    entry = std::move(ps);
    return *entry;
}

void Simulator::record(Ticks t, std::int64_t rank, std::string event, std::string detail) {
    if (!scenario_.output.record_timeline) return;
    report_.timeline.push_back({t, rank, std::move(event), std::move(detail)});
}

void Simulator::add_stall(std::uint64_t ckpt_iteration, Ticks ticks, const char* cause) {
    if (ticks <= 0) return;
    report_.o_save += ticks;
    report_.stalls.push_back({ckpt_iteration, ticks, cause});
    if (scenario_.output.record_timeline) {
        record(now_, -1, "stall", std::string(cause) + " " + format_ticks(ticks) + "s ckpt@" + std::to_string(ckpt_iteration));
    }
}

std::optional<std::vector<NodeId>> Simulator::fault_due() {
    if (scenario_.faults.kind == FaultKind::Scripted) {
        const auto& events = scenario_.faults.events;
        if (next_fault_ < events.size() && events[next_fault_].iteration == iteration_) {
            return events[next_fault_++].nodes;
        }
        return std::nullopt;
    }
    const double rate = scenario_.cluster.failure_rate;
    if (rate <= 0) return std::nullopt;
    if (unit_interval(fault_rng_()) >= rate) return std::nullopt;
    return std::vector<NodeId>{static_cast<NodeId>(fault_rng_() % scenario_.cluster.num_nodes)};
}

bool Simulator::step() {
    if (finished()) return false;
    const Ticks fb_end = now_ + fb_;
    advance_engine(fb_end);
    now_ = fb_end;
    if (auto nodes = fault_due()) {
        inject_fault(*nodes);
        return true;
    }
    if (snapshot_done_) {
        const Ticks done = *snapshot_done_;
        add_stall(snapshot_ckpt_iteration_, done - now_, "snapshot");
        advance_engine(done);
        now_ = done;
    }
    now_ += update_;
    ++iteration_;
    ++report_.iterations_executed;
    if (scenario_.tokens_per_iteration > 0) {
        const RoutedTokens routed = route_tokens(iteration_, scenario_.routing, scenario_.model,
                                                 scenario_.tokens_per_iteration, scenario_.capacity_factor,
                                                 scenario_.rng_seed);
        ledger_.absorb(routed.delivered);
        for (auto d : routed.dropped) report_.dropped_tokens += d;
    }
    advance_engine(now_);
    if (iteration_ % scenario_.i_ckpt == 0) checkpoint();
    return false;
}

void Simulator::checkpoint() {
    const std::uint64_t c = iteration_ / scenario_.i_ckpt - 1;
    const PlanSet& ps = plans();
    auto content = std::make_unique<SlotContent>();
    LayerSelection snap_sel;
    Ticks snap_ticks = 0;

    if (scenario_.pec.selection == SelectionKind::LoadAware && uses_pec(scenario_.strategy)) {
        const LoadCounters snap_counters = ledger_.snapshot_counters();
        const LoadCounters persist_counters = ledger_.persist_counters();
        content->persist_selection.resize(scenario_.model.num_moe_layers);
        for (std::uint32_t l = 0; l < scenario_.model.num_moe_layers; ++l) {
            snap_sel.push_back(select_load_aware(snap_counters, l, k_snapshot_));
            content->persist_selection[l] = select_load_aware(persist_counters.layer(l), snap_sel[l], k_persist_);
        }
        auto snap = std::make_shared<const PhasePlan>(assign_checkpoint(layout_, scenario_.strategy, snap_sel));
        auto pers = std::make_shared<const PhasePlan>(restrict_experts(layout_, *snap, content->persist_selection));
        snap_ticks = transfer_ticks(bottleneck_workload(*snap).second, scenario_.cluster.snapshot_bandwidth);
        content->persist_ticks = transfer_ticks(bottleneck_workload(*pers).second, scenario_.cluster.persist_bandwidth);
        content->persist_units = units_of(*pers);
        content->snapshot = std::move(snap);
        content->persist = std::move(pers);
    } else {
        const std::uint32_t phase = static_cast<std::uint32_t>(c % ps.plan.period());
        snap_sel = ps.schedule.snapshot_selection(c);
        content->persist_selection = ps.schedule.persist_selection(c);
        content->snapshot = ps.snapshot[phase];
        content->persist = ps.persist[phase];
        content->persist_units = ps.persist_units[phase];
        content->persist_ticks = ps.persist_ticks[phase];
        snap_ticks = ps.snapshot_ticks[phase];
    }

    const std::uint64_t version = next_version_++;
    content->version = version;
    content->iteration = iteration_;
    version_absorbed_[version] = ledger_.absorbed_all();
    for (std::uint32_t l = 0; l < snap_sel.size(); ++l) {
        for (auto e : snap_sel[l]) ledger_.mark_snapshot(l, e);
    }
    ++report_.checkpoints;
    const auto bottleneck_rank = static_cast<std::int64_t>(bottleneck_workload(*content->snapshot).first);

    std::optional<int> slot = buffers_.begin_snapshot(version);
    while (!slot) {
        if (!persist_done_) throw std::logic_error("no free buffer and no persist in flight");
        const Ticks t = *persist_done_;
        add_stall(iteration_, t - now_, "buffer");
        advance_engine(t);
        now_ = std::max(now_, t);
        slot = buffers_.begin_snapshot(version);
    }
    record(now_, bottleneck_rank, "snapshot_begin",
           "v" + std::to_string(version) + " iter " + std::to_string(iteration_) + " " + format_ticks(snap_ticks) + "s");
    slots_[*slot] = std::move(content);

    if (scenario_.mode == CheckpointMode::Async) {
        snapshot_done_ = now_ + snap_ticks;
        snapshot_slot_ = *slot;
        snapshot_ckpt_iteration_ = iteration_;
        advance_engine(now_);
        return;
    }
    const Ticks persist_ticks = slots_[*slot]->persist_ticks;
    snapshot_done_ = now_ + snap_ticks;
    snapshot_slot_ = *slot;
    snapshot_ckpt_iteration_ = iteration_;
    const Ticks start = now_;
    advance_engine(start + snap_ticks);
    advance_engine(start + snap_ticks + persist_ticks);
    now_ = start + snap_ticks + persist_ticks;
    add_stall(iteration_, snap_ticks + persist_ticks, "blocking");
}

void Simulator::advance_engine(Ticks until) {
    while (true) {
        const bool snap = snapshot_done_ && *snapshot_done_ <= until;
        const bool pers = persist_done_ && *persist_done_ <= until;
        if (!snap && !pers) return;
        if (pers && (!snap || *persist_done_ <= *snapshot_done_)) {
            on_persist_done(*persist_done_);
        } else {
            on_snapshot_done(*snapshot_done_);
        }
    }
}

void Simulator::on_snapshot_done(Ticks at) {
    const int slot = snapshot_slot_;
    snapshot_done_.reset();
    snapshot_slot_ = -1;
    record(at, -1, "snapshot_done", "v" + std::to_string(slots_[slot]->version));
    if (buffers_.complete_snapshot(slot)) start_persist(slot, at);
}

void Simulator::start_persist(int slot, Ticks at) {
    persist_done_ = at + slots_[slot]->persist_ticks;
    persist_slot_ = slot;
    record(at, -1, "persist_begin", "v" + std::to_string(slots_[slot]->version));
}

void Simulator::on_persist_done(Ticks at) {
    const int slot = persist_slot_;
    persist_done_.reset();
    persist_slot_ = -1;
    bool ok = true;
    try {
        commit(slot);
    } catch (const StoreError& e) {
        ok = false;
        ++report_.failed_persists;
        record(at, -1, "persist_failed", "v" + std::to_string(slots_[slot]->version) + " " + e.what());
    }
    if (ok) record(at, -1, "persist_done", "v" + std::to_string(slots_[slot]->version));
    if (auto next = buffers_.complete_persist(slot, ok)) start_persist(*next, at);
}

void Simulator::commit(int slot) {
    const SlotContent& content = *slots_[slot];
    if (disk_) {
        std::vector<PendingEntry> entries;
        const auto& per_rank = content.persist->per_rank;
        for (Rank r = 0; r < per_rank.size(); ++r) {
            for (const auto& a : per_rank[r]) {
                const StateUnit& u = layout_.unit(a.unit);
                entries.push_back({entry_key(u.key, a.part, a.parts), r,
                                   make_payload(u.key, content.version, a.range.begin, a.range.length())});
            }
        }
        disk_->persist(content.version, content.iteration, entries);
    }
    catalog_.commit(content.version, content.iteration, content.persist_units);
    const auto& saved = version_absorbed_.at(content.version);
    for (std::uint32_t l = 0; l < content.persist_selection.size(); ++l) {
        for (auto e : content.persist_selection[l]) ledger_.mark_persist(l, e, saved[ledger_.index(l, e)]);
    }
    ++report_.persisted_versions;
    if (report_.persisted_versions % 64 == 0) gc_versions();
}

void Simulator::gc_versions() {
    std::set<std::uint64_t> keep;
    for (std::size_t u = 0; u < layout_.expert_unit_count(); ++u) {
        if (auto v = catalog_.latest_for_unit(u)) keep.insert(*v);
    }
    for (const auto& s : slots_) {
        if (s) keep.insert(s->version);
    }
    // a checkpoint stalled on a free buffer is not in any slot yet
    if (next_version_ > 1) keep.insert(next_version_ - 1);
    for (auto it = version_absorbed_.begin(); it != version_absorbed_.end();) {
        it = keep.count(it->first) ? std::next(it) : version_absorbed_.erase(it);
    }
}

FaultRecord Simulator::inject_fault(const std::vector<NodeId>& failed) {
    std::vector<NodeId> nodes = failed;
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (auto n : nodes) {
        require(n < scenario_.cluster.num_nodes, "faults.nodes", "node " + std::to_string(n) + " does not exist");
    }
    advance_engine(now_);

    FaultRecord rec;
    rec.iteration = iteration_;
    rec.time = now_;
    rec.nodes = nodes;
    record(now_, -1, "fault", "after iter " + std::to_string(iteration_) + " nodes " + join_nodes(nodes));

    std::vector<MemorySnapshotView> memory;
    if (scenario_.two_level_recovery) {
        for (int s : buffers_.readable()) {
            memory.push_back({slots_[s]->version, slots_[s]->iteration, slots_[s]->snapshot.get()});
        }
    }
    RecoveryPlan plan;
    try {
        plan = resolve_recovery(layout_, nodes, catalog_, memory);
    } catch (const MissingUnit&) {
        // memory alone cannot rebuild the lost shards; fall back to storage
        plan = resolve_recovery(layout_, nodes, catalog_, {});
    }
    for (const auto& src : plan.units) {
        switch (src.kind) {
            case SourceKind::MemorySnapshot: ++rec.from_memory; break;
            case SourceKind::PersistentStore: ++rec.from_storage; break;
            case SourceKind::Initial: ++rec.from_initial; break;
        }
    }

    const auto& model = scenario_.model;
    std::vector<std::uint64_t> lost_before(model.num_moe_layers);
    for (std::uint32_t l = 0; l < model.num_moe_layers; ++l) lost_before[l] = ledger_.lost(l);
    for (std::uint32_t l = 0; l < model.num_moe_layers; ++l) {
        for (std::uint32_t e = 0; e < model.experts_per_layer; ++e) {
            const UnitSource& w = plan.units[layout_.expert_weight_unit(l, e)];
            const UnitSource& o = plan.units[layout_.expert_optim_unit(l, e)];
            const std::uint64_t version = std::min(w.version, o.version);
            const std::uint64_t saved = version == 0 ? 0 : version_absorbed_.at(version)[ledger_.index(l, e)];
            rec.lost_tokens += ledger_.restore(l, e, saved);
        }
    }
    if (ledger_.denominator() > 0) {
        double added = 0;
        for (std::uint32_t l = 0; l < model.num_moe_layers; ++l) {
            added += static_cast<double>(ledger_.lost(l) - lost_before[l]) / static_cast<double>(ledger_.denominator());
        }
        rec.plt_added = added / model.num_moe_layers;
    }

    rec.resume_iteration = plan.resume_iteration;
    rec.version_skew = plan.version_skew;
    rec.replayed_iterations = iteration_ - plan.resume_iteration;
    report_.o_restart += restart_;
    report_.o_lost += static_cast<Ticks>(rec.replayed_iterations) * (fb_ + update_);
    report_.o_lost_iterations += rec.replayed_iterations;
    report_.version_skew = std::max(report_.version_skew, plan.version_skew);

    // restarted agents: in-flight work and host buffers are gone
    buffers_.reset();
    for (auto& s : slots_) s.reset();
    snapshot_done_.reset();
    persist_done_.reset();
    snapshot_slot_ = persist_slot_ = -1;

    now_ += restart_;
    iteration_ = plan.resume_iteration;

    if (dynamic_k_) {
        const std::uint32_t before = dynamic_k_->current_k;
        *dynamic_k_ = dynamic_k_step(*dynamic_k_, rec.plt_added);
        if (dynamic_k_->current_k != before) {
            k_persist_ = dynamic_k_->current_k;
            k_snapshot_ = std::max(k_persist_, std::min(k_snapshot_ * 2, model.experts_per_layer));
            record(now_, -1, "k_change", "k_snapshot " + std::to_string(k_snapshot_) + " k_persist " + std::to_string(k_persist_));
        }
        report_.k_trace.push_back(k_persist_);
    }
    rec.k_after = k_persist_;
    record(now_, -1, "recovered",
           "resume " + std::to_string(plan.resume_iteration) + " skew " + std::to_string(plan.version_skew) +
               " memory " + std::to_string(rec.from_memory) + " storage " + std::to_string(rec.from_storage) +
               " initial " + std::to_string(rec.from_initial));
    gc_versions();
    report_.faults.push_back(rec);
    return rec;
}

void Simulator::finish() {
    if (closed_) return;
    closed_ = true;
    Ticks end = now_;
    if (snapshot_done_) {
        // the last snapshot only has the virtual next F&B to hide behind
        const Ticks over = *snapshot_done_ - now_ - fb_;
        add_stall(snapshot_ckpt_iteration_, over, "final");
        if (over > 0) end += over;
    }
    advance_engine(std::numeric_limits<Ticks>::max());
    report_.wall_time = end;
    report_.o_ckpt = report_.o_save + report_.o_restart + report_.o_lost;
    const std::uint32_t layers = scenario_.model.num_moe_layers;
    report_.plt_per_layer.assign(layers, 0);
    report_.lost_tokens_per_layer.assign(layers, 0);
    for (std::uint32_t l = 0; l < layers; ++l) {
        report_.plt_per_layer[l] = ledger_.plt_layer(l);
        report_.lost_tokens_per_layer[l] = ledger_.lost(l);
    }
    report_.plt = ledger_.plt();
}

SimReport Simulator::run() {
    while (!finished()) step();
    finish();
    return report_;
}

SimReport run_scenario(const Scenario& scenario) {
    Simulator sim(scenario);
    return sim.run();
}

}  // namespace moc
