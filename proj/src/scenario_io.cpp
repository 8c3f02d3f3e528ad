#include "moc/scenario_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "moc/errors.hpp"

using nlohmann::json;

namespace moc {

namespace {

// Values built in code arrive as signed; parsed text arrives as unsigned.
bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Typed access to one JSON object; remembers which keys were read so the
// leftovers can be rejected.

class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail(path_, "expected an object");
    }

    bool has(const char* key) const { return obj_.contains(key); }

    const json& raw(const char* key) {
        seen_.insert(key);
        if (!obj_.contains(key)) fail(name(key), "is required");
        return obj_.at(key);
    }

    std::uint64_t u64(const char* key) {
        const json& v = raw(key);
        if (!non_negative_integer(v)) fail(name(key), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    std::uint32_t u32(const char* key) {
        const std::uint64_t v = u64(key);
        if (v > UINT32_MAX) fail(name(key), "too large");
        return static_cast<std::uint32_t>(v);
    }
    double number(const char* key) {
        const json& v = raw(key);
        if (!v.is_number()) fail(name(key), "expected a number");
        return v.get<double>();
    }
    bool boolean(const char* key) {
        const json& v = raw(key);
        if (!v.is_boolean()) fail(name(key), "expected true or false");
        return v.get<bool>();
    }
    std::string string(const char* key) {
        const json& v = raw(key);
        if (!v.is_string()) fail(name(key), "expected a string");
        return v.get<std::string>();
    }
    Fields object(const char* key) { return Fields(raw(key), name(key)); }

    template <class T, class F>
    void optional(const char* key, T& out, F get) {
        if (has(key)) out = (this->*get)(key);
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& item : obj_.items()) {
            if (!seen_.count(item.key())) fail(name(item.key().c_str()), "unknown key");
        }
    }

    [[noreturn]] static void fail(const std::string& field, const std::string& msg) {
        throw ValidationError(field, msg);
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

ModelSpec read_model(Fields f) {
    ModelSpec m;
    m.num_moe_layers = f.u32("num_moe_layers");
    m.experts_per_layer = f.u32("experts_per_layer");
    m.top_k = f.u32("top_k");
    m.expert_params_per_expert = f.u64("expert_params_per_expert");
    f.optional("bytes_weight", m.bytes_weight, &Fields::u32);
    f.optional("bytes_optim", m.bytes_optim, &Fields::u32);
    f.optional("other_states_bytes", m.other_states_bytes, &Fields::u64);
    const json& mods = f.raw("non_expert_modules");
    if (!mods.is_array()) Fields::fail(f.name("non_expert_modules"), "expected an array");
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < mods.size(); ++i) {
        Fields mf(mods[i], f.name("non_expert_modules") + "[" + std::to_string(i) + "]");
        NonExpertModule nm{mf.string("name"), mf.u64("params")};
        mf.finish();
        sum += nm.params;
        m.non_expert_modules.push_back(std::move(nm));
    }
    m.non_expert_params = f.has("non_expert_params") ? f.u64("non_expert_params") : sum;
    f.finish();
    return m;
}

ParallelSpec read_parallel(Fields f) {
    ParallelSpec p;
    p.dp_degree = f.u32("dp");
    p.ep_degree = f.u32("ep");
    f.optional("tp", p.tp_degree, &Fields::u32);
    f.optional("pp", p.pp_degree, &Fields::u32);
    f.finish();
    return p;
}

ClusterSpec read_cluster(Fields f) {
    ClusterSpec c;
    c.num_nodes = f.u32("num_nodes");
    c.gpus_per_node = f.u32("gpus_per_node");
    c.snapshot_bandwidth = f.number("snapshot_bandwidth");
    c.persist_bandwidth = f.number("persist_bandwidth");
    c.fb_time = f.number("fb_time");
    c.update_time = f.number("update_time");
    c.restart_time = f.number("restart_time");
    f.optional("failure_rate", c.failure_rate, &Fields::number);
    f.finish();
    return c;
}

void read_pec(Fields f, Scenario& s) {
    std::optional<std::uint32_t> k, ks, kp;
    if (f.has("k_pec")) k = f.u32("k_pec");
    if (f.has("k_snapshot")) ks = f.u32("k_snapshot");
    if (f.has("k_persist")) kp = f.u32("k_persist");
    s.pec.k_pec = k ? *k : kp ? *kp : ks ? *ks : 1;
    s.pec.k_snapshot = ks ? *ks : s.pec.k_pec;
    s.pec.k_persist = kp ? *kp : s.pec.k_pec;
    if (f.has("selection")) s.pec.selection = parse_selection(f.string("selection"));
    if (f.has("dynamic_k")) {
        Fields d = f.object("dynamic_k");
        d.optional("enabled", s.dynamic_k.enabled, &Fields::boolean);
        d.optional("threshold", s.dynamic_k.threshold, &Fields::number);
        d.finish();
    }
    f.finish();
}

RoutingConfig read_routing(Fields f) {
    RoutingConfig r;
    const std::string kind = f.string("kind");
    if (kind == "uniform") {
        r.kind = RoutingKind::Uniform;
    } else if (kind == "zipf") {
        r.kind = RoutingKind::Zipf;
    } else if (kind == "scripted") {
        r.kind = RoutingKind::Scripted;
    } else {
        Fields::fail(f.name("kind"), "expected uniform, zipf or scripted");
    }
    f.optional("s", r.zipf_s, &Fields::number);
    if (f.has("counts")) {
        const json& rows = f.raw("counts");
        if (!rows.is_array()) Fields::fail(f.name("counts"), "expected an array of arrays");
        for (const auto& row : rows) {
            if (!row.is_array()) Fields::fail(f.name("counts"), "expected an array of arrays");
            std::vector<std::uint64_t> out;
            for (const auto& v : row) {
                if (!non_negative_integer(v)) Fields::fail(f.name("counts"), "expected non-negative integers");
                out.push_back(v.get<std::uint64_t>());
            }
            r.counts.push_back(std::move(out));
        }
    }
    f.finish();
    return r;
}

FaultConfig read_faults(Fields f) {
    FaultConfig fc;
    const std::string kind = f.string("kind");
    if (kind == "scripted") {
        fc.kind = FaultKind::Scripted;
    } else if (kind == "poisson") {
        fc.kind = FaultKind::Poisson;
    } else {
        Fields::fail(f.name("kind"), "expected scripted or poisson");
    }
    if (f.has("events")) {
        const json& events = f.raw("events");
        if (!events.is_array()) Fields::fail(f.name("events"), "expected an array");
        for (std::size_t i = 0; i < events.size(); ++i) {
            Fields ef(events[i], f.name("events") + "[" + std::to_string(i) + "]");
            FaultEvent ev;
            ev.iteration = ef.u64("iteration");
            const json& nodes = ef.raw("nodes");
            if (!nodes.is_array()) Fields::fail(ef.name("nodes"), "expected an array");
            for (const auto& n : nodes) {
                if (!non_negative_integer(n)) Fields::fail(ef.name("nodes"), "expected node ids");
                ev.nodes.push_back(n.get<NodeId>());
            }
            ef.finish();
            fc.events.push_back(std::move(ev));
        }
    }
    f.finish();
    return fc;
}

const char* store_kind_name(StoreKind k) {
    return k == StoreKind::Memory ? "memory" : "disk";
}

}  // namespace

Strategy parse_strategy(const std::string& name) {
    if (name == "baseline") return Strategy::Baseline;
    if (name == "equal_full") return Strategy::EqualShardedFull;
    if (name == "equal_pec") return Strategy::EqualShardedPec;
    if (name == "adaptive_pec") return Strategy::AdaptivePec;
    throw ValidationError("strategy", "unknown strategy '" + name +
                                          "' (expected baseline, equal_full, equal_pec or adaptive_pec)");
}

SelectionKind parse_selection(const std::string& name) {
    if (name == "sequential") return SelectionKind::Sequential;
    if (name == "load_aware") return SelectionKind::LoadAware;
    throw ValidationError("pec.selection", "unknown selection '" + name + "' (expected sequential or load_aware)");
}

Scenario scenario_from_json(const json& doc) {
    Fields f(doc, "");
    Scenario s;
    s.model = read_model(f.object("model"));
    s.parallel = read_parallel(f.object("parallel"));
    s.cluster = read_cluster(f.object("cluster"));
    if (f.has("pec")) read_pec(f.object("pec"), s);
    if (f.has("strategy")) s.strategy = parse_strategy(f.string("strategy"));
    if (f.has("mode")) {
        const std::string mode = f.string("mode");
        if (mode == "async") {
            s.mode = CheckpointMode::Async;
        } else if (mode == "blocking") {
            s.mode = CheckpointMode::Blocking;
        } else {
            Fields::fail("mode", "expected async or blocking");
        }
    }
    f.optional("two_level_recovery", s.two_level_recovery, &Fields::boolean);
    s.i_ckpt = f.u64("i_ckpt");
    s.i_total = f.u64("i_total");
    if (f.has("routing")) s.routing = read_routing(f.object("routing"));
    f.optional("tokens_per_iteration", s.tokens_per_iteration, &Fields::u64);
    if (f.has("capacity_factor")) s.capacity_factor = f.number("capacity_factor");
    if (f.has("faults")) s.faults = read_faults(f.object("faults"));
    f.optional("rng_seed", s.rng_seed, &Fields::u64);
    if (f.has("store")) {
        Fields st = f.object("store");
        const std::string kind = st.string("kind");
        if (kind == "memory") {
            s.store.kind = StoreKind::Memory;
        } else if (kind == "disk") {
            s.store.kind = StoreKind::Disk;
        } else {
            Fields::fail("store.kind", "expected memory or disk");
        }
        st.optional("root", s.store.root, &Fields::string);
        st.finish();
    }
    if (f.has("output")) {
        Fields o = f.object("output");
        o.optional("report", s.output.report, &Fields::string);
        o.optional("timeline", s.output.timeline, &Fields::string);
        o.optional("dump_plan", s.output.dump_plan, &Fields::boolean);
        o.optional("record_timeline", s.output.record_timeline, &Fields::boolean);
        o.finish();
    }
    if (f.has("persist_target")) s.persist_target = f.number("persist_target");
    f.finish();
    s.validate();
    return s;
}

json scenario_to_json(const Scenario& s) {
    json mods = json::array();
    for (const auto& m : s.model.non_expert_modules) mods.push_back({{"name", m.name}, {"params", m.params}});
    json events = json::array();
    for (const auto& e : s.faults.events) events.push_back({{"iteration", e.iteration}, {"nodes", e.nodes}});
    json doc = {
        {"model",
         {{"num_moe_layers", s.model.num_moe_layers},
          {"experts_per_layer", s.model.experts_per_layer},
          {"top_k", s.model.top_k},
          {"expert_params_per_expert", s.model.expert_params_per_expert},
          {"bytes_weight", s.model.bytes_weight},
          {"bytes_optim", s.model.bytes_optim},
          {"other_states_bytes", s.model.other_states_bytes},
          {"non_expert_params", s.model.non_expert_params},
          {"non_expert_modules", mods}}},
        {"parallel",
         {{"dp", s.parallel.dp_degree}, {"ep", s.parallel.ep_degree}, {"tp", s.parallel.tp_degree},
          {"pp", s.parallel.pp_degree}}},
        {"cluster",
         {{"num_nodes", s.cluster.num_nodes},
          {"gpus_per_node", s.cluster.gpus_per_node},
          {"snapshot_bandwidth", s.cluster.snapshot_bandwidth},
          {"persist_bandwidth", s.cluster.persist_bandwidth},
          {"fb_time", s.cluster.fb_time},
          {"update_time", s.cluster.update_time},
          {"restart_time", s.cluster.restart_time},
          {"failure_rate", s.cluster.failure_rate}}},
        {"pec",
         {{"k_pec", s.pec.k_pec},
          {"k_snapshot", s.pec.k_snapshot},
          {"k_persist", s.pec.k_persist},
          {"selection", to_string(s.pec.selection)},
          {"dynamic_k", {{"enabled", s.dynamic_k.enabled}, {"threshold", s.dynamic_k.threshold}}}}},
        {"strategy", to_string(s.strategy)},
        {"mode", to_string(s.mode)},
        {"two_level_recovery", s.two_level_recovery},
        {"i_ckpt", s.i_ckpt},
        {"i_total", s.i_total},
        {"routing", {{"kind", to_string(s.routing.kind)}, {"s", s.routing.zipf_s}, {"counts", s.routing.counts}}},
        {"tokens_per_iteration", s.tokens_per_iteration},
        {"faults", {{"kind", s.faults.kind == FaultKind::Scripted ? "scripted" : "poisson"}, {"events", events}}},
        {"rng_seed", s.rng_seed},
        {"store", {{"kind", store_kind_name(s.store.kind)}, {"root", s.store.root}}},
        {"output",
         {{"report", s.output.report},
          {"timeline", s.output.timeline},
          {"dump_plan", s.output.dump_plan},
          {"record_timeline", s.output.record_timeline}}},
    };
    if (s.routing.counts.empty()) doc["routing"]["counts"] = json::array();
    if (s.capacity_factor) doc["capacity_factor"] = *s.capacity_factor;
    if (s.persist_target) doc["persist_target"] = *s.persist_target;
    return doc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("scenario.file", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("scenario.json", std::string("malformed JSON: ") + e.what());
    }
    return scenario_from_json(doc);
}

json report_to_json(const SimReport& r) {
    const auto secs = [](Ticks t) { return ticks_to_seconds(t); };
    json stalls = json::array();
    for (const auto& s : r.stalls) {
        stalls.push_back({{"iteration", s.iteration}, {"seconds", secs(s.ticks)}, {"us", s.ticks}, {"cause", s.cause}});
    }
    json bottlenecks = json::array();
    for (const auto& b : r.bottlenecks) {
        bottlenecks.push_back({{"phase", b.phase},
                               {"snapshot_rank", b.snapshot_rank},
                               {"snapshot_bytes", b.snapshot_bytes},
                               {"persist_rank", b.persist_rank},
                               {"persist_bytes", b.persist_bytes}});
    }
    json faults = json::array();
    for (const auto& f : r.faults) {
        faults.push_back({{"iteration", f.iteration},
                          {"time_s", secs(f.time)},
                          {"nodes", f.nodes},
                          {"resume_iteration", f.resume_iteration},
                          {"version_skew", f.version_skew},
                          {"replayed_iterations", f.replayed_iterations},
                          {"lost_tokens", f.lost_tokens},
                          {"plt_added", f.plt_added},
                          {"from_memory", f.from_memory},
                          {"from_storage", f.from_storage},
                          {"from_initial", f.from_initial},
                          {"k_after", f.k_after}});
    }
    json timeline = json::array();
    for (const auto& e : r.timeline) {
        timeline.push_back({{"time", format_ticks(e.time)}, {"rank", e.rank}, {"event", e.event}, {"detail", e.detail}});
    }
    return {
        {"o_save_s", secs(r.o_save)},
        {"o_save_us", r.o_save},
        {"o_restart_s", secs(r.o_restart)},
        {"o_lost_s", secs(r.o_lost)},
        {"o_lost_iterations", r.o_lost_iterations},
        {"o_ckpt_s", secs(r.o_ckpt)},
        {"o_ckpt_us", r.o_ckpt},
        {"wall_time_s", secs(r.wall_time)},
        {"stalls", stalls},
        {"plt", {{"average", r.plt}, {"per_layer", r.plt_per_layer}, {"lost_tokens_per_layer", r.lost_tokens_per_layer}}},
        {"bottlenecks", bottlenecks},
        {"snapshot_time_s", secs(r.snapshot_time)},
        {"persist_time_s", secs(r.persist_time)},
        {"min_feasible_i_ckpt", r.min_feasible_i_ckpt},
        {"version_skew", r.version_skew},
        {"iterations_executed", r.iterations_executed},
        {"checkpoints", r.checkpoints},
        {"persisted_versions", r.persisted_versions},
        {"failed_persists", r.failed_persists},
        {"dropped_tokens", r.dropped_tokens},
        {"k_trace", r.k_trace},
        {"faults", faults},
        {"timeline", timeline},
    };
}

std::string timeline_csv(const SimReport& r) {
    const auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    };
    std::ostringstream out;
    out << "time,rank,event,detail\n";
    for (const auto& e : r.timeline) {
        out << format_ticks(e.time) << ',' << e.rank << ',' << quote(e.event) << ',' << quote(e.detail) << '\n';
    }
    return out.str();
}

json plan_to_json(const Scenario& s) {
    const RankLayout layout = build_layout(s.model, s.parallel, s.cluster);
    const SequentialSchedule schedule(s.model.experts_per_layer, s.model.num_moe_layers, s.k_snapshot(), s.k_persist());
    const ShardPlan plan = make_plan(layout, s.strategy, schedule);
    json phases = json::array();
    for (std::uint32_t c = 0; c < plan.period(); ++c) {
        const PhasePlan& ph = plan.phases[c];
        const PhasePlan persist = restrict_experts(layout, ph, schedule.persist_selection(c));
        json ranks = json::array();
        for (Rank r = 0; r < ph.per_rank.size(); ++r) {
            json entries = json::array();
            for (const auto& a : ph.per_rank[r]) {
                entries.push_back({{"key", entry_key(layout.unit(a.unit).key, a.part, a.parts)},
                                   {"begin", a.range.begin},
                                   {"end", a.range.end}});
            }
            ranks.push_back({{"rank", r}, {"node", layout.node_of(r)}, {"entries", entries}});
        }
        const auto [br, bb] = bottleneck_workload(ph);
        phases.push_back({{"phase", c},
                          {"workload", ph.workload},
                          {"persist_workload", persist.workload},
                          {"bottleneck", {{"rank", br}, {"bytes", bb}}},
                          {"ranks", ranks}});
    }
    return {{"strategy", to_string(s.strategy)},
            {"k_snapshot", s.k_snapshot()},
            {"k_persist", s.k_persist()},
            {"period", plan.period()},
            {"full_checkpoint_bytes", full_checkpoint_size(s.model)},
            {"pec_checkpoint_bytes", pec_checkpoint_size(s.model, s.k_persist())},
            {"ideal_rank_workload", ideal_rank_workload(s.model, s.parallel)},
            {"pec_imbalance", pec_imbalance(s.model, s.parallel, s.k_persist())},
            {"phases", phases}};
}

}  // namespace moc
