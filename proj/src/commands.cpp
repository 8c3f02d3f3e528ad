#include "moc/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "moc/analytic.hpp"
#include "moc/crashtest.hpp"
#include "moc/errors.hpp"
#include "moc/scenario_io.hpp"
#include "moc/simulator.hpp"

namespace moc {

namespace {

Scenario load_with(const std::filesystem::path& config, const RunOverrides& o) {
    Scenario s = load_scenario(config);
    if (o.seed) s.rng_seed = *o.seed;
    if (o.i_ckpt) s.i_ckpt = *o.i_ckpt;
    if (o.k_pec) {
        s.pec.k_pec = *o.k_pec;
        s.pec.k_snapshot = *o.k_pec;
        s.pec.k_persist = *o.k_pec;
    }
    if (o.strategy) s.strategy = parse_strategy(*o.strategy);
    if (o.report) s.output.report = *o.report;
    if (o.timeline) s.output.timeline = *o.timeline;
    if (o.dump_plan) s.output.dump_plan = true;
    s.validate();
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f.flush()) throw std::runtime_error("write failed for " + path);
}

// Maps exceptions onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, F body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "simulation error: " << e.what() << '\n';
        return kExitSimulation;
    }
}

std::string secs(Ticks t) { return format_ticks(t); }

}  // namespace

int cmd_run(const std::filesystem::path& config, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load_with(config, overrides);
        if (s.output.dump_plan) err << plan_to_json(s).dump(2) << '\n';
        const SimReport r = run_scenario(s);
        const std::string report = report_to_json(r).dump(2) + "\n";
        if (s.output.report.empty()) {
            out << report;
        } else {
            write_file(s.output.report, report);
        }
        if (!s.output.timeline.empty()) write_file(s.output.timeline, timeline_csv(r));
        return kExitOk;
    });
}

int cmd_compare(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Scenario base = load_scenario(config);

        Scenario blocking = base;
        blocking.strategy = Strategy::Baseline;
        blocking.mode = CheckpointMode::Blocking;
        blocking.dynamic_k.enabled = false;
        Scenario base_async = blocking;
        base_async.mode = CheckpointMode::Async;
        Scenario moc_async = base;
        moc_async.mode = CheckpointMode::Async;
        if (!uses_pec(moc_async.strategy)) moc_async.strategy = Strategy::AdaptivePec;
        for (Scenario* s : {&blocking, &base_async, &moc_async}) {
            s->output.record_timeline = false;
            s->store.kind = StoreKind::Memory;
        }

        struct Row {
            const char* name;
            SimReport report;
        };
        const Row rows[] = {{"blocking", run_scenario(blocking)},
                            {"base-async", run_scenario(base_async)},
                            {"moc-async", run_scenario(moc_async)}};

        out << std::left << std::setw(12) << "regime" << std::setw(16) << "iter_time_s" << std::setw(16)
            << "o_save_s" << std::setw(16) << "stall_s" << std::setw(16) << "o_ckpt_s" << std::setw(10) << "plt"
            << "min_i_ckpt\n";
        for (const Row& row : rows) {
            const SimReport& r = row.report;
            const Ticks iter = r.iterations_executed ? r.wall_time / static_cast<Ticks>(r.iterations_executed) : 0;
            Ticks stall = 0;
            for (const auto& st : r.stalls) stall += st.ticks;
            char plt[32];
            std::snprintf(plt, sizeof plt, "%.6f", r.plt);
            out << std::setw(12) << row.name << std::setw(16) << secs(iter) << std::setw(16) << secs(r.o_save)
                << std::setw(16) << secs(stall) << std::setw(16) << secs(r.o_ckpt) << std::setw(10) << plt
                << r.min_feasible_i_ckpt << '\n';
        }

        const SimReport& full = rows[0].report;
        const SimReport& basync = rows[1].report;
        const SimReport& moc = rows[2].report;
        if (full.o_save > 0) {
            const double overlap = 1.0 - static_cast<double>(basync.o_save) / static_cast<double>(full.o_save);
            char line[64];
            std::snprintf(line, sizeof line, "base-async overlap: %.2f%%\n", overlap * 100.0);
            out << line;
        }

        const auto per_ckpt = [](const SimReport& r) {
            return r.checkpoints ? ticks_to_seconds(r.o_save) / static_cast<double>(r.checkpoints) : 0.0;
        };
        AnalyticParams p;
        p.o_save_full = per_ckpt(full);
        p.o_save_moc = per_ckpt(moc);
        p.i_ckpt_full = static_cast<double>(blocking.i_ckpt);
        p.i_ckpt_moc = static_cast<double>(moc_async.i_ckpt);
        p.failure_rate = base.cluster.failure_rate;
        p.restart_time = base.cluster.restart_time;
        p.i_total = static_cast<double>(base.i_total);
        p.iteration_time = base.cluster.fb_time + base.cluster.update_time;
        const AnalyticResult a = analytic_overhead(p);
        char line[160];
        std::snprintf(line, sizeof line, "analytic: o_ckpt_full=%.6f o_ckpt_moc=%.6f verdict=%s\n", a.o_ckpt_full,
                      a.o_ckpt_moc, a.moc_wins ? "moc" : "full");
        out << line;
        return kExitOk;
    });
}

int cmd_crashtest(const std::filesystem::path& root, std::uint64_t trials, std::uint64_t seed, std::ostream& out,
                  std::ostream& err) {
    return guarded(err, [&] {
        const CrashTestResult r = run_crashtest(root, trials, seed);
        for (const auto& m : r.messages) err << m << '\n';
        out << "trials=" << r.trials << " failures=" << r.failures << " new_loaded=" << r.new_loaded
            << " prior_loaded=" << r.prior_loaded << '\n';
        out << (r.failures == 0 ? "PASS" : "FAIL") << '\n';
        return r.failures == 0 ? kExitOk : kExitFailure;
    });
}

int cmd_dump_plan(const std::filesystem::path& config, const RunOverrides& overrides, std::ostream& out,
                  std::ostream& err) {
    return guarded(err, [&] {
        const Scenario s = load_with(config, overrides);
        out << plan_to_json(s).dump(2) << '\n';
        return kExitOk;
    });
}

}  // namespace moc
