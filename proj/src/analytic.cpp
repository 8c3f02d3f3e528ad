#include "moc/analytic.hpp"

#include "moc/errors.hpp"

namespace moc {

AnalyticResult analytic_overhead(const AnalyticParams& p) {
    if (!(p.i_ckpt_full > 0) || !(p.i_ckpt_moc > 0)) {
        throw ValidationError("analytic.i_ckpt", "checkpoint intervals must be > 0");
    }
    if (!(p.i_total > 0)) throw ValidationError("analytic.i_total", "must be > 0");
    if (p.failure_rate < 0) throw ValidationError("analytic.failure_rate", "must be >= 0");
    if (!(p.iteration_time > 0)) throw ValidationError("analytic.iteration_time", "must be > 0");

    const auto total = [&](double o_save, double interval) {
        return o_save * p.i_total / interval +
               p.failure_rate * p.i_total * (p.restart_time + interval / 2 * p.iteration_time);
    };
    AnalyticResult r;
    r.o_ckpt_full = total(p.o_save_full, p.i_ckpt_full);
    r.o_ckpt_moc = total(p.o_save_moc, p.i_ckpt_moc);
    const double lhs = p.o_save_moc / p.i_ckpt_moc + p.failure_rate * p.i_ckpt_moc / 2 * p.iteration_time;
    const double rhs = p.o_save_full / p.i_ckpt_full + p.failure_rate * p.i_ckpt_full / 2 * p.iteration_time;
    r.moc_wins = lhs < rhs;
    return r;
}

}  // namespace moc
