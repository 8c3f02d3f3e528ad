#pragma once

namespace moc {

struct AnalyticParams {
    double o_save_full = 0;  // seconds per checkpoint
    double o_save_moc = 0;
    double i_ckpt_full = 1;  // iterations
    double i_ckpt_moc = 1;
    double failure_rate = 0;  // faults per iteration
    double restart_time = 0;  // seconds
    double i_total = 1;       // iterations
    // Seconds per iteration used to turn the I_ckpt/2 lost iterations into
    // seconds; 1.0 keeps the formula in its literal mixed-unit form.
    double iteration_time = 1.0;
};

struct AnalyticResult {
    double o_ckpt_full = 0;
    double o_ckpt_moc = 0;
    bool moc_wins = false;
};

/// Expected total overhead O_save * I_total / I_ckpt
///   + lambda * I_total * (O_restart + I_ckpt / 2 * iteration_time)
/// for both configurations, and whether the MoC one is strictly smaller:
///   O_save^MoC / I^MoC + lambda I^MoC / 2 < O_save^Full / I^Full + lambda I^Full / 2.
/// Throws ValidationError for non-positive intervals or totals.
AnalyticResult analytic_overhead(const AnalyticParams& p);

}  // namespace moc
