#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace moc {

/// Expert indices chosen for each MoE layer at one checkpoint (each list sorted).
using LayerSelection = std::vector<std::vector<std::uint32_t>>;

/// Sequential selection: the K experts {((m + c)K + j) mod N : j < K}, sorted.
/// Layer m's window starts K further along than layer m-1's, so the K*N_moe
/// picks of one checkpoint form a single contiguous run over the expert ring.
std::vector<std::uint32_t> select_sequential(std::uint64_t checkpoint, std::uint32_t layer,
                                             std::uint32_t n_experts, std::uint32_t k);

/// Two-level sequential schedule. The persist window has width `k_persist` and
/// advances by `k_persist` per checkpoint; the snapshot window starts at the
/// same expert and has width `k_snapshot` >= `k_persist`.
class SequentialSchedule {
public:
    SequentialSchedule(std::uint32_t n_experts, std::uint32_t n_layers, std::uint32_t k_snapshot,
                       std::uint32_t k_persist);
    SequentialSchedule(std::uint32_t n_experts, std::uint32_t n_layers, std::uint32_t k)
        : SequentialSchedule(n_experts, n_layers, k, k) {}

    std::uint32_t n_experts() const { return n_experts_; }
    std::uint32_t n_layers() const { return n_layers_; }
    std::uint32_t k_snapshot() const { return k_snapshot_; }
    std::uint32_t k_persist() const { return k_persist_; }

    /// ceil(N / K_persist): consecutive checkpoints needed to persist every expert.
    std::uint32_t coverage_period() const;
    /// Smallest P > 0 with selected(c + P, m) == selected(c, m) for all c, m.
    std::uint32_t repeat_period() const;

    std::vector<std::uint32_t> selected(std::uint64_t checkpoint, std::uint32_t layer) const;
    std::vector<std::uint32_t> persisted(std::uint64_t checkpoint, std::uint32_t layer) const;

    LayerSelection snapshot_selection(std::uint64_t checkpoint) const;
    LayerSelection persist_selection(std::uint64_t checkpoint) const;

private:
    std::vector<std::uint32_t> window(std::uint64_t checkpoint, std::uint32_t layer,
                                      std::uint32_t width) const;

    std::uint32_t n_experts_;
    std::uint32_t n_layers_;
    std::uint32_t k_snapshot_;
    std::uint32_t k_persist_;
};

/// Tokens delivered to each expert since its last save at one tier.
class LoadCounters {
public:
    LoadCounters() = default;
    LoadCounters(std::uint32_t n_layers, std::uint32_t n_experts)
        : n_experts_(n_experts), unsaved_(static_cast<std::size_t>(n_layers) * n_experts, 0) {}

    std::uint64_t& at(std::uint32_t layer, std::uint32_t expert) {
        return unsaved_[static_cast<std::size_t>(layer) * n_experts_ + expert];
    }
    std::uint64_t at(std::uint32_t layer, std::uint32_t expert) const {
        return unsaved_[static_cast<std::size_t>(layer) * n_experts_ + expert];
    }
    std::span<const std::uint64_t> layer(std::uint32_t l) const {
        return {unsaved_.data() + static_cast<std::size_t>(l) * n_experts_, n_experts_};
    }

private:
    std::uint32_t n_experts_ = 0;
    std::vector<std::uint64_t> unsaved_;
};

/// The K experts with the most unsaved tokens; ties go to the lower index.
/// Result sorted ascending.
std::vector<std::uint32_t> select_load_aware(std::span<const std::uint64_t> unsaved, std::uint32_t k);

/// Same rule restricted to `candidates`.
std::vector<std::uint32_t> select_load_aware(std::span<const std::uint64_t> unsaved,
                                             std::span<const std::uint32_t> candidates,
                                             std::uint32_t k);

inline std::vector<std::uint32_t> select_load_aware(const LoadCounters& counters,
                                                    std::uint32_t layer, std::uint32_t k) {
    return select_load_aware(counters.layer(layer), k);
}

/// Dynamic-K controller state. Level j (current_k = k0 * 2^j) may absorb at
/// most threshold * 2^-(j+1) of PLT before K doubles, so the slices of all
/// levels sum to less than the threshold.
struct DynamicKState {
    std::uint32_t k0 = 1;
    std::uint32_t current_k = 1;
    std::uint32_t k_max = 1;  // N
    double threshold = 0.0375;
    double cumulative_plt = 0.0;
    double attributable_plt = 0.0;  // accumulated while at current_k

    static DynamicKState start(std::uint32_t k0, std::uint32_t n_experts, double threshold = 0.0375);

    std::uint32_t level() const;
    double budget_slice() const;
    bool at_cap() const { return current_k >= k_max; }
};

/// Record PLT incurred by one recovery; doubles K (capped at N) when the PLT
/// attributed to the current K exceeds its slice.
DynamicKState dynamic_k_step(DynamicKState state, double plt_added);

}  // namespace moc
