#include "moc/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moc/errors.hpp"

namespace moc {

std::vector<std::uint32_t> select_sequential(std::uint64_t checkpoint, std::uint32_t layer,
                                             std::uint32_t n_experts, std::uint32_t k) {
    if (k == 0 || k > n_experts) {
        throw ValidationError("pec.k", "K must satisfy 1 <= K <= N");
    }
    const std::uint64_t start = ((layer + checkpoint) % n_experts) * k;
    std::vector<std::uint32_t> out(k);
    for (std::uint32_t j = 0; j < k; ++j) {
        out[j] = static_cast<std::uint32_t>((start + j) % n_experts);
    }
    std::sort(out.begin(), out.end());
    return out;
}

SequentialSchedule::SequentialSchedule(std::uint32_t n_experts, std::uint32_t n_layers,
                                       std::uint32_t k_snapshot, std::uint32_t k_persist)
    : n_experts_(n_experts), n_layers_(n_layers), k_snapshot_(k_snapshot), k_persist_(k_persist) {
    if (k_persist < 1 || k_persist > k_snapshot || k_snapshot > n_experts) {
        throw ValidationError("pec.k_order", "need 1 <= K_persist <= K_snapshot <= N");
    }
}

std::uint32_t SequentialSchedule::coverage_period() const {
    return (n_experts_ + k_persist_ - 1) / k_persist_;
}

std::uint32_t SequentialSchedule::repeat_period() const {
    return n_experts_ / std::gcd(n_experts_, k_persist_);
}

std::vector<std::uint32_t> SequentialSchedule::window(std::uint64_t checkpoint, std::uint32_t layer,
                                                      std::uint32_t width) const {
    const std::uint64_t start = ((layer + checkpoint) % n_experts_) * k_persist_;
    std::vector<std::uint32_t> out(width);
    for (std::uint32_t j = 0; j < width; ++j) {
        out[j] = static_cast<std::uint32_t>((start + j) % n_experts_);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::uint32_t> SequentialSchedule::selected(std::uint64_t checkpoint,
                                                        std::uint32_t layer) const {
    return window(checkpoint, layer, k_snapshot_);
}

std::vector<std::uint32_t> SequentialSchedule::persisted(std::uint64_t checkpoint,
                                                         std::uint32_t layer) const {
    return window(checkpoint, layer, k_persist_);
}

LayerSelection SequentialSchedule::snapshot_selection(std::uint64_t checkpoint) const {
    LayerSelection out(n_layers_);
    for (std::uint32_t m = 0; m < n_layers_; ++m) out[m] = selected(checkpoint, m);
    return out;
}

LayerSelection SequentialSchedule::persist_selection(std::uint64_t checkpoint) const {
    LayerSelection out(n_layers_);
    for (std::uint32_t m = 0; m < n_layers_; ++m) out[m] = persisted(checkpoint, m);
    return out;
}

std::vector<std::uint32_t> select_load_aware(std::span<const std::uint64_t> unsaved,
                                             std::span<const std::uint32_t> candidates,
                                             std::uint32_t k) {
    if (k > candidates.size()) {
        throw ValidationError("pec.k", "K exceeds the number of candidate experts");
    }
    std::vector<std::uint32_t> order(candidates.begin(), candidates.end());
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (unsaved[a] != unsaved[b]) return unsaved[a] > unsaved[b];
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::uint32_t> select_load_aware(std::span<const std::uint64_t> unsaved, std::uint32_t k) {
    std::vector<std::uint32_t> all(unsaved.size());
    std::iota(all.begin(), all.end(), 0u);
    return select_load_aware(unsaved, all, k);
}

DynamicKState DynamicKState::start(std::uint32_t k0, std::uint32_t n_experts, double threshold) {
    DynamicKState s;
    s.k0 = k0;
    s.current_k = std::min(k0, n_experts);
    s.k_max = n_experts;
    s.threshold = threshold;
    return s;
}

std::uint32_t DynamicKState::level() const {
    std::uint32_t j = 0;
    for (std::uint32_t k = k0; k < current_k; k *= 2) ++j;
    return j;
}

double DynamicKState::budget_slice() const {
    return threshold * std::ldexp(1.0, -static_cast<int>(level()) - 1);
}

DynamicKState dynamic_k_step(DynamicKState state, double plt_added) {
    if (plt_added < 0) {
        throw ValidationError("dynamic_k.plt_added", "PLT increment must be >= 0");
    }
    state.cumulative_plt += plt_added;
    if (state.at_cap()) return state;
    state.attributable_plt += plt_added;
    if (state.attributable_plt > state.budget_slice()) {
        state.current_k = std::min(state.current_k * 2, state.k_max);
        state.attributable_plt = 0.0;
    }
    return state;
}

}  // namespace moc
