#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "moc/topology.hpp"

namespace moc {

enum class RoutingKind : std::uint8_t { Uniform, Zipf, Scripted };

const char* to_string(RoutingKind k);

struct RoutingConfig {
    RoutingKind kind = RoutingKind::Uniform;
    double zipf_s = 1.0;
    // Scripted: assignments per (layer, expert), the same every iteration.
    std::vector<std::vector<std::uint64_t>> counts;

    bool operator==(const RoutingConfig&) const = default;
};

struct RoutedTokens {
    std::vector<std::uint64_t> delivered;  // [layer * N + expert], after the capacity cap
    std::vector<std::uint64_t> dropped;    // same shape
};

/// Per-expert capacity ceil(cf * TopK * T / N).
std::uint64_t expert_capacity(double capacity_factor, std::uint32_t top_k, std::uint64_t tokens,
                              std::uint32_t n_experts);

/// Token-to-expert assignments of one iteration (T * TopK per layer).
/// Uniform splits evenly and hands the remainder to experts starting at
/// `iteration mod N`. Zipf draws every assignment independently with
/// p(e) proportional to 1/(e+1)^s from a generator seeded by (seed,
/// iteration), so replays see identical counts.
RoutedTokens route_tokens(std::uint64_t iteration, const RoutingConfig& routing, const ModelSpec& model,
                          std::uint64_t tokens_per_iteration, std::optional<double> capacity_factor,
                          std::uint64_t seed);

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
inline double unit_interval(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace moc
