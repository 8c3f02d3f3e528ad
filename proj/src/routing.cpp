#include "moc/routing.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace moc {

const char* to_string(RoutingKind k) {
    switch (k) {
        case RoutingKind::Uniform: return "uniform";
        case RoutingKind::Zipf: return "zipf";
        case RoutingKind::Scripted: return "scripted";
    }
    return "?";
}

std::uint64_t expert_capacity(double capacity_factor, std::uint32_t top_k, std::uint64_t tokens,
                              std::uint32_t n_experts) {
    const long double exact = static_cast<long double>(capacity_factor) * top_k * tokens / n_experts;
    const long double rounded = std::round(exact);
    if (std::fabs(exact - rounded) < 1e-9L) return static_cast<std::uint64_t>(rounded);
    return static_cast<std::uint64_t>(std::ceil(exact));
}

RoutedTokens route_tokens(std::uint64_t iteration, const RoutingConfig& routing, const ModelSpec& model,
                          std::uint64_t tokens_per_iteration, std::optional<double> capacity_factor,
                          std::uint64_t seed) {
    const std::uint32_t n = model.experts_per_layer;
    const std::uint32_t layers = model.num_moe_layers;
    const std::uint64_t assignments = tokens_per_iteration * model.top_k;
    RoutedTokens out;
    out.delivered.assign(static_cast<std::size_t>(layers) * n, 0);
    out.dropped.assign(out.delivered.size(), 0);

    switch (routing.kind) {
        case RoutingKind::Uniform: {
            const std::uint64_t base = assignments / n;
            const std::uint64_t rem = assignments % n;
            for (std::uint32_t l = 0; l < layers; ++l) {
                for (std::uint32_t e = 0; e < n; ++e) out.delivered[l * n + e] = base;
                for (std::uint64_t j = 0; j < rem; ++j) out.delivered[l * n + (iteration + j) % n] += 1;
            }
            break;
        }
        case RoutingKind::Zipf: {
            std::vector<double> cdf(n);
            double total = 0;
            for (std::uint32_t e = 0; e < n; ++e) {
                total += 1.0 / std::pow(static_cast<double>(e + 1), routing.zipf_s);
                cdf[e] = total;
            }
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32)};
            std::mt19937_64 rng(seq);
            for (std::uint32_t l = 0; l < layers; ++l) {
                for (std::uint64_t a = 0; a < assignments; ++a) {
                    const double u = unit_interval(rng()) * total;
                    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
                    const auto e = static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), n - 1));
                    out.delivered[l * n + e] += 1;
                }
            }
            break;
        }
        case RoutingKind::Scripted:
            for (std::uint32_t l = 0; l < layers; ++l) {
                for (std::uint32_t e = 0; e < n; ++e) out.delivered[l * n + e] = routing.counts.at(l).at(e);
            }
            break;
    }

    if (capacity_factor) {
        const std::uint64_t cap = expert_capacity(*capacity_factor, model.top_k, tokens_per_iteration, n);
        for (std::size_t i = 0; i < out.delivered.size(); ++i) {
            if (out.delivered[i] > cap) {
                out.dropped[i] = out.delivered[i] - cap;
                out.delivered[i] = cap;
            }
        }
    }
    return out;
}

}  // namespace moc
