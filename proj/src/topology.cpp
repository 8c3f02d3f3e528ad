#include "moc/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moc/errors.hpp"

namespace moc {

namespace {

void require(bool ok, const char* constraint, const std::string& message) {
    if (!ok) {
        throw ValidationError(constraint, message);
    }
}

// floor share per part, remainder absorbed by the last part
std::vector<std::uint64_t> split_exact(std::uint64_t total, std::uint32_t parts) {
    std::vector<std::uint64_t> out(parts, total / parts);
    out.back() += total % parts;
    return out;
}

}  // namespace

bool is_expert_kind(UnitKind kind) {
    return kind == UnitKind::ExpertWeight || kind == UnitKind::ExpertOptim;
}

const char* to_string(UnitKind kind) {
    switch (kind) {
        case UnitKind::ExpertWeight: return "ExpertWeight";
        case UnitKind::ExpertOptim: return "ExpertOptim";
        case UnitKind::NonExpertWeight: return "NonExpertWeight";
        case UnitKind::NonExpertOptimShard: return "NonExpertOptimShard";
        case UnitKind::OtherStates: return "OtherStates";
    }
    return "?";
}

void ModelSpec::validate() const {
    require(num_moe_layers >= 1, "model.num_moe_layers", "must be >= 1");
    require(experts_per_layer >= 1, "model.experts_per_layer", "must be >= 1");
    require(top_k >= 1 && top_k <= experts_per_layer, "model.top_k",
            "must satisfy 1 <= top_k <= experts_per_layer");
    require(non_expert_params >= 1, "model.non_expert_params", "must be >= 1");
    require(expert_params_per_expert >= 1, "model.expert_params_per_expert", "must be >= 1");
    require(bytes_weight >= 1, "model.bytes_weight", "must be >= 1");
    require(bytes_optim >= 1, "model.bytes_optim", "must be >= 1");
    require(!non_expert_modules.empty(), "model.non_expert_modules", "at least one module required");
    std::uint64_t sum = 0;
    for (const auto& m : non_expert_modules) {
        require(m.params >= 1, "model.non_expert_modules",
                "module '" + m.name + "' must have >= 1 parameter");
        require(!m.name.empty(), "model.non_expert_modules", "module names must be non-empty");
        sum += m.params;
    }
    require(sum == non_expert_params, "model.non_expert_modules_sum",
            "module parameter counts sum to " + std::to_string(sum) +
                " but non_expert_params is " + std::to_string(non_expert_params));
    std::vector<std::string> names;
    for (const auto& m : non_expert_modules) names.push_back(m.name);
    std::sort(names.begin(), names.end());
    require(std::adjacent_find(names.begin(), names.end()) == names.end(),
            "model.non_expert_modules", "module names must be unique");
}

void ParallelSpec::validate(const ModelSpec& model) const {
    require(dp_degree >= 1, "parallel.dp", "must be >= 1");
    require(ep_degree >= 1, "parallel.ep", "must be >= 1");
    require(tp_degree >= 1, "parallel.tp", "must be >= 1");
    require(pp_degree >= 1, "parallel.pp", "must be >= 1");
    require(dp_degree % ep_degree == 0, "parallel.dp_mod_ep",
            "D_dp (" + std::to_string(dp_degree) + ") must be divisible by D_ep (" +
                std::to_string(ep_degree) + ")");
    require(model.experts_per_layer % ep_degree == 0, "parallel.experts_mod_ep",
            "experts_per_layer (" + std::to_string(model.experts_per_layer) +
                ") must be divisible by D_ep (" + std::to_string(ep_degree) + ")");
    require(model.non_expert_params * model.bytes_optim >= dp_degree, "parallel.optim_shards",
            "non-expert optimizer bytes must be at least D_dp so every shard is non-empty");
}

void ClusterSpec::validate(const ParallelSpec& parallel) const {
    require(num_nodes >= 1 && gpus_per_node >= 1, "cluster.size", "nodes and gpus must be >= 1");
    require(static_cast<std::uint64_t>(num_nodes) * gpus_per_node == parallel.gpu_count(),
            "cluster.gpu_count",
            "num_nodes x gpus_per_node (" + std::to_string(num_nodes * gpus_per_node) +
                ") must equal D_dp x tp x pp (" + std::to_string(parallel.gpu_count()) + ")");
    require(snapshot_bandwidth > 0 && persist_bandwidth > 0, "cluster.bandwidth", "must be > 0");
    require(fb_time > 0 && update_time > 0 && restart_time > 0, "cluster.times", "must be > 0");
    require(failure_rate >= 0 && failure_rate < 1, "cluster.failure_rate",
            "must satisfy 0 <= failure_rate < 1");
}

UnitSizes unit_sizes(const ModelSpec& model, std::uint32_t dp_degree) {
    UnitSizes sizes;
    sizes.expert_weight = model.expert_params_per_expert * model.bytes_weight;
    sizes.expert_optim = model.expert_params_per_expert * model.bytes_optim;
    for (const auto& m : model.non_expert_modules) {
        sizes.non_expert_weight.push_back(m.params * model.bytes_weight);
    }
    sizes.optim_shards = split_exact(model.non_expert_params * model.bytes_optim, dp_degree);
    sizes.other_states = split_exact(model.other_states_bytes, dp_degree);
    return sizes;
}

RankLayout::RankLayout(ModelSpec model, ParallelSpec parallel, ClusterSpec cluster)
    : model_(std::move(model)), parallel_(parallel), cluster_(cluster) {
    const std::uint32_t dp = parallel_.dp_degree;
    const std::uint32_t ep = parallel_.ep_degree;
    const std::uint32_t gpus_per_rank = parallel_.tp_degree * parallel_.pp_degree;

    ranks_.resize(dp);
    for (Rank r = 0; r < dp; ++r) {
        ranks_[r] = RankInfo{(r * gpus_per_rank) / cluster_.gpus_per_node, r, r / ep, r % ep};
    }

    hosted_.assign(dp, {});
    for (Rank r = 0; r < dp; ++r) {
        for (std::uint32_t l = 0; l < model_.num_moe_layers; ++l) {
            for (std::uint32_t e = 0; e < model_.experts_per_layer; ++e) {
                if (ep_rank_of_expert(e) == ranks_[r].ep_rank) hosted_[r].push_back({l, e});
            }
        }
    }

    const UnitSizes sizes = unit_sizes(model_, dp);
    const std::uint32_t groups = parallel_.ep_groups();
    units_.reserve(expert_unit_count() + model_.non_expert_modules.size() + 2u * dp);

    for (int optim = 0; optim < 2; ++optim) {
        for (std::uint32_t l = 0; l < model_.num_moe_layers; ++l) {
            for (std::uint32_t e = 0; e < model_.experts_per_layer; ++e) {
                StateUnit u;
                u.kind = optim ? UnitKind::ExpertOptim : UnitKind::ExpertWeight;
                u.layer = l;
                u.expert = e;
                u.size_bytes = optim ? sizes.expert_optim : sizes.expert_weight;
                if (optim) {
                    u.replica_ranks = {host_rank(e, 0)};
                } else {
                    for (std::uint32_t g = 0; g < groups; ++g) u.replica_ranks.push_back(host_rank(e, g));
                }
                u.key = std::string(optim ? "eo" : "ew") + ".L" + std::to_string(l) + ".E" +
                        std::to_string(e);
                units_.push_back(std::move(u));
            }
        }
    }
    for (std::uint32_t m = 0; m < model_.non_expert_modules.size(); ++m) {
        StateUnit u;
        u.kind = UnitKind::NonExpertWeight;
        u.module = m;
        u.size_bytes = sizes.non_expert_weight[m];
        u.replica_ranks.resize(dp);
        std::iota(u.replica_ranks.begin(), u.replica_ranks.end(), 0u);
        u.key = "new." + model_.non_expert_modules[m].name;
        units_.push_back(std::move(u));
    }
    for (Rank r = 0; r < dp; ++r) {
        StateUnit u;
        u.kind = UnitKind::NonExpertOptimShard;
        u.owner = r;
        u.size_bytes = sizes.optim_shards[r];
        u.replica_ranks = {r};
        u.key = "neo.r" + std::to_string(r);
        units_.push_back(std::move(u));
    }
    for (Rank r = 0; r < dp; ++r) {
        StateUnit u;
        u.kind = UnitKind::OtherStates;
        u.owner = r;
        u.size_bytes = sizes.other_states[r];
        u.replica_ranks = {r};
        u.key = "other.r" + std::to_string(r);
        units_.push_back(std::move(u));
    }
}

std::vector<Rank> RankLayout::ranks_on_node(NodeId node) const {
    std::vector<Rank> out;
    for (const auto& info : ranks_) {
        if (info.node == node) out.push_back(info.dp_rank);
    }
    return out;
}

std::uint32_t RankLayout::ep_rank_of_expert(std::uint32_t expert) const {
    return expert % parallel_.ep_degree;
}

Rank RankLayout::host_rank(std::uint32_t expert, std::uint32_t ep_group) const {
    return ep_group * parallel_.ep_degree + ep_rank_of_expert(expert);
}

std::size_t RankLayout::expert_unit_count() const {
    return 2u * model_.num_moe_layers * model_.experts_per_layer;
}

std::size_t RankLayout::expert_weight_unit(std::uint32_t layer, std::uint32_t expert) const {
    return static_cast<std::size_t>(layer) * model_.experts_per_layer + expert;
}

std::size_t RankLayout::expert_optim_unit(std::uint32_t layer, std::uint32_t expert) const {
    return expert_unit_count() / 2 + expert_weight_unit(layer, expert);
}

std::size_t RankLayout::non_expert_unit(std::uint32_t module) const {
    return expert_unit_count() + module;
}

std::size_t RankLayout::optim_shard_unit(Rank owner) const {
    return expert_unit_count() + model_.non_expert_modules.size() + owner;
}

std::size_t RankLayout::other_states_unit(Rank owner) const {
    return optim_shard_unit(0) + parallel_.dp_degree + owner;
}

RankLayout build_layout(const ModelSpec& model, const ParallelSpec& parallel,
                        const ClusterSpec& cluster) {
    model.validate();
    parallel.validate(model);
    cluster.validate(parallel);
    return RankLayout(model, parallel, cluster);
}

}  // namespace moc
