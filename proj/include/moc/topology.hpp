#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace moc {

using Rank = std::uint32_t;
using NodeId = std::uint32_t;

struct NonExpertModule {
    std::string name;
    std::uint64_t params = 0;

    bool operator==(const NonExpertModule&) const = default;
};

struct ModelSpec {
    std::uint32_t num_moe_layers = 1;
    std::uint32_t experts_per_layer = 1;
    std::uint32_t top_k = 1;
    std::uint64_t non_expert_params = 0;
    std::uint64_t expert_params_per_expert = 0;
    std::uint32_t bytes_weight = 2;
    std::uint32_t bytes_optim = 12;
    // Model-wide total; split across DP ranks (remainder on the last rank).
    std::uint64_t other_states_bytes = 0;
    std::vector<NonExpertModule> non_expert_modules;

    /// P_e: parameters summed over every expert of every MoE layer.
    std::uint64_t expert_params_total() const {
        return expert_params_per_expert * experts_per_layer * num_moe_layers;
    }

    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

struct ParallelSpec {
    std::uint32_t dp_degree = 1;
    std::uint32_t ep_degree = 1;
    std::uint32_t tp_degree = 1;
    std::uint32_t pp_degree = 1;

    std::uint32_t ep_groups() const { return dp_degree / ep_degree; }
    std::uint32_t gpu_count() const { return dp_degree * tp_degree * pp_degree; }

    void validate(const ModelSpec& model) const;

    bool operator==(const ParallelSpec&) const = default;
};

struct ClusterSpec {
    std::uint32_t num_nodes = 1;
    std::uint32_t gpus_per_node = 1;
    double snapshot_bandwidth = 1e9;  // bytes/s per rank, GPU -> host
    double persist_bandwidth = 1e8;   // bytes/s per rank, host -> storage
    double fb_time = 1.0;
    double update_time = 0.1;
    double restart_time = 10.0;
    double failure_rate = 0.0;  // faults per iteration

    void validate(const ParallelSpec& parallel) const;

    bool operator==(const ClusterSpec&) const = default;
};

enum class UnitKind : std::uint8_t {
    ExpertWeight,
    ExpertOptim,
    NonExpertWeight,
    NonExpertOptimShard,
    OtherStates,
};

bool is_expert_kind(UnitKind kind);
const char* to_string(UnitKind kind);

/// One independently saveable piece of model state.
struct StateUnit {
    UnitKind kind{};
    std::uint32_t layer = 0;   // expert kinds
    std::uint32_t expert = 0;  // expert kinds
    std::uint32_t module = 0;  // NonExpertWeight: index into ModelSpec::non_expert_modules
    Rank owner = 0;            // NonExpertOptimShard / OtherStates: owning DP rank
    std::uint64_t size_bytes = 0;
    std::vector<Rank> replica_ranks;  // sorted
    std::string key;  // ew.L<l>.E<e>, eo.L<l>.E<e>, new.<module>, neo.r<rank>, other.r<rank>
};

struct RankInfo {
    NodeId node = 0;
    Rank dp_rank = 0;
    std::uint32_t ep_group = 0;
    std::uint32_t ep_rank = 0;
};

struct ExpertRef {
    std::uint32_t layer = 0;
    std::uint32_t expert = 0;

    auto operator<=>(const ExpertRef&) const = default;
};

/// Per-class byte sizes of state units for a model on `dp_degree` DP ranks.
struct UnitSizes {
    std::uint64_t expert_weight = 0;
    std::uint64_t expert_optim = 0;
    std::vector<std::uint64_t> non_expert_weight;  // per module
    std::vector<std::uint64_t> optim_shards;       // per DP rank
    std::vector<std::uint64_t> other_states;       // per DP rank
};

UnitSizes unit_sizes(const ModelSpec& model, std::uint32_t dp_degree);

/// Placement of every state unit across DP ranks. Unit indices follow a fixed
/// order: expert weights (layer-major), expert optimizer states, non-expert
/// modules, optimizer shards, other states.
class RankLayout {
public:
    RankLayout(ModelSpec model, ParallelSpec parallel, ClusterSpec cluster);

    const ModelSpec& model() const { return model_; }
    const ParallelSpec& parallel() const { return parallel_; }
    const ClusterSpec& cluster() const { return cluster_; }

    std::uint32_t rank_count() const { return parallel_.dp_degree; }
    const std::vector<RankInfo>& rank_info() const { return ranks_; }
    const RankInfo& info(Rank r) const { return ranks_.at(r); }
    NodeId node_of(Rank r) const { return ranks_.at(r).node; }
    std::vector<Rank> ranks_on_node(NodeId node) const;

    const std::vector<std::vector<ExpertRef>>& hosted_experts() const { return hosted_; }
    const std::vector<StateUnit>& units() const { return units_; }
    const StateUnit& unit(std::size_t index) const { return units_.at(index); }

    std::uint32_t ep_rank_of_expert(std::uint32_t expert) const;
    Rank host_rank(std::uint32_t expert, std::uint32_t ep_group) const;

    std::size_t expert_weight_unit(std::uint32_t layer, std::uint32_t expert) const;
    std::size_t expert_optim_unit(std::uint32_t layer, std::uint32_t expert) const;
    std::size_t non_expert_unit(std::uint32_t module) const;
    std::size_t optim_shard_unit(Rank owner) const;
    std::size_t other_states_unit(Rank owner) const;

    std::size_t expert_unit_count() const;  // weights + optimizer states

private:
    ModelSpec model_;
    ParallelSpec parallel_;
    ClusterSpec cluster_;
    std::vector<RankInfo> ranks_;
    std::vector<std::vector<ExpertRef>> hosted_;
    std::vector<StateUnit> units_;
};

RankLayout build_layout(const ModelSpec& model, const ParallelSpec& parallel,
                        const ClusterSpec& cluster);

}  // namespace moc
