#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "moc/errors.hpp"
#include "moc/topology.hpp"
#include "test_support.hpp"

using namespace moc;
using moc::testing::make_cluster;
using moc::testing::make_model;
using moc::testing::make_parallel;

TEST(BuildLayout, ThreeExpertsThreeRanksPutsExpertZeroOnRankZero) {
    const ModelSpec m = make_model(4, 3, 10, {30});
    const RankLayout layout = build_layout(m, make_parallel(3, 3), make_cluster(1, 3));
    std::vector<ExpertRef> want;
    for (std::uint32_t l = 0; l < 4; ++l) want.push_back({l, 0});
    EXPECT_EQ(layout.hosted_experts()[0], want);
    EXPECT_EQ(layout.hosted_experts()[1].front().expert, 1u);
    EXPECT_EQ(layout.hosted_experts()[2].front().expert, 2u);
}

TEST(BuildLayout, SingleRankHostsEverything) {
    const ModelSpec m = make_model(2, 1, 10, {30, 40});
    const RankLayout layout = build_layout(m, make_parallel(1, 1), make_cluster(1, 1));
    for (const auto& u : layout.units()) EXPECT_EQ(u.replica_ranks, std::vector<Rank>{0}) << u.key;
}

TEST(BuildLayout, TwoEpGroupsReplicateEachExpertTwice) {
    const ModelSpec m = make_model(2, 16, 10, {30});
    const RankLayout layout = build_layout(m, make_parallel(16, 8), make_cluster(2, 8));
    for (std::uint32_t l = 0; l < 2; ++l) {
        int hosts = 0;
        std::vector<std::uint32_t> groups;
        for (Rank r = 0; r < 16; ++r) {
            const auto& h = layout.hosted_experts()[r];
            if (std::find(h.begin(), h.end(), ExpertRef{l, 5}) != h.end()) {
                ++hosts;
                groups.push_back(layout.info(r).ep_group);
            }
        }
        EXPECT_EQ(hosts, 2);
        EXPECT_EQ(groups, (std::vector<std::uint32_t>{0, 1}));
        EXPECT_EQ(layout.unit(layout.expert_weight_unit(l, 5)).replica_ranks.size(), 2u);
    }
}

TEST(BuildLayout, ExpertsAreStridedOverEpRanks) {
    const RankLayout layout = build_layout(make_model(1, 8, 10, {30}), make_parallel(4, 4), make_cluster(1, 4));
    for (std::uint32_t e = 0; e < 8; ++e) EXPECT_EQ(layout.ep_rank_of_expert(e), e % 4);
    EXPECT_EQ(layout.host_rank(5, 0), 1u);
}

TEST(BuildLayout, NodesFollowGpuCount) {
    ParallelSpec p = make_parallel(4, 2);
    p.tp_degree = 2;
    const RankLayout layout = build_layout(make_model(1, 2, 10, {30}), p, make_cluster(2, 4));
    EXPECT_EQ(layout.node_of(0), 0u);
    EXPECT_EQ(layout.node_of(1), 0u);
    EXPECT_EQ(layout.node_of(2), 1u);
    EXPECT_EQ(layout.ranks_on_node(1), (std::vector<Rank>{2, 3}));
}

TEST(UnitSizes, OptimShardsSplitEvenly) {
    const UnitSizes s = unit_sizes(make_model(1, 1, 25, {100}), 4);
    EXPECT_EQ(s.optim_shards, (std::vector<std::uint64_t>{300, 300, 300, 300}));
    EXPECT_EQ(s.expert_weight, 50u);
    EXPECT_EQ(s.expert_optim, 300u);
}

TEST(UnitSizes, OptimShardRemainderGoesToLastShard) {
    const UnitSizes a = unit_sizes(make_model(1, 1, 25, {101}), 4);
    EXPECT_EQ(a.optim_shards, (std::vector<std::uint64_t>{303, 303, 303, 303}));
    const UnitSizes b = unit_sizes(make_model(1, 1, 25, {103}), 5);
    std::uint64_t sum = 0;
    for (auto v : b.optim_shards) sum += v;
    EXPECT_EQ(sum, 103u * 12);
    EXPECT_EQ(b.optim_shards.back(), 103u * 12 - 4 * (103u * 12 / 5));
}

TEST(BuildLayout, OneReplicaOfEveryUnitConservesBytes) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = moc::testing::random_spec(rng);
        const RankLayout layout = build_layout(s.model, s.parallel, s.cluster);
        std::uint64_t sum = 0;
        for (const auto& u : layout.units()) sum += u.size_bytes;
        const std::uint64_t params = s.model.non_expert_params + s.model.expert_params_total();
        EXPECT_EQ(sum, params * (s.model.bytes_weight + s.model.bytes_optim) + s.model.other_states_bytes);
    }
}

TEST(BuildLayout, ReplicaCounts) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = moc::testing::random_spec(rng);
        const RankLayout layout = build_layout(s.model, s.parallel, s.cluster);
        std::map<UnitKind, std::size_t> want{{UnitKind::ExpertWeight, s.parallel.ep_groups()},
                                             {UnitKind::ExpertOptim, 1},
                                             {UnitKind::NonExpertWeight, s.parallel.dp_degree},
                                             {UnitKind::NonExpertOptimShard, 1}};
        for (const auto& u : layout.units()) {
            if (u.kind == UnitKind::OtherStates) continue;
            EXPECT_EQ(u.replica_ranks.size(), want[u.kind]) << u.key;
            EXPECT_GT(u.size_bytes, 0u);
        }
    }
}

TEST(BuildLayout, EveryExpertOncePerEpGroup) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = moc::testing::random_spec(rng);
        const RankLayout layout = build_layout(s.model, s.parallel, s.cluster);
        for (std::uint32_t g = 0; g < s.parallel.ep_groups(); ++g) {
            std::map<ExpertRef, int> seen;
            for (Rank r = 0; r < layout.rank_count(); ++r) {
                if (layout.info(r).ep_group != g) continue;
                for (const auto& x : layout.hosted_experts()[r]) ++seen[x];
            }
            EXPECT_EQ(seen.size(), std::size_t{s.model.num_moe_layers} * s.model.experts_per_layer);
            for (const auto& [x, n] : seen) EXPECT_EQ(n, 1);
        }
        // corresponding ep_ranks host the same set in every group
        for (Rank r = 0; r < layout.rank_count(); ++r) {
            EXPECT_EQ(layout.hosted_experts()[r], layout.hosted_experts()[layout.info(r).ep_rank]);
        }
    }
}

TEST(BuildLayout, IsDeterministic) {
    std::mt19937_64 rng(14);
    const auto s = moc::testing::random_spec(rng);
    const RankLayout a = build_layout(s.model, s.parallel, s.cluster);
    const RankLayout b = build_layout(s.model, s.parallel, s.cluster);
    ASSERT_EQ(a.units().size(), b.units().size());
    for (std::size_t i = 0; i < a.units().size(); ++i) {
        EXPECT_EQ(a.unit(i).key, b.unit(i).key);
        EXPECT_EQ(a.unit(i).replica_ranks, b.unit(i).replica_ranks);
        EXPECT_EQ(a.unit(i).size_bytes, b.unit(i).size_bytes);
    }
}

TEST(BuildLayout, KeysFollowNamingScheme) {
    const RankLayout layout = build_layout(make_model(2, 2, 10, {30}), make_parallel(2, 2), make_cluster(1, 2));
    EXPECT_EQ(layout.unit(layout.expert_weight_unit(1, 0)).key, "ew.L1.E0");
    EXPECT_EQ(layout.unit(layout.expert_optim_unit(0, 1)).key, "eo.L0.E1");
    EXPECT_EQ(layout.unit(layout.non_expert_unit(0)).key, "new.m0");
    EXPECT_EQ(layout.unit(layout.optim_shard_unit(1)).key, "neo.r1");
}

namespace {

std::string constraint_of(const ModelSpec& m, const ParallelSpec& p, const ClusterSpec& c) {
    try {
        build_layout(m, p, c);
    } catch (const ValidationError& e) {
        return e.constraint();
    }
    return "";
}

}  // namespace

TEST(BuildLayout, RejectsInvalidSpecsByName) {
    const ModelSpec m = make_model(1, 4, 10, {30});
    EXPECT_EQ(constraint_of(m, make_parallel(3, 2), make_cluster(1, 3)), "parallel.dp_mod_ep");
    EXPECT_EQ(constraint_of(m, make_parallel(3, 3), make_cluster(1, 3)), "parallel.experts_mod_ep");
    EXPECT_EQ(constraint_of(m, make_parallel(4, 2), make_cluster(1, 3)), "cluster.gpu_count");
    ModelSpec bad = m;
    bad.top_k = 5;
    EXPECT_EQ(constraint_of(bad, make_parallel(2, 2), make_cluster(1, 2)), "model.top_k");
    bad = m;
    bad.non_expert_params = 31;
    EXPECT_EQ(constraint_of(bad, make_parallel(2, 2), make_cluster(1, 2)), "model.non_expert_modules_sum");
}
