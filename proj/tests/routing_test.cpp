#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "moc/routing.hpp"
#include "test_support.hpp"

using namespace moc;
using moc::testing::make_model;

TEST(RouteTokens, UniformSplitsEvenly) {
    const ModelSpec m = make_model(2, 4, 10, {30}, 1);
    const RoutedTokens r = route_tokens(0, RoutingConfig{}, m, 100, std::nullopt, 1);
    EXPECT_EQ(r.delivered, std::vector<std::uint64_t>(8, 25));
    EXPECT_EQ(r.dropped, std::vector<std::uint64_t>(8, 0));
}

TEST(RouteTokens, UniformRemainderRotatesWithIteration) {
    const ModelSpec m = make_model(1, 4, 10, {30}, 2);
    const RoutedTokens r0 = route_tokens(0, RoutingConfig{}, m, 3, std::nullopt, 1);  // 6 assignments
    EXPECT_EQ(r0.delivered, (std::vector<std::uint64_t>{2, 2, 1, 1}));
    const RoutedTokens r3 = route_tokens(3, RoutingConfig{}, m, 3, std::nullopt, 1);
    EXPECT_EQ(r3.delivered, (std::vector<std::uint64_t>{2, 1, 1, 2}));
}

TEST(RouteTokens, UniformUnderUnitCapacityDropsNothing) {
    const ModelSpec m = make_model(1, 4, 10, {30}, 2);
    const RoutedTokens r = route_tokens(5, RoutingConfig{}, m, 100, 1.0, 1);
    EXPECT_EQ(std::accumulate(r.dropped.begin(), r.dropped.end(), std::uint64_t{0}), 0u);
    EXPECT_EQ(expert_capacity(1.0, 2, 100, 4), 50u);
    EXPECT_EQ(expert_capacity(1.1, 1, 10, 3), 4u);
}

TEST(RouteTokens, CapacityCapsAndCountsDrops) {
    const ModelSpec m = make_model(1, 2, 10, {30}, 1);
    RoutingConfig cfg;
    cfg.kind = RoutingKind::Scripted;
    cfg.counts = {{9, 1}};
    const RoutedTokens r = route_tokens(0, cfg, m, 10, 1.0, 1);
    EXPECT_EQ(r.delivered, (std::vector<std::uint64_t>{5, 1}));
    EXPECT_EQ(r.dropped, (std::vector<std::uint64_t>{4, 0}));
}

TEST(RouteTokens, ZipfMatchesIndependentCategoricalSampler) {
    const ModelSpec m = make_model(2, 4, 10, {30}, 2);
    RoutingConfig cfg;
    cfg.kind = RoutingKind::Zipf;
    cfg.zipf_s = 1.0;
    const std::uint64_t seed = 0x1234'5678'9abcULL, iteration = 17;
    const RoutedTokens r = route_tokens(iteration, cfg, m, 50, std::nullopt, seed);

    // oracle: inverse-CDF sampling with the same seeding, written out directly
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32)};
    std::mt19937_64 rng(seq);
    const double w[4] = {1.0, 0.5, 1.0 / 3, 0.25};
    const double total = w[0] + w[1] + w[2] + w[3];
    std::vector<std::uint64_t> want(8, 0);
    for (int l = 0; l < 2; ++l) {
        for (int a = 0; a < 100; ++a) {
            const double u = static_cast<double>(rng() >> 11) / 9007199254740992.0 * total;
            double acc = 0;
            int e = 0;
            for (; e < 3; ++e) {
                acc += w[e];
                if (u < acc) break;
            }
            ++want[l * 4 + e];
        }
    }
    EXPECT_EQ(r.delivered, want);
    EXPECT_EQ(r.delivered, route_tokens(iteration, cfg, m, 50, std::nullopt, seed).delivered);
    EXPECT_NE(r.delivered, route_tokens(iteration + 1, cfg, m, 50, std::nullopt, seed).delivered);
}

TEST(RouteTokens, ZipfSkewsTowardLowIndices) {
    const ModelSpec m = make_model(1, 8, 10, {30}, 1);
    RoutingConfig cfg;
    cfg.kind = RoutingKind::Zipf;
    cfg.zipf_s = 1.2;
    const RoutedTokens r = route_tokens(0, cfg, m, 20000, std::nullopt, 3);
    EXPECT_EQ(std::accumulate(r.delivered.begin(), r.delivered.end(), std::uint64_t{0}), 20000u);
    EXPECT_GT(r.delivered[0], r.delivered[7] * 5);
}

TEST(RouteTokens, ScriptedRepeatsEveryIteration) {
    const ModelSpec m = make_model(2, 2, 10, {30}, 1);
    RoutingConfig cfg;
    cfg.kind = RoutingKind::Scripted;
    cfg.counts = {{3, 4}, {5, 6}};
    EXPECT_EQ(route_tokens(0, cfg, m, 7, std::nullopt, 0).delivered, (std::vector<std::uint64_t>{3, 4, 5, 6}));
    EXPECT_EQ(route_tokens(9, cfg, m, 7, std::nullopt, 0).delivered, (std::vector<std::uint64_t>{3, 4, 5, 6}));
}
