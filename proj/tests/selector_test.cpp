#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "moc/selector.hpp"
#include "moc/topology.hpp"

using namespace moc;
using V = std::vector<std::uint32_t>;

TEST(SelectSequential, FirstTwoCheckpointsOfThreeExpertExample) {
    V c0, c1;
    for (std::uint32_t m = 0; m < 4; ++m) {
        c0.push_back(select_sequential(0, m, 3, 1).at(0));
        c1.push_back(select_sequential(1, m, 3, 1).at(0));
    }
    EXPECT_EQ(c0, (V{0, 1, 2, 0}));
    EXPECT_EQ(c1, (V{1, 2, 0, 1}));
}

TEST(SelectSequential, FullKSelectsEverything) {
    for (std::uint64_t c = 0; c < 5; ++c) {
        for (std::uint32_t m = 0; m < 3; ++m) EXPECT_EQ(select_sequential(c, m, 6, 6), (V{0, 1, 2, 3, 4, 5}));
    }
}

TEST(SelectSequential, WindowIsContiguousAcrossLayers) {
    // layer m starts K after layer m-1: (m + c)K
    EXPECT_EQ(select_sequential(0, 0, 8, 2), (V{0, 1}));
    EXPECT_EQ(select_sequential(0, 1, 8, 2), (V{2, 3}));
    EXPECT_EQ(select_sequential(1, 0, 8, 2), (V{2, 3}));
    EXPECT_EQ(select_sequential(3, 1, 8, 2), (V{0, 1}));
}

TEST(SelectSequential, SizeIsKAndCoversEveryExpertOncePerPeriod) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::uint32_t n = 1 + rng() % 64;
        std::vector<std::uint32_t> divisors;
        for (std::uint32_t d = 1; d <= n; ++d) {
            if (n % d == 0) divisors.push_back(d);
        }
        const std::uint32_t k = divisors[rng() % divisors.size()];
        const std::uint32_t layer = rng() % 5;
        const std::uint64_t c0 = rng() % 100;
        std::vector<int> count(n, 0);
        for (std::uint64_t c = c0; c < c0 + n / k; ++c) {
            const V s = select_sequential(c, layer, n, k);
            ASSERT_EQ(s.size(), k);
            for (auto e : s) ++count[e];
        }
        for (int x : count) EXPECT_EQ(x, 1);
    }
}

TEST(SelectSequential, NonDividingKStillCoversWithinCeilPeriod) {
    for (std::uint32_t n = 2; n <= 20; ++n) {
        for (std::uint32_t k = 1; k < n; ++k) {
            const std::uint32_t period = (n + k - 1) / k;
            for (std::uint64_t c0 = 0; c0 < 7; ++c0) {
                std::set<std::uint32_t> seen;
                for (std::uint64_t c = c0; c < c0 + period; ++c) {
                    for (auto e : select_sequential(c, 1, n, k)) seen.insert(e);
                }
                EXPECT_EQ(seen.size(), n) << "n=" << n << " k=" << k;
            }
        }
    }
}

TEST(SelectSequential, RankInterleavingKeepsPerRankCountsWithinOne) {
    // strided expert placement: ep_rank = e mod D_ep
    for (std::uint32_t ep : {1u, 2u, 3u, 4u}) {
        for (std::uint32_t n : {ep, 2 * ep, 4 * ep}) {
            for (std::uint32_t k = 1; k <= n; ++k) {
                for (std::uint32_t layers = 1; layers <= 4; ++layers) {
                    for (std::uint64_t c = 0; c < 6; ++c) {
                        std::vector<std::uint32_t> count(ep, 0);
                        for (std::uint32_t m = 0; m < layers; ++m) {
                            for (auto e : select_sequential(c, m, n, k)) ++count[e % ep];
                        }
                        const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
                        const std::uint32_t total = k * layers;
                        const std::uint32_t bound = (total + ep - 1) / ep - total / ep;
                        EXPECT_LE(*hi - *lo, bound) << "ep=" << ep << " n=" << n << " k=" << k;
                    }
                }
            }
        }
    }
}

TEST(SequentialSchedule, PersistNestedInSnapshot) {
    const SequentialSchedule s(16, 3, 4, 1);
    for (std::uint64_t c = 0; c < 40; ++c) {
        for (std::uint32_t m = 0; m < 3; ++m) {
            const V snap = s.selected(c, m);
            const V pers = s.persisted(c, m);
            EXPECT_EQ(snap.size(), 4u);
            EXPECT_EQ(pers.size(), 1u);
            EXPECT_TRUE(std::includes(snap.begin(), snap.end(), pers.begin(), pers.end()));
            EXPECT_EQ(pers, select_sequential(c, m, 16, 1));
        }
    }
    EXPECT_EQ(s.coverage_period(), 16u);
    EXPECT_EQ(s.repeat_period(), 16u);
}

TEST(SequentialSchedule, RepeatPeriodIsExact) {
    for (std::uint32_t n = 1; n <= 12; ++n) {
        for (std::uint32_t kp = 1; kp <= n; ++kp) {
            const SequentialSchedule s(n, 2, n, kp);
            const std::uint32_t p = s.repeat_period();
            EXPECT_EQ(p, n / std::gcd(n, kp));
            EXPECT_EQ(s.coverage_period(), (n + kp - 1) / kp);
            for (std::uint64_t c = 0; c < 2 * p; ++c) {
                EXPECT_EQ(s.persist_selection(c), s.persist_selection(c + p));
            }
            for (std::uint32_t q = 1; q < p; ++q) {
                bool same = true;
                for (std::uint64_t c = 0; c < p && same; ++c) same = s.persist_selection(c) == s.persist_selection(c + q);
                EXPECT_FALSE(same) << "n=" << n << " kp=" << kp << " q=" << q;
            }
        }
    }
}

TEST(SelectLoadAware, TopKWithLowIndexTies) {
    const std::vector<std::uint64_t> counters{10, 40, 40, 5};
    EXPECT_EQ(select_load_aware(counters, 2), (V{1, 2}));
    const std::vector<std::uint64_t> flat{7, 7, 7, 7};
    EXPECT_EQ(select_load_aware(flat, 1), (V{0}));
}

TEST(SelectLoadAware, SavedExpertNotPickedAgainWhileOthersHaveTokens) {
    LoadCounters counters(1, 4);
    counters.at(0, 0) = 3;
    counters.at(0, 1) = 9;
    counters.at(0, 2) = 1;
    counters.at(0, 3) = 2;
    const V first = select_load_aware(counters, 0, 1);
    ASSERT_EQ(first, V{1});
    counters.at(0, 1) = 0;
    EXPECT_EQ(select_load_aware(counters, 0, 1), V{0});
}

TEST(SelectLoadAware, MatchesBruteForce) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const std::uint32_t n = 1 + rng() % 10;
        const std::uint32_t k = 1 + rng() % n;
        std::vector<std::uint64_t> c(n);
        for (auto& x : c) x = rng() % 4;
        // brute force: best subset by (sum desc, then lexicographically smallest)
        V best;
        std::vector<std::uint64_t> best_key;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::uint32_t>(__builtin_popcount(mask)) != k) continue;
            V sel;
            std::vector<std::uint64_t> key;
            for (std::uint32_t e = 0; e < n; ++e) {
                if (mask >> e & 1) {
                    sel.push_back(e);
                    key.push_back(c[e]);
                }
            }
            std::sort(key.rbegin(), key.rend());
            if (best.empty() || key > best_key || (key == best_key && sel < best)) {
                best = sel;
                best_key = key;
            }
        }
        EXPECT_EQ(select_load_aware(c, k), best);
        // never a zero while a positive is left out
        const V got = select_load_aware(c, k);
        bool has_zero = false, left_positive = false;
        for (std::uint32_t e = 0; e < n; ++e) {
            const bool in = std::binary_search(got.begin(), got.end(), e);
            if (in && c[e] == 0) has_zero = true;
            if (!in && c[e] > 0) left_positive = true;
        }
        EXPECT_FALSE(has_zero && left_positive);
    }
}

TEST(DynamicK, DoublesWhenSliceExceeded) {
    DynamicKState s = DynamicKState::start(1, 16);
    EXPECT_DOUBLE_EQ(s.budget_slice(), 0.0375 / 2);
    s = dynamic_k_step(s, 0.01);
    EXPECT_EQ(s.current_k, 1u);
    s = dynamic_k_step(s, 0.01);
    EXPECT_EQ(s.current_k, 2u);
    EXPECT_DOUBLE_EQ(s.cumulative_plt, 0.02);
    EXPECT_DOUBLE_EQ(s.budget_slice(), 0.0375 / 4);
}

TEST(DynamicK, CapStaysAtN) {
    DynamicKState s = DynamicKState::start(4, 4);
    for (int i = 0; i < 10; ++i) s = dynamic_k_step(s, 0.5);
    EXPECT_EQ(s.current_k, 4u);
    EXPECT_DOUBLE_EQ(s.cumulative_plt, 5.0);
}

TEST(DynamicK, TraceDoublesAndIsCappedAtN) {
    DynamicKState s = DynamicKState::start(1, 6);
    std::vector<std::uint32_t> trace{s.current_k};
    for (int i = 0; i < 10; ++i) {
        s = dynamic_k_step(s, 0.03);
        trace.push_back(s.current_k);
    }
    EXPECT_EQ(trace.front(), 1u);
    EXPECT_EQ(trace.back(), 6u);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        EXPECT_TRUE(trace[i] == trace[i - 1] || trace[i] == std::min(2 * trace[i - 1], 6u));
    }
}

TEST(DynamicK, SlicesSumBelowThreshold) {
    DynamicKState s = DynamicKState::start(1, 1024);
    double total = 0;
    while (!s.at_cap()) {
        total += s.budget_slice();
        s.current_k *= 2;
    }
    EXPECT_LT(total, s.threshold);
}

TEST(DynamicK, RejectsNegativePlt) {
    EXPECT_THROW(dynamic_k_step(DynamicKState::start(1, 4), -0.1), std::exception);
}
