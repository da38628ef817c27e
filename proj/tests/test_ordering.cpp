#include <gtest/gtest.h>

#include <map>

#include "support.hpp"

using namespace popsynth;
using namespace popsynth::testing;

namespace {
using Perm = std::vector<std::size_t>;
constexpr std::size_t A = 0, B = 1, C = 2, D = 3;
}  // namespace

TEST(TopologicalOrder, ChainIsForced) {
    Dag dag(3, 1);
    dag.add_edge(A, B);
    dag.add_edge(B, C);
    for (auto policy : {TraversalPolicy::Randomized, TraversalPolicy::Deterministic})
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            EXPECT_EQ(sample_topological_order(dag, policy, seed).permutation, (Perm{A, B, C}));
}

TEST(TopologicalOrder, StarBranchesAreBalanced) {
    Dag dag(3, 1);
    dag.add_edge(A, B);
    dag.add_edge(A, C);
    std::map<Perm, int> freq;
    for (std::uint64_t seed = 0; seed < 1000; ++seed)
        ++freq[sample_topological_order(dag, TraversalPolicy::Randomized, seed).permutation];
    ASSERT_EQ(freq.size(), 2u);
    EXPECT_GE(freq[(Perm{A, B, C})], 400);
    EXPECT_GE(freq[(Perm{A, C, B})], 400);
}

TEST(TopologicalOrder, DisconnectedChainsStayContiguous) {
    Dag dag(4, 1);
    dag.add_edge(A, B);
    dag.add_edge(C, D);
    std::map<Perm, int> freq;
    for (std::uint64_t seed = 0; seed < 500; ++seed)
        ++freq[sample_topological_order(dag, TraversalPolicy::Randomized, seed).permutation];
    ASSERT_EQ(freq.size(), 2u);
    EXPECT_GT(freq[(Perm{A, B, C, D})], 0);
    EXPECT_GT(freq[(Perm{C, D, A, B})], 0);
}

TEST(TopologicalOrder, DeterministicPrefersLongestChain) {
    // 3 -> 4 -> 5 -> 0 is the longest chain; 1 -> 2 is shorter; 6 isolated
    Dag dag(7, 1);
    dag.add_edge(3, 4);
    dag.add_edge(4, 5);
    dag.add_edge(5, 0);
    dag.add_edge(1, 2);
    const auto o = sample_topological_order(dag, TraversalPolicy::Deterministic, 123);
    EXPECT_EQ(o.permutation, (Perm{3, 4, 5, 0, 1, 2, 6}));
    EXPECT_EQ(o, sample_topological_order(dag, TraversalPolicy::Deterministic, 456));
}

TEST(TopologicalOrder, DeterministicTakesLowestChildAndAppendsLeftovers) {
    // 0 -> {1, 2}, 1 -> 3: path 0,1,3 then leftover 2
    Dag dag(4, 1);
    dag.add_edge(0, 2);
    dag.add_edge(0, 1);
    dag.add_edge(1, 3);
    EXPECT_EQ(sample_topological_order(dag, TraversalPolicy::Deterministic, 0).permutation, (Perm{0, 1, 3, 2}));
}

TEST(TopologicalOrder, MultiParentNodeWaitsForAllParents) {
    // 0 -> 2 <- 1: the path from 0 cannot enter 2 before 1 is placed
    Dag dag(3, 2);
    dag.add_edge(0, 2);
    dag.add_edge(1, 2);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto o = sample_topological_order(dag, TraversalPolicy::Randomized, seed);
        EXPECT_EQ(o[2], 2u);
    }
}

TEST(TopologicalOrder, EveryOrderRespectsEdges) {
    Rng rng(2024);
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto d = 2 + uniform_index(rng, 14);
        const auto cap = 1 + uniform_index(rng, 3);
        const auto dag = random_dag(d, uniform01(rng), cap, rng);
        for (auto policy : {TraversalPolicy::Randomized, TraversalPolicy::Deterministic}) {
            const auto o = sample_topological_order(dag, policy, rng());
            if (!respects_dag(o, dag)) ++violations;
        }
    }
    EXPECT_EQ(violations, 0u);
}

TEST(Dag, RejectsCyclesSelfLoopsAndCapOverflow) {
    Dag dag(3, 1);
    dag.add_edge(0, 1);
    dag.add_edge(1, 2);
    EXPECT_THROW(dag.add_edge(2, 0), CyclicGraph);
    EXPECT_THROW(dag.add_edge(1, 1), CyclicGraph);
    EXPECT_THROW(dag.add_edge(0, 2), Error);  // 2 already has a parent
    EXPECT_FALSE(dag.can_add_edge(2, 0));
    EXPECT_EQ(dag.topological_order(), (Perm{0, 1, 2}));
}

TEST(Ordering, PermutationChecks) {
    Dag dag(3);
    dag.add_edge(2, 0);
    EXPECT_TRUE(respects_dag(Ordering{{2, 0, 1}}, dag));
    EXPECT_FALSE(respects_dag(Ordering{{0, 2, 1}}, dag));
    EXPECT_FALSE(is_permutation_of(Ordering{{0, 0, 1}}, 3));
    EXPECT_FALSE(is_permutation_of(Ordering{{0, 1}}, 3));
}
