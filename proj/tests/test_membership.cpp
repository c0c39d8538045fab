#include <gtest/gtest.h>

#include <random>

#include "bms/membership.hpp"
#include "support/oracles.hpp"

using namespace bms;

namespace {

Configuration cfg(std::uint64_t number, std::initializer_list<std::uint32_t> ids) {
    std::vector<NodeId> v;
    for (auto i : ids) v.push_back(NodeId{i});
    return Configuration::make(number, v);
}

Configuration range(std::uint64_t number, std::uint32_t from, std::uint32_t to) {
    std::vector<NodeId> v;
    for (auto i = from; i < to; ++i) v.push_back(NodeId{i});
    return Configuration::make(number, v);
}

}  // namespace

TEST(Membership, FaultsAndVotes) {
    EXPECT_EQ(max_faults(4), 1u);
    EXPECT_EQ(vote_threshold(4), 2u);
    EXPECT_EQ(max_faults(7), 2u);
    EXPECT_EQ(vote_threshold(7), 3u);
    EXPECT_EQ(max_faults(100), 33u);
    EXPECT_EQ(vote_threshold(100), 34u);
    EXPECT_EQ(max_faults(1), 0u);
    EXPECT_EQ(vote_threshold(1), 1u);
}

TEST(Membership, MakeSortsAndRejectsBadSets) {
    auto c = Configuration::make(3, {NodeId{5}, NodeId{1}, NodeId{3}});
    ASSERT_EQ(c.members.size(), 3u);
    EXPECT_EQ(c.members.front(), NodeId{1});
    EXPECT_EQ(c.v, 1u);
    EXPECT_THROW(Configuration::make(0, {}), std::invalid_argument);
    EXPECT_THROW(Configuration::make(0, {NodeId{1}, NodeId{1}}), std::invalid_argument);
}

TEST(Membership, BatchThresholdExamples) {
    EXPECT_EQ(max_batch_threshold(4), 2u);
    EXPECT_EQ(max_batch_threshold(5), 3u);
    EXPECT_EQ(max_batch_threshold(6), 4u);
    EXPECT_EQ(max_batch_threshold(7), 4u);
    EXPECT_EQ(max_batch_threshold(100), 50u);
}

TEST(Membership, BatchThresholdIsHalfForTightSizes) {
    for (std::size_t f = 1; f <= 33; ++f) {
        const std::size_t n = 3 * f + 1;
        EXPECT_EQ(max_batch_threshold(n), (n + 1) / 2) << n;
    }
}

TEST(Membership, BatchThresholdMatchesMemberSetEnumeration) {
    for (std::size_t n = 4; n <= 16; ++n) {
        EXPECT_EQ(max_batch_threshold(n), oracle::batch_by_member_sets(n)) << n;
    }
}

TEST(Membership, BatchThresholdMatchesCountOracle) {
    for (std::size_t n = 4; n <= 100; ++n) {
        EXPECT_EQ(max_batch_threshold(n), oracle::batch_by_counts(n)) << n;
    }
}

TEST(Membership, MaxCorrectLeavers) {
    EXPECT_EQ(max_correct_leavers(4), 1u);
    EXPECT_EQ(max_correct_leavers(5), 2u);
    EXPECT_EQ(max_correct_leavers(7), 2u);
    EXPECT_EQ(max_correct_leavers(100), 33u);
}

TEST(Membership, OverlapExamples) {
    const auto c0 = cfg(0, {0, 1, 2, 3});
    EXPECT_TRUE(overlap_ok(c0, cfg(1, {0, 1, 2, 3, 4})));
    EXPECT_TRUE(overlap_ok(c0, cfg(2, {1, 2, 3, 4, 5})));
    EXPECT_FALSE(overlap_ok(c0, cfg(3, {2, 3, 4, 5, 6})));
    EXPECT_TRUE(overlap_ok(c0, c0));
}

TEST(Membership, SymmetricDifference) {
    EXPECT_EQ(symmetric_difference(cfg(0, {0, 1, 2, 3}), cfg(1, {1, 2, 3, 4})), 2u);
    EXPECT_EQ(symmetric_difference(cfg(0, {0, 1}), cfg(0, {0, 1})), 0u);
    EXPECT_EQ(symmetric_difference(cfg(0, {0}), cfg(0, {1, 2})), 3u);
}

TEST(Membership, PolicyThresholds) {
    EXPECT_EQ(policy_threshold(Policy::every(), range(0, 0, 100)), 1u);
    EXPECT_EQ(policy_threshold(Policy::half_f(), range(0, 0, 4)), 1u);
    EXPECT_EQ(policy_threshold(Policy::half_f(), range(0, 0, 12)), 1u);
    EXPECT_EQ(policy_threshold(Policy::half_f(), range(0, 0, 13)), 2u);
    EXPECT_EQ(policy_threshold(Policy::half_f(), range(0, 0, 100)), 16u);
    EXPECT_EQ(policy_threshold(Policy::fixed(3), range(0, 0, 4)), 3u);
}

// Batching within the bound never breaks overlap, for either policy.
TEST(MembershipProperty, PolicyStaysWithinBatchBound) {
    for (std::size_t n = 1; n <= 300; ++n) {
        EXPECT_LE(policy_threshold(Policy::half_f(), n), std::max<std::size_t>(1, max_batch_threshold(n))) << n;
        if (n >= 2) EXPECT_LE(policy_threshold(Policy::every(), n), max_batch_threshold(n)) << n;
    }
}

TEST(MembershipProperty, RandomChurnWithinBoundKeepsOverlap) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::uint32_t n = std::uniform_int_distribution<std::uint32_t>(4, 40)(rng);
        const auto pub = range(0, 0, n);
        const std::size_t d = max_batch_threshold(pub);
        std::vector<NodeId> local = pub.members;
        std::uint32_t next = 1000;
        const std::size_t steps = std::uniform_int_distribution<std::size_t>(0, d)(rng);
        for (std::size_t s = 0; s < steps; ++s) {
            if (local.size() > 1 && std::bernoulli_distribution(0.5)(rng)) {
                local.erase(local.begin() + std::uniform_int_distribution<std::size_t>(0, local.size() - 1)(rng));
            } else {
                local.push_back(NodeId{next++});
            }
        }
        EXPECT_TRUE(overlap_ok(pub, Configuration::make(1, local))) << n << " after " << steps;
    }
}

TEST(MembershipProperty, FaultBoundBelowThird) {
    for (std::size_t n = 1; n <= 1000; ++n) {
        EXPECT_LT(3 * max_faults(n), n);
        EXPECT_GE(3 * (max_faults(n) + 1), n);
    }
}
