// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "stbem/errors.hpp"
#include "stbem/grouping.hpp"

using namespace stbem;

TEST(Grouping, SingleUser) {
    const std::vector<SsiSet> s{SsiSet::centered(128, 40, 9)};
    const GroupPlan p = group_users(s, {});
    EXPECT_EQ(p.count(), 1);
    EXPECT_EQ(p.group_of(0), 0);
    EXPECT_EQ(p.group_of(3), -1);
}

TEST(Grouping, IdenticalSetsSplit) {
    const std::vector<SsiSet> s(2, SsiSet::centered(128, 40, 9));
    EXPECT_EQ(group_users(s, {}).count(), 2);
}

TEST(Grouping, CircularDistanceWrapsAround) {
    const SsiSet a(128, 120, 126, 123), b(128, 2, 5, 3);
    EXPECT_EQ(circular_distance(a, b), 3);
    EXPECT_EQ(circular_distance(b, a), 3);
    EXPECT_EQ(circular_distance(a, a), 0);
    EXPECT_THROW(circular_distance(a, SsiSet(64, 2, 5, 3)), Error);
}

TEST(Grouping, GuardSeparatesOtherwiseDisjointSets) {
    const std::vector<SsiSet> s{SsiSet(128, 10, 14, 12), SsiSet(128, 17, 20, 18)};
    EXPECT_EQ(group_users(s, GroupingConfig{2, std::nullopt}).count(), 1);
    EXPECT_EQ(group_users(s, GroupingConfig{3, std::nullopt}).count(), 2);
    EXPECT_THROW(group_users(s, GroupingConfig{-1, std::nullopt}), Error);
}

TEST(Grouping, OverflowNamesTheUser) {
    const std::vector<SsiSet> s(3, SsiSet::centered(64, 10, 5));
    try {
        group_users(s, GroupingConfig{0, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::group_overflow);
        EXPECT_NE(std::string(e.what()).find("user 2"), std::string::npos);
    }
}

TEST(Grouping, TwelveUsersInFourClustersMakeThreeGroups) {
    std::vector<SsiSet> s;
    for (int c : {8, 40, 72, 104})
        for (int u = 0; u < 3; ++u) s.push_back(SsiSet::centered(128, c + 3 * u, 11));
    const GroupPlan p = group_users(s, {});
    EXPECT_EQ(p.count(), 3);
    EXPECT_EQ(p.sizes(), (std::vector<int>{4, 4, 4}));
}

TEST(Grouping, ShuffledInputsNeverViolateTheConstraints) {
    std::mt19937 gen(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> center(0, 127), size(1, 20), guard(0, 6);
        std::vector<SsiSet> s;
        const int K = 1 + trial % 16;
        for (int k = 0; k < K; ++k) s.push_back(SsiSet::centered(128, center(gen), size(gen)));
        std::shuffle(s.begin(), s.end(), gen);
        const int g = guard(gen);
        const GroupPlan p = group_users(s, GroupingConfig{g, std::nullopt});
        EXPECT_TRUE(grouping_violations(p, s, g).empty());
        std::vector<int> seen;
        for (const auto& grp : p.groups) seen.insert(seen.end(), grp.begin(), grp.end());
        std::sort(seen.begin(), seen.end());
        for (int k = 0; k < K; ++k) EXPECT_EQ(seen[k], k);
        EXPECT_EQ(static_cast<int>(seen.size()), K);
    }
}

TEST(Grouping, ViolationsAreReported) {
    const std::vector<SsiSet> s{SsiSet::centered(64, 10, 5), SsiSet::centered(64, 12, 5)};
    const GroupPlan forced{{{0, 1}}};
    EXPECT_EQ(grouping_violations(forced, s, 0).size(), 1u);
}
