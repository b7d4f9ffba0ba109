// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "stbem/basis.hpp"

namespace stbem {

struct GroupingConfig {
    int guard = 4;
    std::optional<int> max_groups;
};

struct GroupPlan {
    std::vector<std::vector<int>> groups;  // user indices, ascending by SSI center

    int count() const { return static_cast<int>(groups.size()); }
    std::vector<int> sizes() const;
    int group_of(int user) const;  // -1 if absent
};

// Number of bins strictly between the two intervals on the M-circle; 0 when they touch or overlap.
int circular_distance(const SsiSet& a, const SsiSet& b);
bool intersects(const SsiSet& a, const SsiSet& b);

GroupPlan group_users(std::span<const SsiSet> ssis, const GroupingConfig& cfg);

// Intra-group pairs that break disjointness or the guard.
std::vector<std::pair<int, int>> grouping_violations(const GroupPlan& plan, std::span<const SsiSet> ssis,
                                                     int guard);

}  // namespace stbem
