// SPDX-License-Identifier: Apache-2.0
#include "stbem/grouping.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "stbem/errors.hpp"

namespace stbem {

std::vector<int> GroupPlan::sizes() const {
    std::vector<int> out;
    for (const auto& g : groups) out.push_back(static_cast<int>(g.size()));
    return out;
}

int GroupPlan::group_of(int user) const {
    for (int g = 0; g < count(); ++g)
        if (std::find(groups[g].begin(), groups[g].end(), user) != groups[g].end()) return g;
    return -1;
}

bool intersects(const SsiSet& a, const SsiSet& b) {
    const SsiSet& small = a.size() <= b.size() ? a : b;
    const SsiSet& large = a.size() <= b.size() ? b : a;
    for (int bin : small.bins())
        if (large.contains(bin)) return true;
    return false;
}

int circular_distance(const SsiSet& a, const SsiSet& b) {
    if (a.modulus() != b.modulus()) throw Error(ErrorKind::dimension_mismatch, "SSI sets on different circles");
    if (intersects(a, b)) return 0;
    const int M = a.modulus();
    const int forward = wrap_index(static_cast<long long>(b.lo()) - a.hi() - 1, M);
    const int backward = wrap_index(static_cast<long long>(a.lo()) - b.hi() - 1, M);
    return std::min(forward, backward);
}

namespace {

bool compatible(const SsiSet& a, const SsiSet& b, int guard) {
    return !intersects(a, b) && circular_distance(a, b) >= guard;
}

}  // namespace

GroupPlan group_users(std::span<const SsiSet> ssis, const GroupingConfig& cfg) {
    if (cfg.guard < 0) throw Error(ErrorKind::config, "guard must be non-negative");
    std::vector<int> order(ssis.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return ssis[x].center() < ssis[y].center(); });

    GroupPlan plan;
    for (int user : order) {
        bool placed = false;
        for (auto& group : plan.groups) {
            const bool fits = std::all_of(group.begin(), group.end(), [&](int other) {
                return compatible(ssis[user], ssis[other], cfg.guard);
            });
            if (fits) {
                group.push_back(user);
                placed = true;
                break;
            }
        }
        if (placed) continue;
        if (cfg.max_groups && plan.count() >= *cfg.max_groups)
            throw Error(ErrorKind::group_overflow,
                        "user " + std::to_string(user) + " does not fit in " + std::to_string(*cfg.max_groups) +
                            " groups");
        plan.groups.push_back({user});
    }
    return plan;
}

std::vector<std::pair<int, int>> grouping_violations(const GroupPlan& plan, std::span<const SsiSet> ssis,
                                                     int guard) {
    std::vector<std::pair<int, int>> out;
    for (const auto& group : plan.groups)
        for (std::size_t i = 0; i < group.size(); ++i)
            for (std::size_t j = i + 1; j < group.size(); ++j)
                if (!compatible(ssis[group[i]], ssis[group[j]], guard)) out.emplace_back(group[i], group[j]);
    return out;
}

}  // namespace stbem
