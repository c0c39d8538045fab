#include "bms/membership.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>

#include <fmt/format.h>

namespace bms {

std::string to_string(NodeId id) { return fmt::format("n{}", id.value); }

Configuration Configuration::make(std::uint64_t number, std::vector<NodeId> members) {
    if (members.empty()) {
        throw std::invalid_argument("configuration must have at least one member");
    }
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end()) {
        throw std::invalid_argument("configuration members must be distinct");
    }
    Configuration c;
    c.number = number;
    c.members = std::move(members);
    c.v = vote_threshold(c.members.size());
    return c;
}

bool Configuration::contains(NodeId id) const { return std::binary_search(members.begin(), members.end(), id); }

std::string to_string(const Configuration& c) {
    std::string out = fmt::format("C{}{{", c.number);
    for (std::size_t i = 0; i < c.members.size(); ++i) {
        if (i != 0) out += ',';
        out += to_string(c.members[i]);
    }
    out += fmt::format("}}/v={}", c.v);
    return out;
}

std::string to_string(const Policy& p) {
    switch (p.kind) {
        case PolicyKind::Every:
            return "t1";
        case PolicyKind::HalfF:
            return "halff";
        case PolicyKind::Fixed:
            return fmt::format("fixed{}", p.fixed_t);
    }
    return "?";
}

std::size_t max_faults(std::size_t n) {
    if (n == 0) throw std::invalid_argument("max_faults: empty configuration");
    return (n - 1) / 3;
}

std::size_t max_faults(const Configuration& c) { return max_faults(c.members.size()); }

std::size_t vote_threshold(std::size_t n) { return max_faults(n) + 1; }

std::size_t vote_threshold(const Configuration& c) { return vote_threshold(c.members.size()); }

std::size_t symmetric_difference(std::span<const NodeId> a, std::span<const NodeId> b) {
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return (a.size() - common) + (b.size() - common);
}

std::size_t symmetric_difference(const Configuration& a, const Configuration& b) {
    return symmetric_difference(std::span<const NodeId>(a.members), std::span<const NodeId>(b.members));
}

bool overlap_ok(const Configuration& published, const Configuration& local) {
    const std::size_t fp = max_faults(published);
    const std::size_t fl = max_faults(local);
    std::vector<NodeId> common;
    std::set_intersection(published.members.begin(), published.members.end(), local.members.begin(),
                          local.members.end(), std::back_inserter(common));
    return common.size() >= fp + fl + 1;
}

std::size_t max_batch_threshold(std::size_t n) {
    const std::size_t f = max_faults(n);
    return (3 * f) / 2 + 1 + ((n - 1) % 3);
}

std::size_t max_batch_threshold(const Configuration& published) { return max_batch_threshold(published.size()); }

std::size_t max_correct_leavers(std::size_t n) { return n - (2 * max_faults(n) + 1); }

std::size_t max_correct_leavers(const Configuration& published) { return max_correct_leavers(published.size()); }

std::size_t policy_threshold(const Policy& policy, const Configuration& current) {
    return policy_threshold(policy, current.size());
}

std::size_t policy_threshold(const Policy& policy, std::size_t n) {
    const std::size_t f = max_faults(n);
    switch (policy.kind) {
        case PolicyKind::Every:
            return 1;
        case PolicyKind::HalfF:
            return std::max<std::size_t>(1, f / 2);
        case PolicyKind::Fixed:
            return std::max<std::size_t>(1, policy.fixed_t);
    }
    return 1;
}

}  // namespace bms
