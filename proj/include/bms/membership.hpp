#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "bms/types.hpp"

namespace bms {

// A numbered member set. Members are kept sorted and duplicate-free.
struct Configuration {
    std::uint64_t number = 0;
    std::vector<NodeId> members;
    // Votes needed at the membership service to replace this configuration.
    std::size_t v = 0;

    // Builds a configuration with v = max_faults + 1. Throws on empty or duplicated members.
    static Configuration make(std::uint64_t number, std::vector<NodeId> members);

    bool contains(NodeId id) const;
    std::size_t size() const { return members.size(); }

    auto operator<=>(const Configuration&) const = default;
};

std::string to_string(const Configuration& c);

enum class PolicyKind { Every, HalfF, Fixed };

// Batching threshold policy. Fixed is used only by crafted scenarios that
// deliberately exceed the publishable bound.
struct Policy {
    PolicyKind kind = PolicyKind::Every;
    std::size_t fixed_t = 1;

    static Policy every() { return {PolicyKind::Every, 1}; }
    static Policy half_f() { return {PolicyKind::HalfF, 1}; }
    static Policy fixed(std::size_t t) { return {PolicyKind::Fixed, t}; }

    bool operator==(const Policy&) const = default;
};

std::string to_string(const Policy& p);

// Number of tolerated Byzantine members, floor((n - 1) / 3).
std::size_t max_faults(std::size_t n);
std::size_t max_faults(const Configuration& c);

std::size_t vote_threshold(std::size_t n);
std::size_t vote_threshold(const Configuration& c);

// |pub ∩ local| >= f(pub) + f(local) + 1
bool overlap_ok(const Configuration& published, const Configuration& local);

// floor(3/2 f) + 1 + ((n - 1) mod 3)
std::size_t max_batch_threshold(std::size_t n);
std::size_t max_batch_threshold(const Configuration& published);

// n - (2 f + 1)
std::size_t max_correct_leavers(std::size_t n);
std::size_t max_correct_leavers(const Configuration& published);

std::size_t symmetric_difference(const Configuration& a, const Configuration& b);
std::size_t symmetric_difference(std::span<const NodeId> a, std::span<const NodeId> b);

std::size_t policy_threshold(const Policy& policy, const Configuration& current);
std::size_t policy_threshold(const Policy& policy, std::size_t n);

}  // namespace bms
