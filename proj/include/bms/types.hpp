#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bms {

using SimTime = double;
using Amount = std::int64_t;
using Gas = std::int64_t;
using Bytes = std::vector<std::uint8_t>;

struct NodeId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const NodeId&) const = default;
};

std::string to_string(NodeId id);

// Raised when a run breaks one of the protocol's safety invariants.
class InvariantViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

}  // namespace bms

template <>
struct std::hash<bms::NodeId> {
    std::size_t operator()(bms::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
