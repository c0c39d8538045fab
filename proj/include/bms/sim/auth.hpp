#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <unordered_map>

#include "bms/types.hpp"

namespace bms::sim {

using Tag = std::uint64_t;

class Authenticator;

// Capability to sign as one identity. Only the Authenticator mints keys, so
// code that never received a node's key cannot produce its tags.
class SigningKey {
  public:
    NodeId node() const { return node_; }

  private:
    friend class Authenticator;
    SigningKey(NodeId node, std::uint64_t secret) : node_(node), secret_(secret) {}

    NodeId node_;
    std::uint64_t secret_;
};

// Simulated unforgeable signatures: keyed tags over the message bytes.
class Authenticator {
  public:
    explicit Authenticator(std::uint64_t seed) : rng_(seed) {}

    // Throws std::invalid_argument if the node is already enrolled.
    SigningKey enroll(NodeId node);
    bool enrolled(NodeId node) const { return secrets_.contains(node); }

    Tag sign(const SigningKey& key, std::span<const std::uint8_t> bytes) const;
    // Throws std::invalid_argument for a node that was never enrolled.
    bool verify(NodeId node, std::span<const std::uint8_t> bytes, Tag tag) const;

  private:
    static Tag compute(std::uint64_t secret, NodeId node, std::span<const std::uint8_t> bytes);

    std::mt19937_64 rng_;
    std::unordered_map<NodeId, std::uint64_t> secrets_;
};

}  // namespace bms::sim
