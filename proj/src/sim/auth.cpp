#include "bms/sim/auth.hpp"

#include <stdexcept>

#include "bms/codec.hpp"

namespace bms::sim {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

SigningKey Authenticator::enroll(NodeId node) {
    if (secrets_.contains(node)) throw std::invalid_argument("node already enrolled: " + to_string(node));
    const std::uint64_t secret = rng_() | 1;
    secrets_.emplace(node, secret);
    return SigningKey(node, secret);
}

Tag Authenticator::compute(std::uint64_t secret, NodeId node, std::span<const std::uint8_t> bytes) {
    return mix(secret ^ mix(fnv1a64(bytes) ^ (static_cast<std::uint64_t>(node.value) << 1)));
}

Tag Authenticator::sign(const SigningKey& key, std::span<const std::uint8_t> bytes) const {
    auto it = secrets_.find(key.node_);
    if (it == secrets_.end() || it->second != key.secret_) {
        throw std::invalid_argument("signing key not issued by this authenticator: " + to_string(key.node_));
    }
    return compute(key.secret_, key.node_, bytes);
}

bool Authenticator::verify(NodeId node, std::span<const std::uint8_t> bytes, Tag tag) const {
    auto it = secrets_.find(node);
    if (it == secrets_.end()) throw std::invalid_argument("unknown node: " + to_string(node));
    return compute(it->second, node, bytes) == tag;
}

}  // namespace bms::sim
