#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <unordered_map>
#include <vector>

#include "bms/sim/auth.hpp"
#include "bms/sim/simulator.hpp"
#include "bms/types.hpp"

namespace bms::sim {

struct NetworkConfig {
    SimTime gst = 0.0;
    // Upper bound on post-GST delivery delay.
    SimTime delta = 0.05;
    // Pre-GST messages whose delivery would fall before GST are dropped with this probability.
    double drop_probability = 0.0;
    SimTime max_delay = 10.0;
    std::uint64_t rng_seed = 0;
};

void validate(const NetworkConfig& config);

struct Envelope {
    NodeId sender;
    NodeId receiver;
    Bytes payload;
    SimTime sent_at = 0.0;
    Tag signature = 0;
};

// Eventually synchronous point-to-point network with authenticated envelopes.
class Network {
  public:
    using Handler = std::function<void(const Envelope&)>;
    using Tap = std::function<void(const Envelope&)>;

    Network(Simulator& sim, const Authenticator& auth, NetworkConfig config);

    void attach(NodeId node, Handler handler);
    void detach(NodeId node);
    bool attached(NodeId node) const { return handlers_.contains(node); }

    // Observes every envelope at send time; models an adversary that sees traffic.
    void add_tap(Tap tap) { taps_.push_back(std::move(tap)); }

    void send(Envelope env);
    void send_signed(const SigningKey& key, NodeId to, Bytes payload);

    const NetworkConfig& config() const { return config_; }
    std::uint64_t sent() const { return sent_; }
    std::uint64_t delivered() const { return delivered_; }
    std::uint64_t dropped() const { return dropped_; }
    std::uint64_t rejected() const { return rejected_; }

  private:
    void deliver(const Envelope& env);

    Simulator& sim_;
    const Authenticator& auth_;
    NetworkConfig config_;
    std::mt19937_64 rng_;
    std::unordered_map<NodeId, Handler> handlers_;
    std::vector<Tap> taps_;
    std::uint64_t sent_ = 0;
    std::uint64_t delivered_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t rejected_ = 0;
};

}  // namespace bms::sim
