#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "bms/sim/simulator.hpp"
#include "bms/types.hpp"

namespace bms {

// Sender id used for entries the service itself appends.
inline constexpr NodeId kTobSystem{0xffffffffu};

struct TobEntry {
    std::uint64_t seq = 0;
    NodeId sender;
    Bytes payload;
    SimTime broadcast_at = 0.0;
    SimTime delivered_at = 0.0;
};

struct TobParams {
    SimTime latency = 0.95;
    // Time-driven checkpoint markers; 0 disables them.
    SimTime checkpoint_interval = 20.0;
    // Marker after this many non-marker entries; 0 disables.
    std::size_t checkpoint_every = 0;
};

// Idealized total-order broadcast. Every subscriber sees the same log in the
// same order; payloads are suppressed when identical bytes were already broadcast.
class TotalOrderBroadcast {
  public:
    using Deliver = std::function<void(const TobEntry&)>;

    TotalOrderBroadcast(sim::Simulator& sim, TobParams params);

    void start();

    // Returns false when the payload is a duplicate.
    bool broadcast(NodeId sender, Bytes payload);

    // Replays entries [from, size) synchronously, then delivers live entries.
    void subscribe(NodeId node, std::uint64_t from, Deliver deliver);
    void unsubscribe(NodeId node) { subscribers_.erase(node); }
    bool subscribed(NodeId node) const { return subscribers_.contains(node); }

    const std::vector<TobEntry>& log() const { return log_; }
    std::uint64_t size() const { return log_.size(); }
    const TobParams& params() const { return params_; }

  private:
    void append(NodeId sender, Bytes payload, SimTime broadcast_at);
    void schedule_marker(SimTime at);
    void append_marker();

    sim::Simulator& sim_;
    TobParams params_;
    std::vector<TobEntry> log_;
    std::set<Bytes> seen_;
    std::map<NodeId, Deliver> subscribers_;
    std::uint64_t markers_ = 0;
    std::size_t since_marker_ = 0;
    bool started_ = false;
};

}  // namespace bms
