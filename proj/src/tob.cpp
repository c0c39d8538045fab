#include "bms/tob.hpp"

#include <stdexcept>

#include "bms/messages.hpp"

namespace bms {

TotalOrderBroadcast::TotalOrderBroadcast(sim::Simulator& sim, TobParams params) : sim_(sim), params_(params) {
    if (params_.latency < 0.0) throw std::invalid_argument("tob latency must be non-negative");
    if (params_.checkpoint_interval < 0.0) throw std::invalid_argument("checkpoint interval must be non-negative");
    if (params_.checkpoint_interval == 0.0 && params_.checkpoint_every == 0) {
        throw std::invalid_argument("checkpoints need an interval or a request count");
    }
}

void TotalOrderBroadcast::start() {
    if (started_) return;
    started_ = true;
    if (params_.checkpoint_interval > 0.0) schedule_marker(sim_.now() + params_.checkpoint_interval);
}

void TotalOrderBroadcast::schedule_marker(SimTime at) {
    sim_.schedule(at, [this, at] {
        append_marker();
        schedule_marker(at + params_.checkpoint_interval);
    });
}

void TotalOrderBroadcast::append_marker() {
    since_marker_ = 0;
    append(kTobSystem, proto::encode_tob(proto::CheckpointMarker{markers_++}), sim_.now());
}

bool TotalOrderBroadcast::broadcast(NodeId sender, Bytes payload) {
    if (!seen_.insert(payload).second) return false;
    const SimTime at = sim_.now();
    sim_.schedule_after(params_.latency, [this, sender, at, p = std::move(payload)]() mutable {
        append(sender, std::move(p), at);
        if (params_.checkpoint_every > 0 && ++since_marker_ >= params_.checkpoint_every) append_marker();
    });
    return true;
}

void TotalOrderBroadcast::append(NodeId sender, Bytes payload, SimTime broadcast_at) {
    TobEntry e;
    e.seq = log_.size();
    e.sender = sender;
    e.payload = std::move(payload);
    e.broadcast_at = broadcast_at;
    e.delivered_at = sim_.now();
    log_.push_back(std::move(e));
    const std::uint64_t seq = log_.size() - 1;
    // Handlers may subscribe or unsubscribe nodes; iterate over a snapshot of ids.
    std::vector<NodeId> ids;
    ids.reserve(subscribers_.size());
    for (const auto& [id, fn] : subscribers_) ids.push_back(id);
    for (NodeId id : ids) {
        auto it = subscribers_.find(id);
        if (it == subscribers_.end()) continue;
        Deliver fn = it->second;
        fn(log_[seq]);
    }
}

void TotalOrderBroadcast::subscribe(NodeId node, std::uint64_t from, Deliver deliver) {
    if (from > log_.size()) throw std::invalid_argument("subscription starts beyond the log");
    for (std::uint64_t i = from; i < log_.size(); ++i) deliver(log_[i]);
    subscribers_[node] = std::move(deliver);
}

}  // namespace bms
