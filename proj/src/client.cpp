#include "bms/client.hpp"

#include "bms/codec.hpp"

namespace bms {

std::string to_string(ClientMode m) { return m == ClientMode::WithBms ? "bms" : "control"; }

Client::Client(sim::Simulator& sim, sim::Network& net, Ledger& ledger, sim::SigningKey key, Configuration c0,
               ClientParams params)
    : sim_(sim), net_(net), ledger_(ledger), key_(key), params_(params), cached_(std::move(c0)) {
    if (params_.p_bound < 0.0) throw std::invalid_argument("client P must be non-negative");
    if (!(params_.retry_timeout > 0.0)) throw std::invalid_argument("client retry timeout must be positive");
    net_.attach(id(), [this](const sim::Envelope& env) { on_envelope(env); });
    if (params_.mode == ClientMode::WithBms && !ledger_.has_observer(id())) ledger_.add_observer(id());
}

void Client::bootstrap() {
    if (params_.mode == ClientMode::WithBms) {
        refresh();
    } else {
        cached_at_ = sim_.now();
    }
}

void Client::refresh() {
    cached_ = ledger_.observer_state(id()).state->c_cur;
    cached_at_ = sim_.now();
    ++refreshes_;
}

std::uint64_t Client::submit(std::int64_t op, Done done) {
    const std::uint64_t rid = next_request_++;
    Inflight& f = inflight_[rid];
    f.op = op;
    f.done = std::move(done);
    attempt(rid);
    return rid;
}

void Client::attempt(std::uint64_t rid) {
    auto it = inflight_.find(rid);
    if (it == inflight_.end()) return;
    Inflight& f = it->second;
    if (f.attempts >= params_.max_attempts) {
        inflight_.erase(it);
        return;
    }
    ++f.attempts;
    f.votes.clear();
    f.claims.clear();

    if (params_.mode == ClientMode::WithBms) {
        if (f.attempts > 1 || sim_.now() - cached_at_ > params_.p_bound) refresh();
        f.target = cached_;
        f.querying = false;
        send_requests(rid);
    } else {
        // Ask the cached members which configuration is current.
        f.querying = true;
        f.query_id = next_query_++;
        for (NodeId m : cached_.members) net_.send_signed(key_, m, proto::encode(proto::ConfigQuery{f.query_id}));
    }
    const std::size_t n = f.attempts;
    sim_.schedule_after(params_.retry_timeout, [this, rid, n] {
        auto jt = inflight_.find(rid);
        if (jt != inflight_.end() && jt->second.attempts == n) attempt(rid);
    });
}

void Client::send_requests(std::uint64_t rid) {
    Inflight& f = inflight_.at(rid);
    for (NodeId m : f.target.members) {
        net_.send_signed(key_, m, proto::encode(proto::ClientRequest{id(), rid, f.op}));
    }
}

void Client::on_envelope(const sim::Envelope& env) {
    proto::Message msg;
    try {
        msg = proto::decode_message(env.payload);
    } catch (const DecodeError&) {
        return;
    }

    if (const auto* reply = std::get_if<proto::ConfigReply>(&msg)) {
        for (auto& [rid, f] : inflight_) {
            if (!f.querying || f.query_id != reply->query_id || !cached_.contains(env.sender)) continue;
            auto& who = f.claims[reply->config];
            who.insert(env.sender);
            if (who.size() >= vote_threshold(cached_)) {
                cached_ = reply->config;
                cached_at_ = sim_.now();
                f.querying = false;
                f.target = cached_;
                send_requests(rid);
            }
            return;
        }
        return;
    }

    const auto* resp = std::get_if<proto::ClientResponse>(&msg);
    if (resp == nullptr) return;
    auto it = inflight_.find(resp->request_id);
    if (it == inflight_.end()) return;
    Inflight& f = it->second;
    if (f.querying || !f.target.contains(env.sender)) return;
    auto& who = f.votes[resp->result];
    who.insert(env.sender);
    if (who.size() < vote_threshold(f.target)) return;

    Acceptance a;
    a.request_id = resp->request_id;
    a.result = resp->result;
    a.signers.assign(who.begin(), who.end());
    a.config = f.target;
    a.at = sim_.now();
    Done done = std::move(f.done);
    inflight_.erase(it);
    accepted_.push_back(a);
    if (done) done(a);
}

}  // namespace bms
