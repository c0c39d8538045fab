#include "bms/replica.hpp"

#include <algorithm>

#include "bms/codec.hpp"

namespace bms {

namespace {

void put_request(Writer& w, const proto::ReconfigRequest& r) { w.bytes(proto::encode_tob(proto::to_tob(r))); }

proto::ReconfigRequest get_request(Reader& r) {
    const Bytes b = r.bytes();
    auto req = proto::as_reconfig(proto::decode_tob(b));
    if (!req) throw DecodeError("pending entry is not a reconfiguration request");
    return *req;
}

bool same_kind(const proto::ReconfigRequest& a, const proto::ReconfigRequest& b) {
    return proto::adds_member(a) == proto::adds_member(b) && proto::subject(a) == proto::subject(b);
}

}  // namespace

Bytes encode(const AppState& s) { return std::move(Writer().i64(s.counter).u64(s.digest).u64(s.applied)).take(); }

AppState decode_app_state(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    AppState s;
    s.counter = r.i64();
    s.digest = r.u64();
    s.applied = r.u64();
    r.expect_done();
    return s;
}

Bytes encode_result(std::uint64_t request_id, std::int64_t counter, std::uint64_t digest) {
    return std::move(Writer().u64(request_id).i64(counter).u64(digest)).take();
}

Bytes apply(AppState& s, const proto::AppOperation& op) {
    s.counter += op.op;
    ++s.applied;
    const Bytes b = proto::encode_tob(op);
    Writer w;
    w.u64(s.digest).bytes(b);
    s.digest = fnv1a64(w.data());
    return encode_result(op.request_id, s.counter, s.digest);
}

NodeState NodeState::genesis(const Configuration& c0, Policy policy) {
    NodeState s;
    s.c0 = c0;
    s.c_cur = c0;
    s.c_last_voted = c0;
    s.policy = policy;
    return s;
}

Bytes encode_protocol_data(const NodeState& s) {
    Writer w;
    w.config(s.c0).config(s.c_last_voted);
    w.u8(static_cast<std::uint8_t>(s.policy.kind)).u64(s.policy.fixed_t);
    w.u32(static_cast<std::uint32_t>(s.pending.size()));
    for (const auto& p : s.pending) {
        put_request(w, p.request);
        w.f64(p.delivered_at).u64(p.seq);
    }
    w.u32(static_cast<std::uint32_t>(s.observed.size()));
    for (const auto& [c, nodes] : s.observed) {
        w.config(c).u32(static_cast<std::uint32_t>(nodes.size()));
        for (NodeId n : nodes) w.node(n);
    }
    return std::move(w).take();
}

proto::FinalResponse final_response(const NodeState& s, NodeId joiner) {
    proto::FinalResponse r;
    r.joiner = joiner;
    r.app_state = encode(s.app);
    r.config = s.c_cur;
    r.log_position = s.log_position;
    r.protocol_data = encode_protocol_data(s);
    return r;
}

NodeState restore_state(const proto::FinalResponse& resp) {
    NodeState s;
    s.app = decode_app_state(resp.app_state);
    s.c_cur = resp.config;
    s.log_position = resp.log_position;
    Reader r(resp.protocol_data);
    s.c0 = r.config();
    s.c_last_voted = r.config();
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(PolicyKind::Fixed)) throw DecodeError("unknown policy");
    s.policy.kind = static_cast<PolicyKind>(kind);
    s.policy.fixed_t = r.u64();
    const std::uint32_t pending = r.u32();
    for (std::uint32_t i = 0; i < pending; ++i) {
        PendingRequest p{get_request(r), 0.0, 0};
        p.delivered_at = r.f64();
        p.seq = r.u64();
        s.pending.push_back(std::move(p));
    }
    const std::uint32_t observed = r.u32();
    for (std::uint32_t i = 0; i < observed; ++i) {
        Configuration c = r.config();
        auto& nodes = s.observed[c];
        const std::uint32_t n = r.u32();
        for (std::uint32_t j = 0; j < n; ++j) nodes.insert(r.node());
    }
    r.expect_done();
    return s;
}

bool valid_proof(const proto::ProofOfRegistration& proof, const Configuration& c_cur, const sim::Authenticator& auth) {
    const Bytes msg = proto::confirmation_bytes(proof.subject);
    std::set<NodeId> counted;
    for (const auto& c : proof.confirmations) {
        if (!c_cur.contains(c.confirmer) || counted.contains(c.confirmer)) continue;
        if (!auth.enrolled(c.confirmer) || !auth.verify(c.confirmer, msg, c.signature)) continue;
        counted.insert(c.confirmer);
    }
    return counted.size() >= vote_threshold(c_cur);
}

EnqueueResult validate_and_enqueue(NodeState& s, const proto::ReconfigRequest& req, SimTime delivered_at,
                                   std::uint64_t seq, const RequestValidator& validator) {
    const NodeId who = proto::subject(req);
    bool valid = false;
    if (const auto* j = std::get_if<proto::JoinRequest>(&req)) {
        if (s.c_cur.contains(who)) return EnqueueResult::Inapplicable;
        valid = validator.auth != nullptr && valid_proof(j->proof, s.c_cur, *validator.auth);
    } else if (const auto* l = std::get_if<proto::LeaveRequest>(&req)) {
        if (!s.c_cur.contains(who)) return EnqueueResult::Inapplicable;
        valid = validator.auth != nullptr && validator.auth->enrolled(who) &&
                validator.auth->verify(who, proto::leave_bytes(who), l->signature);
    } else {
        const auto& e = std::get<proto::EvictRequest>(req);
        if (!s.c_cur.contains(who)) return EnqueueResult::Inapplicable;
        valid = validator.pom_valid && validator.pom_valid(who, e.pom);
    }
    if (!valid) return EnqueueResult::Invalid;
    for (const auto& p : s.pending) {
        if (same_kind(p.request, req)) return EnqueueResult::Duplicate;
    }
    s.pending.push_back(PendingRequest{req, delivered_at, seq});
    return EnqueueResult::Enqueued;
}

void record_observation(NodeState& s, const Configuration& c, NodeId observer) { s.observed[c].insert(observer); }

Configuration latest_bms_config(const NodeState& s) {
    const std::size_t need = vote_threshold(s.c_cur);
    const Configuration* best = nullptr;
    for (const auto& [c, nodes] : s.observed) {
        std::size_t count = 0;
        for (NodeId n : nodes) count += s.c_cur.contains(n) ? 1 : 0;
        if (count < need) continue;
        if (best == nullptr || c.number > best->number) best = &c;
    }
    return best != nullptr ? *best : s.c0;
}

std::optional<Configuration> apply_request(const Configuration& c, const proto::ReconfigRequest& req) {
    const NodeId who = proto::subject(req);
    std::vector<NodeId> members = c.members;
    if (proto::adds_member(req)) {
        if (c.contains(who)) return std::nullopt;
        members.insert(std::lower_bound(members.begin(), members.end(), who), who);
    } else {
        if (!c.contains(who) || members.size() == 1) return std::nullopt;
        members.erase(std::find(members.begin(), members.end(), who));
    }
    return Configuration::make(c.number + 1, std::move(members));
}

std::optional<Configuration> maybe_vote(NodeState& s) {
    if (symmetric_difference(s.c_last_voted, s.c_cur) < policy_threshold(s.policy, s.c_cur)) return std::nullopt;
    s.c_last_voted = s.c_cur;
    return s.c_cur;
}

CheckpointOutcome checkpoint_reconfigure(NodeState& s) {
    CheckpointOutcome out;
    while (!s.pending.empty() &&
           symmetric_difference(latest_bms_config(s), s.c_cur) < policy_threshold(s.policy, s.c_cur)) {
        PendingRequest p = std::move(s.pending.front());
        s.pending.pop_front();
        auto next = apply_request(s.c_cur, p.request);
        if (!next) {
            out.discarded.push_back(std::move(p));
            continue;
        }
        s.c_cur = std::move(*next);
        out.installed.push_back(Installed{std::move(p), s.c_cur});
        if (auto v = maybe_vote(s)) out.votes.push_back(std::move(*v));
    }
    return out;
}

}  // namespace bms
