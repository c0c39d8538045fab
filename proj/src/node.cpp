#include "bms/node.hpp"

#include "bms/codec.hpp"

namespace bms {

Bytes forged_result(std::uint64_t request_id, const Bytes& forged_state) {
    return std::move(Writer().u64(request_id).bytes(forged_state)).take();
}

BftNode::BftNode(NodeContext& ctx, sim::SigningKey key) : ctx_(ctx), key_(key) {
    validator_.auth = &ctx_.auth;
    validator_.pom_valid = ctx_.params.pom_valid;
    ctx_.net.attach(id(), [this](const sim::Envelope& env) { on_envelope(env); });
    if (!ctx_.ledger.has_observer(id())) ctx_.ledger.add_observer(id());
    ctx_.ledger.set_view_hook(id(), [this](std::uint64_t) { on_view(); });
}

void BftNode::start_member(NodeState genesis) {
    state_ = std::move(genesis);
    phase_ = Phase::Active;
    ctx_.tob.subscribe(id(), ctx_.tob.size(), [this](const TobEntry& e) { on_tob(e); });
    on_view();
}

void BftNode::start_join() {
    if (phase_ != Phase::Idle) return;
    phase_ = Phase::Joining;
    const TxId tx = ctx_.ledger.submit_register(key_, ctx_.params.fee);
    if (ctx_.events.registered) ctx_.events.registered(id(), tx);
    restart_collection();
}

void BftNode::request_leave() {
    if (!active()) return;
    proto::LeaveRequest req{id(), ctx_.auth.sign(key_, proto::leave_bytes(id()))};
    broadcast(proto::TobPayload{req});
}

void BftNode::propose_evict(NodeId accused, Bytes pom) {
    if (!active()) return;
    broadcast(proto::TobPayload{proto::EvictRequest{accused, std::move(pom)}});
}

void BftNode::send(NodeId to, const proto::Message& m) {
    if (behaviors_.silent || behaviors_.drop_all || behaviors_.drop_kinds.contains(m.index())) return;
    ctx_.net.send_signed(key_, to, proto::encode(m));
}

void BftNode::broadcast(const proto::TobPayload& p) {
    if (behaviors_.silent) return;
    ctx_.tob.broadcast(id(), proto::encode_tob(p));
}

void BftNode::send_forged_response(NodeId client, std::uint64_t request_id) {
    proto::ClientResponse r{request_id, forged_result(request_id, behaviors_.forged_state)};
    ctx_.net.send_signed(key_, client, proto::encode(proto::Message{std::move(r)}));
}

void BftNode::on_envelope(const sim::Envelope& env) {
    proto::Message msg;
    try {
        msg = proto::decode_message(env.payload);
    } catch (const DecodeError&) {
        return;
    }

    if (const auto* req = std::get_if<proto::ClientRequest>(&msg); req && behaviors_.stale_quorum) {
        send_forged_response(env.sender, req->request_id);
        return;
    }
    if (const auto* q = std::get_if<proto::ConfigQuery>(&msg); q && behaviors_.forge_config) {
        ctx_.net.send_signed(key_, env.sender, proto::encode(proto::ConfigReply{q->query_id, *behaviors_.forge_config}));
        return;
    }

    if (phase_ == Phase::Joining) {
        if (const auto* c = std::get_if<proto::RegisterConfirm>(&msg)) on_confirm(*c, env.sender);
        if (const auto* f = std::get_if<proto::FinalResponse>(&msg)) on_final_response(*f, env.sender);
        return;
    }
    if (!active()) return;

    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, proto::RegisterAnnounce>) {
                if (env.sender != m.joiner) return;
                announces_.insert(m.joiner);
                check_announces();
            } else if constexpr (std::is_same_v<T, proto::JoinRequest> || std::is_same_v<T, proto::LeaveRequest> ||
                                 std::is_same_v<T, proto::EvictRequest>) {
                broadcast(proto::TobPayload{m});
            } else if constexpr (std::is_same_v<T, proto::ClientRequest>) {
                if (env.sender != m.client) return;
                if (auto it = results_.find({m.client, m.request_id}); it != results_.end()) {
                    send(m.client, proto::ClientResponse{m.request_id, it->second});
                    return;
                }
                broadcast(proto::AppOperation{m.client, m.request_id, m.op});
            } else if constexpr (std::is_same_v<T, proto::ConfigQuery>) {
                send(env.sender, proto::ConfigReply{m.query_id, state_.c_cur});
            }
        },
        msg);
}

void BftNode::on_tob(const TobEntry& e) {
    state_.log_position = e.seq + 1;
    proto::TobPayload payload;
    try {
        payload = proto::decode_tob(e.payload);
    } catch (const DecodeError&) {
        return;
    }
    if (auto req = proto::as_reconfig(payload)) {
        const EnqueueResult r = validate_and_enqueue(state_, *req, e.delivered_at, e.seq, validator_);
        if (ctx_.events.delivered) ctx_.events.delivered(id(), *req, e, r);
    } else if (const auto* obs = std::get_if<proto::BmsObservation>(&payload)) {
        if (obs->observer == e.sender) record_observation(state_, obs->config, obs->observer);
    } else if (const auto* op = std::get_if<proto::AppOperation>(&payload)) {
        Bytes result = apply(state_.app, *op);
        if (ctx_.events.executed) ctx_.events.executed(id(), *op, result);
        if (active()) send(op->client, proto::ClientResponse{op->request_id, result});
        results_[{op->client, op->request_id}] = std::move(result);
    } else if (std::holds_alternative<proto::CheckpointMarker>(payload)) {
        run_checkpoint();
    }
}

void BftNode::run_checkpoint() {
    CheckpointOutcome out = checkpoint_reconfigure(state_);
    for (const auto& step : out.installed) {
        if (ctx_.events.installed) ctx_.events.installed(id(), step, ctx_.sim.now());
    }
    for (const auto& c : out.votes) submit_vote(c);
    for (const auto& step : out.installed) {
        if (!proto::adds_member(step.request.request)) continue;
        const NodeId joiner = proto::subject(step.request.request);
        if (state_.c_cur.contains(joiner)) send(joiner, final_response(state_, joiner));
    }
    if (!state_.c_cur.contains(id())) deactivate();
}

void BftNode::deactivate() {
    phase_ = Phase::Departed;
    ctx_.tob.unsubscribe(id());
    announces_.clear();
    if (ctx_.events.deactivated) ctx_.events.deactivated(id());
}

void BftNode::submit_vote(const Configuration& c) {
    if (behaviors_.silent || behaviors_.withhold_vote) return;
    const Configuration& target = behaviors_.vote_bogus ? *behaviors_.vote_bogus : c;
    const TxId tx = ctx_.ledger.submit_vote(key_, target);
    if (ctx_.events.voted) ctx_.events.voted(id(), target, tx);
    schedule_revote(c);
}

void BftNode::schedule_revote(const Configuration& c) {
    ctx_.sim.schedule_after(ctx_.params.revote_timeout, [this, c] {
        if (phase_ != Phase::Active && phase_ != Phase::Departed) return;
        if (state_.c_last_voted != c) return;
        const auto view = ctx_.ledger.observer_state(id());
        if (view.state->c_cur.number >= c.number || !view.state->c_cur.contains(id())) return;
        submit_vote(c);
    });
}

void BftNode::on_view() {
    if (!active()) return;
    const auto view = ctx_.ledger.observer_state(id());
    const Configuration& c = view.state->c_cur;
    if (!last_observed_ || *last_observed_ != c) {
        last_observed_ = c;
        broadcast(proto::BmsObservation{c, id()});
    }
    check_announces();
}

void BftNode::check_announces() {
    if (announces_.empty()) return;
    const auto view = ctx_.ledger.observer_state(id(), ctx_.params.registration_depth);
    for (auto it = announces_.begin(); it != announces_.end();) {
        const NodeId joiner = *it;
        if (state_.c_cur.contains(joiner)) {
            it = announces_.erase(it);
            continue;
        }
        if (!has_active_registration(*view.state, joiner)) {
            ++it;
            continue;
        }
        proto::Confirmation conf{id(), ctx_.auth.sign(key_, proto::confirmation_bytes(joiner))};
        send(joiner, proto::RegisterConfirm{joiner, conf, state_.c_cur});
        it = announces_.erase(it);
    }
}

void BftNode::announce_to(const Configuration& c) {
    for (NodeId m : c.members) {
        if (m != id() && announced_to_.insert(m).second) send(m, proto::RegisterAnnounce{id()});
    }
}

void BftNode::restart_collection() {
    ++attempt_;
    requested_ = false;
    confirmations_.clear();
    announced_to_.clear();
    read_config_ = ctx_.ledger.observer_state(id()).state->c_cur;
    announce_to(read_config_);
    arm_join_timer();
}

void BftNode::arm_join_timer() {
    const std::uint32_t a = attempt_;
    ctx_.sim.schedule_after(ctx_.params.join_timeout, [this, a] {
        if (phase_ == Phase::Joining && attempt_ == a) restart_collection();
    });
}

void BftNode::on_confirm(const proto::RegisterConfirm& m, NodeId sender) {
    if (m.joiner != id() || m.confirmation.confirmer != sender) return;
    if (!ctx_.auth.verify(sender, proto::confirmation_bytes(id()), m.confirmation.signature)) return;
    confirmations_[sender] = ConfirmInfo{m.confirmation.signature, m.hint};
    if (requested_) return;

    // Follow hints to newer configurations vouched for by enough members of a trusted one.
    Configuration trusted = read_config_;
    for (;;) {
        std::map<Configuration, std::size_t> votes;
        for (const auto& [who, info] : confirmations_) {
            if (trusted.contains(who) && info.hint.number > trusted.number) ++votes[info.hint];
        }
        const Configuration* next = nullptr;
        for (const auto& [c, n] : votes) {
            if (n >= vote_threshold(trusted) && (next == nullptr || c.number > next->number)) next = &c;
        }
        if (next == nullptr) break;
        trusted = *next;
        announce_to(trusted);
    }

    proto::ProofOfRegistration proof;
    proof.subject = id();
    for (const auto& [who, info] : confirmations_) {
        if (trusted.contains(who)) proof.confirmations.push_back({who, info.signature});
    }
    if (proof.confirmations.size() < vote_threshold(trusted)) return;

    requested_ = true;
    const proto::JoinRequest req{std::move(proof), attempt_};
    if (ctx_.events.join_requested) ctx_.events.join_requested(id(), attempt_, ctx_.sim.now());
    for (NodeId m : trusted.members) {
        if (m != id()) send(m, req);
    }
}

void BftNode::on_final_response(const proto::FinalResponse& m, NodeId sender) {
    if (m.joiner != id() || sender == id() || !m.config.contains(id()) || !m.config.contains(sender)) return;
    auto& from = responses_[proto::encode(proto::Message{m})];
    from.insert(sender);
    if (from.size() < vote_threshold(m.config)) return;

    NodeState restored;
    try {
        restored = restore_state(m);
    } catch (const DecodeError&) {
        return;
    }
    state_ = std::move(restored);
    phase_ = Phase::Active;
    responses_.clear();
    confirmations_.clear();
    if (ctx_.events.activated) ctx_.events.activated(id(), ctx_.sim.now());
    ctx_.tob.subscribe(id(), state_.log_position, [this](const TobEntry& e) { on_tob(e); });
    last_observed_.reset();
    on_view();
}

}  // namespace bms
