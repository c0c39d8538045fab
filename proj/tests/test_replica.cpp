#include <gtest/gtest.h>

#include "bms/messages.hpp"
#include "bms/replica.hpp"
#include "bms/tob.hpp"

using namespace bms;

namespace {

const NodeId A{0}, B{1}, C{2}, D{3}, E{4}, F{5};

struct Keys {
    sim::Authenticator auth{17};
    std::vector<sim::SigningKey> keys;
    Keys() {
        for (std::uint32_t i = 0; i < 8; ++i) keys.push_back(auth.enroll(NodeId{i}));
    }

    proto::ProofOfRegistration proof(NodeId joiner, std::vector<NodeId> confirmers) const {
        proto::ProofOfRegistration p;
        p.subject = joiner;
        for (auto c : confirmers) {
            p.confirmations.push_back({c, auth.sign(keys[c.value], proto::confirmation_bytes(joiner))});
        }
        return p;
    }

    proto::ReconfigRequest join(NodeId joiner, std::vector<NodeId> confirmers) const {
        return proto::JoinRequest{proof(joiner, std::move(confirmers)), 0};
    }

    proto::ReconfigRequest leave(NodeId node) const {
        return proto::LeaveRequest{node, auth.sign(keys[node.value], proto::leave_bytes(node))};
    }

    RequestValidator validator() const {
        RequestValidator v;
        v.auth = &auth;
        v.pom_valid = [](NodeId, const Bytes& pom) { return pom == Bytes{'o', 'k'}; };
        return v;
    }
};

Configuration abcd() { return Configuration::make(0, {A, B, C, D}); }

}  // namespace

TEST(Tob, SameOrderForEverySubscriberAndLatency) {
    sim::Simulator sim(1);
    TobParams p;
    p.checkpoint_interval = 0;
    p.checkpoint_every = 100;
    TotalOrderBroadcast tob(sim, p);
    tob.start();
    std::vector<std::uint64_t> x, y;
    tob.subscribe(A, 0, [&](const TobEntry& e) { x.push_back(e.seq); });
    tob.subscribe(B, 0, [&](const TobEntry& e) { y.push_back(e.seq); });
    for (int i = 0; i < 10; ++i) {
        sim.schedule(i * 0.3, [&tob, i] { tob.broadcast(NodeId{static_cast<std::uint32_t>(i % 3)}, Bytes{static_cast<std::uint8_t>(i)}); });
    }
    sim.run();
    EXPECT_EQ(x, y);
    ASSERT_EQ(tob.size(), 10u);
    for (const auto& e : tob.log()) EXPECT_DOUBLE_EQ(e.delivered_at - e.broadcast_at, 0.95);
}

TEST(Tob, DuplicatePayloadsSuppressed) {
    sim::Simulator sim(1);
    TotalOrderBroadcast tob(sim, TobParams{});
    EXPECT_TRUE(tob.broadcast(A, Bytes{1}));
    EXPECT_FALSE(tob.broadcast(B, Bytes{1}));
}

TEST(Tob, MarkersOnIntervalAndCount) {
    sim::Simulator sim(1);
    TobParams p;
    p.checkpoint_interval = 20.0;
    TotalOrderBroadcast tob(sim, p);
    tob.start();
    sim.run_until(100.0);
    ASSERT_EQ(tob.size(), 5u);
    for (const auto& e : tob.log()) EXPECT_EQ(e.sender, kTobSystem);

    sim::Simulator sim2(1);
    p.checkpoint_interval = 0;
    p.checkpoint_every = 2;
    TotalOrderBroadcast counted(sim2, p);
    counted.start();
    counted.broadcast(A, Bytes{1});
    counted.broadcast(A, Bytes{2});
    counted.broadcast(A, Bytes{3});
    sim2.run();
    EXPECT_EQ(counted.size(), 4u);
    EXPECT_EQ(counted.log()[2].sender, kTobSystem);

    p.checkpoint_every = 0;
    EXPECT_THROW(TotalOrderBroadcast(sim2, p), std::invalid_argument);
}

TEST(Tob, LateSubscriberReplays) {
    sim::Simulator sim(1);
    TotalOrderBroadcast tob(sim, TobParams{});
    tob.broadcast(A, Bytes{1});
    tob.broadcast(A, Bytes{2});
    sim.run();
    std::vector<std::uint64_t> seen;
    tob.subscribe(C, 1, [&](const TobEntry& e) { seen.push_back(e.seq); });
    EXPECT_EQ(seen, (std::vector<std::uint64_t>{1}));
    EXPECT_THROW(tob.subscribe(D, 5, [](const TobEntry&) {}), std::invalid_argument);
}

TEST(Replica, ProofNeedsFPlusOneCurrentMembers) {
    Keys k;
    const auto c = abcd();
    EXPECT_TRUE(valid_proof(k.proof(E, {A, B}), c, k.auth));
    EXPECT_FALSE(valid_proof(k.proof(E, {A}), c, k.auth));
    EXPECT_FALSE(valid_proof(k.proof(E, {A, F}), c, k.auth));
    EXPECT_FALSE(valid_proof(k.proof(E, {A, A}), c, k.auth));
    auto forged = k.proof(E, {A, B});
    forged.confirmations[1].signature ^= 1;
    EXPECT_FALSE(valid_proof(forged, c, k.auth));
}

TEST(Replica, EnqueueValidation) {
    Keys k;
    auto s = NodeState::genesis(abcd(), Policy::every());
    const auto v = k.validator();
    EXPECT_EQ(validate_and_enqueue(s, k.join(E, {A, B}), 1.0, 1, v), EnqueueResult::Enqueued);
    EXPECT_EQ(validate_and_enqueue(s, k.join(E, {C, D}), 1.0, 2, v), EnqueueResult::Duplicate);
    EXPECT_EQ(validate_and_enqueue(s, k.join(F, {A}), 1.0, 3, v), EnqueueResult::Invalid);
    EXPECT_EQ(validate_and_enqueue(s, k.join(A, {B, C}), 1.0, 4, v), EnqueueResult::Inapplicable);
    EXPECT_EQ(validate_and_enqueue(s, k.leave(E), 1.0, 5, v), EnqueueResult::Inapplicable);
    EXPECT_EQ(validate_and_enqueue(s, k.leave(B), 1.0, 6, v), EnqueueResult::Enqueued);
    EXPECT_EQ(validate_and_enqueue(s, proto::EvictRequest{C, Bytes{'n', 'o'}}, 1.0, 7, v), EnqueueResult::Invalid);
    EXPECT_EQ(validate_and_enqueue(s, proto::EvictRequest{C, Bytes{'o', 'k'}}, 1.0, 8, v), EnqueueResult::Enqueued);
    EXPECT_EQ(s.pending.size(), 3u);
}

TEST(Replica, CheckpointAppliesUpToThresholdThenStops) {
    Keys k;
    auto s = NodeState::genesis(abcd(), Policy::every());
    const auto v = k.validator();
    validate_and_enqueue(s, k.join(E, {A, B}), 1.0, 1, v);
    validate_and_enqueue(s, k.join(F, {A, B}), 1.0, 2, v);
    auto out = checkpoint_reconfigure(s);
    ASSERT_EQ(out.installed.size(), 1u);
    ASSERT_EQ(out.votes.size(), 1u);
    EXPECT_EQ(out.votes[0], Configuration::make(1, {A, B, C, D, E}));
    EXPECT_EQ(s.pending.size(), 1u);
    // Nothing more until the membership service is seen to hold the voted configuration.
    EXPECT_TRUE(checkpoint_reconfigure(s).installed.empty());
    record_observation(s, s.c_cur, A);
    EXPECT_EQ(latest_bms_config(s), s.c0);
    record_observation(s, s.c_cur, B);
    EXPECT_EQ(latest_bms_config(s), s.c_cur);
    out = checkpoint_reconfigure(s);
    ASSERT_EQ(out.installed.size(), 1u);
    EXPECT_EQ(s.c_cur.size(), 6u);
    EXPECT_EQ(s.c_cur.number, 2u);
}

TEST(Replica, ObservationsCountOnlyCurrentMembers) {
    auto s = NodeState::genesis(abcd(), Policy::every());
    const auto c1 = Configuration::make(1, {A, B, C, D, E});
    record_observation(s, c1, E);
    record_observation(s, c1, F);
    record_observation(s, c1, A);
    EXPECT_EQ(latest_bms_config(s), s.c0);
}

TEST(Replica, HalfFBatchesBeforeVoting) {
    std::vector<NodeId> ids;
    for (std::uint32_t i = 0; i < 20; ++i) ids.push_back(NodeId{i});
    auto s = NodeState::genesis(Configuration::make(0, ids), Policy::half_f());
    // 19 members: f = 6, t = 3.
    s.c_cur = Configuration::make(1, std::vector<NodeId>(ids.begin(), ids.end() - 1));
    EXPECT_FALSE(maybe_vote(s).has_value());
    // 17 members: f = 5, t = 2, three changes pending.
    s.c_cur = Configuration::make(3, std::vector<NodeId>(ids.begin(), ids.end() - 3));
    EXPECT_TRUE(maybe_vote(s).has_value());
    EXPECT_EQ(s.c_last_voted, s.c_cur);
}

TEST(Replica, StaleRequestDiscardedAtCheckpoint) {
    Keys k;
    auto s = NodeState::genesis(abcd(), Policy::every());
    const auto v = k.validator();
    validate_and_enqueue(s, k.leave(B), 1.0, 1, v);
    EXPECT_EQ(validate_and_enqueue(s, proto::EvictRequest{B, Bytes{'o', 'k'}}, 1.0, 2, v), EnqueueResult::Duplicate);
    s.pending.push_back(PendingRequest{proto::EvictRequest{B, Bytes{'o', 'k'}}, 1.0, 2});
    auto out = checkpoint_reconfigure(s);
    EXPECT_EQ(out.installed.size(), 1u);
    // The evict is only examined once the membership service catches up.
    record_observation(s, s.c_cur, A);
    record_observation(s, s.c_cur, C);
    out = checkpoint_reconfigure(s);
    EXPECT_TRUE(out.installed.empty());
    EXPECT_EQ(out.discarded.size(), 1u);
}

TEST(Replica, FinalResponseRestoresState) {
    Keys k;
    auto s = NodeState::genesis(abcd(), Policy::half_f());
    s.app.counter = 12;
    s.log_position = 40;
    validate_and_enqueue(s, k.join(E, {A, B}), 1.0, 1, k.validator());
    record_observation(s, s.c0, A);
    const auto r = final_response(s, E);
    const auto back = restore_state(r);
    EXPECT_EQ(back.c_cur, s.c_cur);
    EXPECT_EQ(back.c0, s.c0);
    EXPECT_EQ(back.app, s.app);
    EXPECT_EQ(back.log_position, 40u);
    EXPECT_EQ(back.pending.size(), 1u);
    EXPECT_EQ(back.observed, s.observed);
    const auto m = proto::decode_message(proto::encode(proto::Message{r}));
    EXPECT_EQ(std::get<proto::FinalResponse>(m), r);
}

TEST(Messages, TobRoundTrip) {
    Keys k;
    const proto::TobPayload p = std::get<proto::JoinRequest>(k.join(E, {A, B}));
    const auto back = proto::decode_tob(proto::encode_tob(p));
    EXPECT_EQ(std::get<proto::JoinRequest>(back), std::get<proto::JoinRequest>(p));
    EXPECT_TRUE(proto::as_reconfig(back).has_value());
    EXPECT_FALSE(proto::as_reconfig(proto::CheckpointMarker{3}).has_value());
}
