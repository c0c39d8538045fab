#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include "bms/ledger.hpp"
#include "bms/messages.hpp"
#include "bms/replica.hpp"
#include "bms/sim/auth.hpp"
#include "bms/sim/network.hpp"
#include "bms/sim/simulator.hpp"
#include "bms/tob.hpp"

namespace bms {

// Faulty behaviors a node can be switched into. All of them act on the node's
// own outputs; none can produce another identity's signatures.
struct Behaviors {
    bool silent = false;
    bool withhold_vote = false;
    std::optional<Configuration> vote_bogus;
    bool drop_all = false;
    // Message variant indices to drop.
    std::set<std::size_t> drop_kinds;
    // Answer client requests with a forged result signed by this node.
    bool stale_quorum = false;
    // Answer configuration queries with this configuration.
    std::optional<Configuration> forge_config;
    Bytes forged_state;

    bool any() const {
        return silent || withhold_vote || vote_bogus || drop_all || !drop_kinds.empty() || stale_quorum || forge_config;
    }
};

Bytes forged_result(std::uint64_t request_id, const Bytes& forged_state);

struct NodeParams {
    Policy policy;
    // Depth at which members accept a joiner's registration.
    std::size_t registration_depth = 37;
    SimTime revote_timeout = 1110.0;
    SimTime join_timeout = 1200.0;
    Amount fee = 1000;
    std::function<bool(NodeId, const Bytes&)> pom_valid;
};

// Callbacks the harness uses for metrics and invariant checks.
struct NodeEvents {
    std::function<void(NodeId node, const Installed& step, SimTime at)> installed;
    std::function<void(NodeId node, const proto::ReconfigRequest& req, const TobEntry& entry, EnqueueResult r)> delivered;
    std::function<void(NodeId node, const proto::AppOperation& op, const Bytes& result)> executed;
    std::function<void(NodeId node, const Configuration& c, TxId tx)> voted;
    std::function<void(NodeId node)> deactivated;
    std::function<void(NodeId joiner, TxId tx)> registered;
    std::function<void(NodeId joiner, std::uint32_t attempt, SimTime at)> join_requested;
    std::function<void(NodeId joiner, SimTime at)> activated;
};

struct NodeContext {
    sim::Simulator& sim;
    sim::Network& net;
    const sim::Authenticator& auth;
    Ledger& ledger;
    TotalOrderBroadcast& tob;
    NodeParams params;
    NodeEvents events;
};

class BftNode {
  public:
    enum class Phase { Idle, Joining, Active, Departed };

    BftNode(NodeContext& ctx, sim::SigningKey key);

    BftNode(const BftNode&) = delete;
    BftNode& operator=(const BftNode&) = delete;

    NodeId id() const { return key_.node(); }
    Phase phase() const { return phase_; }
    bool active() const { return phase_ == Phase::Active; }
    const NodeState& state() const { return state_; }
    Configuration latest() const { return latest_bms_config(state_); }

    // Member of the initial configuration.
    void start_member(NodeState genesis);
    void start_join();
    void request_leave();
    // Relays an eviction certificate into the request log.
    void propose_evict(NodeId accused, Bytes pom);

    Behaviors& behaviors() { return behaviors_; }
    const Behaviors& behaviors() const { return behaviors_; }
    void send_forged_response(NodeId client, std::uint64_t request_id);
    void submit_vote(const Configuration& c);

  private:
    void on_envelope(const sim::Envelope& env);
    void on_tob(const TobEntry& e);
    void on_view();
    void send(NodeId to, const proto::Message& m);
    void broadcast(const proto::TobPayload& p);
    void run_checkpoint();
    void deactivate();
    void check_announces();
    void schedule_revote(const Configuration& c);

    void announce_to(const Configuration& c);
    void restart_collection();
    void on_confirm(const proto::RegisterConfirm& m, NodeId sender);
    void on_final_response(const proto::FinalResponse& m, NodeId sender);
    void arm_join_timer();

    NodeContext& ctx_;
    sim::SigningKey key_;
    Phase phase_ = Phase::Idle;
    NodeState state_;
    Behaviors behaviors_;
    RequestValidator validator_;
    std::optional<Configuration> last_observed_;
    std::set<NodeId> announces_;
    std::map<std::pair<NodeId, std::uint64_t>, Bytes> results_;

    struct ConfirmInfo {
        sim::Tag signature;
        Configuration hint;
    };
    Configuration read_config_;
    std::set<NodeId> announced_to_;
    std::map<NodeId, ConfirmInfo> confirmations_;
    std::map<Bytes, std::set<NodeId>> responses_;
    std::uint32_t attempt_ = 0;
    bool requested_ = false;
};

}  // namespace bms
