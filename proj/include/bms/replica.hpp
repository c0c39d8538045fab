#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "bms/membership.hpp"
#include "bms/messages.hpp"
#include "bms/sim/auth.hpp"
#include "bms/types.hpp"

namespace bms {

// Replicated counter application served to clients.
struct AppState {
    std::int64_t counter = 0;
    std::uint64_t digest = 0xcbf29ce484222325ULL;
    std::uint64_t applied = 0;

    bool operator==(const AppState&) const = default;
};

Bytes encode(const AppState& s);
AppState decode_app_state(std::span<const std::uint8_t> bytes);
// Applies one client operation and returns the result bytes sent back to the client.
Bytes apply(AppState& s, const proto::AppOperation& op);
Bytes encode_result(std::uint64_t request_id, std::int64_t counter, std::uint64_t digest);

struct PendingRequest {
    proto::ReconfigRequest request;
    SimTime delivered_at = 0.0;
    std::uint64_t seq = 0;
};

struct NodeState {
    Configuration c0;
    Configuration c_cur;
    Configuration c_last_voted;
    std::deque<PendingRequest> pending;
    std::map<Configuration, std::set<NodeId>> observed;
    AppState app;
    std::uint64_t log_position = 0;
    Policy policy;

    static NodeState genesis(const Configuration& c0, Policy policy);
};

// Everything beyond app state, configuration and log position that a joiner
// needs to continue as a replica.
Bytes encode_protocol_data(const NodeState& s);
NodeState restore_state(const proto::FinalResponse& r);
proto::FinalResponse final_response(const NodeState& s, NodeId joiner);

struct RequestValidator {
    const sim::Authenticator* auth = nullptr;
    std::function<bool(NodeId accused, const Bytes& pom)> pom_valid;
};

bool valid_proof(const proto::ProofOfRegistration& proof, const Configuration& c_cur, const sim::Authenticator& auth);

enum class EnqueueResult { Enqueued, Invalid, Duplicate, Inapplicable };

EnqueueResult validate_and_enqueue(NodeState& s, const proto::ReconfigRequest& req, SimTime delivered_at,
                                   std::uint64_t seq, const RequestValidator& validator);

void record_observation(NodeState& s, const Configuration& c, NodeId observer);

// Highest-numbered configuration observed by at least f(c_cur)+1 current members; C0 otherwise.
Configuration latest_bms_config(const NodeState& s);

// Next local configuration, or nullopt when the request no longer applies.
std::optional<Configuration> apply_request(const Configuration& c, const proto::ReconfigRequest& req);

std::optional<Configuration> maybe_vote(NodeState& s);

struct Installed {
    PendingRequest request;
    Configuration config;
};

struct CheckpointOutcome {
    std::vector<Installed> installed;
    std::vector<Configuration> votes;
    std::vector<PendingRequest> discarded;
};

CheckpointOutcome checkpoint_reconfigure(NodeState& s);

}  // namespace bms
