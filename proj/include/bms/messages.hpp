#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "bms/membership.hpp"
#include "bms/sim/auth.hpp"
#include "bms/types.hpp"

namespace bms::proto {

struct Confirmation {
    NodeId confirmer;
    sim::Tag signature = 0;

    bool operator==(const Confirmation&) const = default;
};

struct ProofOfRegistration {
    NodeId subject;
    // Sorted by confirmer, one entry per confirmer.
    std::vector<Confirmation> confirmations;

    bool operator==(const ProofOfRegistration&) const = default;
};

// Bytes a member signs to confirm that `joiner` is registered.
Bytes confirmation_bytes(NodeId joiner);
// Bytes a node signs to ask for its own removal.
Bytes leave_bytes(NodeId node);

struct JoinRequest {
    ProofOfRegistration proof;
    std::uint32_t attempt = 0;

    bool operator==(const JoinRequest&) const = default;
};

struct LeaveRequest {
    NodeId node;
    sim::Tag signature = 0;

    bool operator==(const LeaveRequest&) const = default;
};

struct EvictRequest {
    NodeId node;
    Bytes pom;

    bool operator==(const EvictRequest&) const = default;
};

using ReconfigRequest = std::variant<JoinRequest, LeaveRequest, EvictRequest>;

NodeId subject(const ReconfigRequest& r);
bool adds_member(const ReconfigRequest& r);

struct RegisterAnnounce {
    NodeId joiner;
};

struct RegisterConfirm {
    NodeId joiner;
    Confirmation confirmation;
    // The confirmer's current configuration; guides the joiner to newer members.
    Configuration hint;
};

struct FinalResponse {
    NodeId joiner;
    Bytes app_state;
    Configuration config;
    std::uint64_t log_position = 0;
    Bytes protocol_data;

    bool operator==(const FinalResponse&) const = default;
};

struct ClientRequest {
    NodeId client;
    std::uint64_t request_id = 0;
    std::int64_t op = 0;
};

struct ClientResponse {
    std::uint64_t request_id = 0;
    Bytes result;
};

struct ConfigQuery {
    std::uint64_t query_id = 0;
};

struct ConfigReply {
    std::uint64_t query_id = 0;
    Configuration config;
};

using Message = std::variant<RegisterAnnounce, RegisterConfirm, JoinRequest, LeaveRequest, EvictRequest, FinalResponse,
                             ClientRequest, ClientResponse, ConfigQuery, ConfigReply>;

Bytes encode(const Message& m);
Message decode_message(std::span<const std::uint8_t> bytes);

// Payloads ordered by total-order broadcast.
struct BmsObservation {
    Configuration config;
    NodeId observer;
};

struct AppOperation {
    NodeId client;
    std::uint64_t request_id = 0;
    std::int64_t op = 0;
};

struct CheckpointMarker {
    std::uint64_t index = 0;
};

using TobPayload = std::variant<JoinRequest, LeaveRequest, EvictRequest, BmsObservation, AppOperation, CheckpointMarker>;

Bytes encode_tob(const TobPayload& p);
TobPayload decode_tob(std::span<const std::uint8_t> bytes);
std::optional<ReconfigRequest> as_reconfig(const TobPayload& p);
TobPayload to_tob(const ReconfigRequest& r);

}  // namespace bms::proto
