#pragma once

#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "bms/membership.hpp"
#include "bms/types.hpp"

namespace bms {

// A paid registration. Each appearance of the node in an installed
// configuration change draws half of the fee; after join and leave it is consumed.
struct Registration {
    NodeId id;
    Amount fee = 0;
    bool join_paid = false;
    bool consumed = false;

    bool operator==(const Registration&) const = default;
};

struct CountVoting {
    bool operator==(const CountVoting&) const = default;
};

struct StakeWeighted {
    std::map<NodeId, Amount> stakes;

    bool operator==(const StakeWeighted&) const = default;
};

using VotingMode = std::variant<CountVoting, StakeWeighted>;

struct BmsState {
    Configuration c_cur;
    std::vector<Registration> registrations;
    std::map<Configuration, std::set<NodeId>> votes;
    Amount balance = 0;
    Amount cost = 0;
    VotingMode mode;
    // Fees of accepted registrations and rewards transferred out, for conservation checks.
    Amount collected = 0;
    Amount paid_out = 0;

    bool operator==(const BmsState&) const = default;
};

bool has_active_registration(const BmsState& s, NodeId id);

struct Transfer {
    NodeId to;
    Amount amount = 0;

    bool operator==(const Transfer&) const = default;
};

struct UpdateOutcome {
    Configuration previous;
    Configuration installed;
    std::vector<NodeId> voters;
    Amount reward = 0;
    std::vector<Transfer> transfers;
    std::size_t joined = 0;
    std::size_t left = 0;
};

enum class RegisterResult { Accepted, FeeTooLow, Duplicate };

enum class VoteResult {
    Accepted,
    AlreadyVoted,
    NotMember,
    Stale,
    Malformed,
};

struct VoteOutcome {
    VoteResult result = VoteResult::Malformed;
    // First stored vote for this configuration.
    bool first_vote = false;
    std::vector<UpdateOutcome> updates;

    bool accepted() const { return result == VoteResult::Accepted; }
};

// The membership-service state machine hosted on the ledger.
class BmsContract {
  public:
    BmsContract(Configuration c0, Amount cost, VotingMode mode = CountVoting{});
    explicit BmsContract(BmsState state) : state_(std::move(state)) {}

    RegisterResult register_node(NodeId id, Amount fee);
    VoteOutcome vote(const Configuration& c, NodeId voter);
    // Installs the highest-numbered configuration that has reached its threshold, if any.
    std::optional<UpdateOutcome> try_update();

    const Configuration& config_request() const { return state_.c_cur; }

    // Stake-weighted mode only: voters hold strictly more than a third of the
    // current members' stake. Throws std::logic_error when a stake entry is missing
    // or the contract runs in count mode.
    bool weighted_vote_threshold_met(const Configuration& c) const;

    bool has_active_registration(NodeId id) const;
    const BmsState& state() const { return state_; }

  private:
    bool threshold_met(const Configuration& c, const std::set<NodeId>& voters) const;

    BmsState state_;
};

}  // namespace bms
