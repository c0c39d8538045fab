#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bms/adversary.hpp"
#include "bms/client.hpp"
#include "bms/ledger.hpp"
#include "bms/membership.hpp"
#include "bms/sim/network.hpp"
#include "bms/tob.hpp"

namespace bms {

class ScenarioError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ChurnStep {
    enum class Op { Join, Leave, Evict };
    Op op = Op::Join;
    NodeId node;
    // Not before this time.
    std::optional<SimTime> at;
    // Wait for the previous step and for the system to accept another change.
    bool wait = true;
    bool pom_valid = true;
};

struct ClientRequestSpec {
    enum class Trigger { At, AfterFinalPublish };
    Trigger trigger = Trigger::At;
    // Absolute time, or the margin beyond final publication + P.
    SimTime time = 0.0;
    std::int64_t op = 1;
};

struct ClientSpec {
    ClientMode mode = ClientMode::WithBms;
    std::optional<SimTime> p_bound;
    SimTime retry_timeout = 15.0;
    SimTime bootstrap_at = 0.0;
    std::vector<ClientRequestSpec> requests;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    // NodeId value is the index into names; the first initial_count form C0.
    std::vector<std::string> names;
    std::size_t initial_count = 0;
    std::vector<ChurnStep> churn;

    Policy policy = Policy::every();
    TobParams tob;
    LedgerParams ledger;
    GasSchedule gas;
    PriceModel price;
    sim::NetworkConfig network;
    Amount cost = 1000;
    Amount fee = 1000;
    bool stake_weighted = false;
    std::map<NodeId, Amount> stakes;

    CorruptionSchedule adversary;
    std::optional<ClientSpec> client;

    bool bypass_validation = false;
    bool skip_confirmation = false;
    SimTime max_time = 1e7;
    std::optional<SimTime> join_timeout;
    std::optional<SimTime> revote_timeout;

    Configuration c0() const;
    NodeId id(std::string_view name) const;
    const std::string& name_of(NodeId id) const;
    SimTime confirmation_time() const;
    // Client P, defaulting to confirmation time plus delta.
    SimTime p_bound() const;
};

ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const ScenarioConfig& s);

// Throws ScenarioError naming the offending field.
void validate_scenario(const ScenarioConfig& s);

// Joins one node at a time from `from` to `to` members, publishing as the policy dictates.
ScenarioConfig sweep_scenario(Policy policy, std::size_t from, std::size_t to, std::uint64_t seed = 1);

struct LongRangeOptions {
    std::size_t initial_size = 4;
    ClientMode mode = ClientMode::WithBms;
    std::uint64_t seed = 1;
    // Leaves between two publications; more than the published configuration
    // can lose makes the generator refuse.
    std::size_t leaves_per_batch = 1;
    SimTime reconnect_margin = 10.0;
};

// Full turnover of C0 to disjoint members, followed by corruption of every
// retired node and a client reconnecting with a stale cache.
ScenarioConfig long_range_scenario(const LongRangeOptions& opts);

// One member of C0 withholds votes. With `exceed_bound` two correct members
// leave in one batch before any vote, more than C0 can lose, and the run needs
// the validation bypass. Without it the same two departures are each published
// at t=1, with joins in between.
ScenarioConfig stall_scenario(bool exceed_bound, std::uint64_t seed = 1);

}  // namespace bms
