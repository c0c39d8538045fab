#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bms/adversary.hpp"
#include "bms/client.hpp"
#include "bms/scenario.hpp"

namespace bms {

// One completed join, split into its four phases.
struct JoinRecord {
    NodeId node;
    std::size_t size = 0;
    std::size_t t = 0;
    SimTime tx_latency = 0.0;
    SimTime confirm_latency = 0.0;
    SimTime ordering_latency = 0.0;
    SimTime checkpoint_latency = 0.0;
    SimTime activated_at = 0.0;

    SimTime total() const { return tx_latency + confirm_latency + ordering_latency + checkpoint_latency; }
};

// Accepted vote transactions only.
struct VoteRecord {
    std::size_t size = 0;
    std::uint64_t config_number = 0;
    Gas gas = 0;
    bool first = false;
    bool update = false;
    NodeId voter;
    SimTime at = 0.0;
};

struct UpdateRecord {
    std::uint64_t config_number = 0;
    std::size_t previous_size = 0;
    std::size_t size = 0;
    std::size_t joiners = 0;
    std::size_t leavers = 0;
    std::size_t voters = 0;
    Gas total_gas = 0;
    double usd = 0.0;
    SimTime at = 0.0;
};

struct ConfigRecord {
    std::uint64_t number = 0;
    std::size_t size = 0;
    SimTime installed_at = 0.0;
    std::optional<SimTime> published_at;
};

struct RunResult {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<JoinRecord> joins;
    std::vector<VoteRecord> votes;
    std::vector<UpdateRecord> updates;
    std::vector<ConfigRecord> configs;
    // Submission to inclusion, for every registration transaction.
    std::vector<SimTime> registration_latencies;
    std::vector<Acceptance> acceptances;
    std::size_t forged_acceptances = 0;
    std::vector<PublishedConfig> timeline;
    std::optional<ScheduleViolation> schedule_violation;
    bool churn_complete = false;
    bool has_leaves = false;
    Configuration final_local;
    Configuration final_published;
    SimTime end_time = 0.0;
    std::uint64_t events = 0;
    std::uint64_t trace_digest = 0;
};

// Raised when a runtime invariant breaks; carries where in the run it happened.
class RunFailure : public std::runtime_error {
  public:
    RunFailure(const std::string& what, SimTime at, std::uint64_t event)
        : std::runtime_error(what), at_(at), event_(event) {}
    SimTime at() const { return at_; }
    std::uint64_t event() const { return event_; }

  private:
    SimTime at_;
    std::uint64_t event_;
};

// Validates, runs to completion or max_time, and collects metrics.
RunResult run_scenario(const ScenarioConfig& s);

std::string joins_csv(const RunResult& r);
std::string votes_csv(const RunResult& r);
std::string updates_csv(const RunResult& r);
std::string configs_csv(const RunResult& r);
void write_csvs(const RunResult& r, const std::filesystem::path& dir);

}  // namespace bms
