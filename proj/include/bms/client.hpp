#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "bms/ledger.hpp"
#include "bms/membership.hpp"
#include "bms/messages.hpp"
#include "bms/sim/network.hpp"

namespace bms {

enum class ClientMode { WithBms, Control };

std::string to_string(ClientMode m);

struct ClientParams {
    ClientMode mode = ClientMode::WithBms;
    // Staleness bound on the cached configuration.
    SimTime p_bound = 555.05;
    // Wait for a quorum before refreshing and retrying.
    SimTime retry_timeout = 15.0;
    std::size_t max_attempts = 50;
};

struct Acceptance {
    std::uint64_t request_id = 0;
    Bytes result;
    std::vector<NodeId> signers;
    Configuration config;
    SimTime at = 0.0;
};

// Client of the replicated service. With the membership service it reads the
// confirmed configuration from the ledger; the control variant only knows C0
// and trusts whatever a quorum of its cached members claims.
class Client {
  public:
    using Done = std::function<void(const Acceptance&)>;

    Client(sim::Simulator& sim, sim::Network& net, Ledger& ledger, sim::SigningKey key, Configuration c0,
           ClientParams params);

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    NodeId id() const { return key_.node(); }
    void bootstrap();
    std::uint64_t submit(std::int64_t op, Done done = {});

    const Configuration& cached() const { return cached_; }
    SimTime cached_at() const { return cached_at_; }
    const std::vector<Acceptance>& accepted() const { return accepted_; }
    std::size_t refreshes() const { return refreshes_; }
    const ClientParams& params() const { return params_; }
    bool waiting() const { return !inflight_.empty(); }

  private:
    struct Inflight {
        std::int64_t op = 0;
        Done done;
        std::size_t attempts = 0;
        // Responses from members of `target`, grouped by identical result.
        std::map<Bytes, std::set<NodeId>> votes;
        Configuration target;
        bool querying = false;
        std::uint64_t query_id = 0;
        std::map<Configuration, std::set<NodeId>> claims;
    };

    void refresh();
    void attempt(std::uint64_t request_id);
    void send_requests(std::uint64_t request_id);
    void on_envelope(const sim::Envelope& env);

    sim::Simulator& sim_;
    sim::Network& net_;
    Ledger& ledger_;
    sim::SigningKey key_;
    ClientParams params_;
    Configuration cached_;
    SimTime cached_at_ = 0.0;
    std::uint64_t next_request_ = 1;
    std::uint64_t next_query_ = 1;
    std::map<std::uint64_t, Inflight> inflight_;
    std::vector<Acceptance> accepted_;
    std::size_t refreshes_ = 0;
};

}  // namespace bms
