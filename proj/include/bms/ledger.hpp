#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <unordered_map>
#include <variant>
#include <vector>

#include "bms/contract.hpp"
#include "bms/membership.hpp"
#include "bms/sim/auth.hpp"
#include "bms/sim/simulator.hpp"
#include "bms/types.hpp"

namespace bms {

// Gas constants. g_vote_per_member charges each VOTE for hashing and passing
// the configuration it carries; g_update_per_member is charged per member that
// enters or leaves the stored configuration.
struct GasSchedule {
    Gas g_base = 21000;
    Gas g_vote_store = 7941;
    Gas g_first_vote_init = 58665;
    Gas g_update_fixed = 30000;
    Gas g_update_per_member = 17230;
    Gas g_register = 65000;
    Gas refund_per_freed_member = 4800;
    Gas g_vote_per_member = 286;

    bool operator==(const GasSchedule&) const = default;
};

void validate(const GasSchedule& g);

struct PriceModel {
    double gas_price_gwei = 93.1;
    double eth_usd = 386.10;
};

void validate(const PriceModel& pm);
double usd_cost(Gas gas, const PriceModel& pm);

Gas register_gas(const GasSchedule& g, RegisterResult result);
// `members` is the size of the configuration carried by the vote.
Gas vote_gas(const GasSchedule& g, const VoteOutcome& outcome, std::size_t members);

struct RegisterTx {
    NodeId node;
    Amount fee = 0;

    bool operator==(const RegisterTx&) const = default;
};

struct VoteTx {
    Configuration config;
    NodeId voter;

    bool operator==(const VoteTx&) const = default;
};

struct LedgerTransaction {
    std::variant<RegisterTx, VoteTx> body;
    NodeId submitter;
    SimTime submitted_at = 0.0;
    Amount attached_funds = 0;

    bool operator==(const LedgerTransaction&) const = default;
};

Bytes encode(const LedgerTransaction& tx);
LedgerTransaction decode_transaction(std::span<const std::uint8_t> bytes);

using TxId = std::uint64_t;

struct TxReceipt {
    Gas gas_used = 0;
    std::uint64_t included_height = 0;
    bool accepted = false;
};

struct Block {
    std::uint64_t height = 0;
    SimTime produced_at = 0.0;
    std::vector<TxId> txs;
    std::vector<TxReceipt> receipts;
};

// What the ledger reports after executing one transaction.
struct ExecutedTx {
    TxId id = 0;
    const LedgerTransaction* tx = nullptr;
    TxReceipt receipt;
    SimTime block_time = 0.0;
    std::optional<VoteOutcome> vote;
    std::optional<RegisterResult> registration;
};

// Parameters of a clamped normal max(0, N(mu, sigma)).
struct ClampedNormal {
    double mu = 0.0;
    double sigma = 0.0;

    double mean() const;
    double sd() const;
};

// Finds the clamped normal with the given mean and standard deviation.
ClampedNormal clamped_normal_with_moments(double mean, double sd);

struct LedgerParams {
    SimTime block_interval_mean = 15.0;
    SimTime block_interval_sd = 5.0;
    SimTime block_interval_min = 1.0;
    // Observed submission-to-inclusion latency.
    SimTime tx_latency_mean = 27.7;
    SimTime tx_latency_sd = 24.9;
    std::size_t confirmation_depth = 37;
    // Observers without an explicit delay draw one uniformly from [0, this].
    SimTime observer_delay_max = 0.5;
};

void validate(const LedgerParams& p);

// Mean and sd of a block interval drawn by rejection from N(mean, sd) on [min, inf).
std::pair<double, double> block_interval_moments(const LedgerParams& p);

// The pre-inclusion delay distribution such that delay plus the wait for the
// next block has the observed latency moments. Falls back to a point mass at
// max(0, residual mean) when the observed moments are smaller than the block wait.
ClampedNormal inclusion_delay_model(const LedgerParams& p);

struct ObserverView {
    std::uint64_t visible_height = 0;
    std::optional<std::uint64_t> confirmed_height;
    std::shared_ptr<const BmsState> state;
};

// Single-chain ledger hosting one contract. Blocks are produced on a timer;
// each transaction lands in the first block after its inclusion delay.
class Ledger {
  public:
    using ExecutedHook = std::function<void(const ExecutedTx&)>;
    using BlockHook = std::function<void(const Block&)>;
    using ViewHook = std::function<void(std::uint64_t visible_height)>;

    Ledger(sim::Simulator& sim, LedgerParams params, GasSchedule gas, BmsContract contract);

    // Produces the genesis block now and schedules the following ones.
    void start();
    void stop() { running_ = false; }

    TxId submit_tx(LedgerTransaction tx);
    // The submitter is the key's node; the key proves the submitter identity.
    TxId submit_register(const sim::SigningKey& key, Amount fee);
    TxId submit_vote(const sim::SigningKey& key, const Configuration& c);

    // Throws std::invalid_argument for an unknown tx id.
    bool is_confirmed(TxId id, std::size_t depth) const;
    bool is_confirmed(TxId id) const { return is_confirmed(id, params_.confirmation_depth); }
    std::optional<TxReceipt> receipt(TxId id) const;
    const LedgerTransaction& transaction(TxId id) const;
    std::optional<SimTime> inclusion_time(TxId id) const;

    void add_observer(NodeId observer, std::optional<SimTime> delay = std::nullopt);
    void set_view_hook(NodeId observer, ViewHook hook);
    bool has_observer(NodeId observer) const { return observer_index_.contains(observer); }
    SimTime observer_delay(NodeId observer) const;
    ObserverView observer_state(NodeId observer) const;
    ObserverView observer_state(NodeId observer, std::size_t depth) const;

    void on_executed(ExecutedHook hook) { executed_hooks_.push_back(std::move(hook)); }
    void on_block(BlockHook hook) { block_hooks_.push_back(std::move(hook)); }

    std::uint64_t head_height() const { return blocks_.empty() ? 0 : blocks_.back().height; }
    const std::vector<Block>& blocks() const { return blocks_; }
    const Block& block(std::uint64_t height) const { return blocks_.at(height); }
    std::shared_ptr<const BmsState> state_at(std::uint64_t height) const { return states_.at(height); }
    const BmsState& head_state() const { return contract_.state(); }
    const BmsState& genesis_state() const { return *genesis_; }
    const std::map<NodeId, Amount>& rewards() const { return rewards_; }

    const LedgerParams& params() const { return params_; }
    const GasSchedule& gas() const { return gas_; }
    const ClampedNormal& delay_model() const { return delay_model_; }
    SimTime mean_block_interval() const { return interval_mean_; }

    // Fees collected = balance + rewards paid. Throws InvariantViolation otherwise.
    void check_conservation() const;

  private:
    struct Pending {
        TxId id;
        SimTime eligible_at;
    };
    struct Record {
        LedgerTransaction tx;
        std::optional<std::uint64_t> height;
        TxReceipt receipt;
    };
    struct Observer {
        NodeId node;
        SimTime delay;
        std::uint64_t visible = 0;
        bool seen_any = false;
        ViewHook hook;
    };

    void produce_block();
    void schedule_next_block();
    ExecutedTx execute(TxId id, std::uint64_t height, SimTime at);
    const Observer& observer(NodeId node) const;

    sim::Simulator& sim_;
    LedgerParams params_;
    GasSchedule gas_;
    BmsContract contract_;
    ClampedNormal delay_model_;
    double interval_mean_ = 0.0;
    std::mt19937_64 block_rng_;
    std::mt19937_64 tx_rng_;
    std::mt19937_64 observer_rng_;
    bool running_ = false;
    bool started_ = false;

    std::vector<Record> records_;
    std::vector<Pending> pool_;
    std::vector<Block> blocks_;
    std::vector<std::shared_ptr<const BmsState>> states_;
    std::shared_ptr<const BmsState> genesis_;
    std::map<NodeId, Amount> rewards_;
    Amount total_rewards_ = 0;

    std::vector<Observer> observers_;
    std::unordered_map<NodeId, std::size_t> observer_index_;
    std::vector<ExecutedHook> executed_hooks_;
    std::vector<BlockHook> block_hooks_;
};

}  // namespace bms
