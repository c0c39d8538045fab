#include "bms/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "bms/codec.hpp"

namespace bms {

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// E[max(0, Y)] / sigma and E[max(0, Y)^2] / sigma^2 for Y ~ N(r sigma, sigma).
double g_of(double r) { return r * Phi(r) + phi(r); }
double h_of(double r) { return (r * r + 1.0) * Phi(r) + r * phi(r); }

}  // namespace

void validate(const GasSchedule& g) {
    const Gas fields[] = {g.g_base,        g.g_vote_store, g.g_first_vote_init,       g.g_update_fixed,
                          g.g_update_per_member, g.g_register, g.refund_per_freed_member, g.g_vote_per_member};
    for (Gas v : fields) {
        if (v < 0) throw std::invalid_argument("gas schedule constants must be non-negative");
    }
    if (g.g_base <= 0) throw std::invalid_argument("gas.g_base must be positive");
}

void validate(const PriceModel& pm) {
    if (!(pm.gas_price_gwei > 0.0) || !(pm.eth_usd > 0.0)) throw std::invalid_argument("price model must be positive");
}

double usd_cost(Gas gas, const PriceModel& pm) {
    return static_cast<double>(gas) * pm.gas_price_gwei * 1e-9 * pm.eth_usd;
}

Gas register_gas(const GasSchedule& g, RegisterResult result) {
    return result == RegisterResult::Accepted ? g.g_base + g.g_register : g.g_base;
}

Gas vote_gas(const GasSchedule& g, const VoteOutcome& outcome, std::size_t members) {
    Gas gas = g.g_base + g.g_vote_per_member * static_cast<Gas>(members);
    if (!outcome.accepted()) return gas;
    gas += g.g_vote_store;
    if (outcome.first_vote) gas += g.g_first_vote_init;
    Gas refund = 0;
    for (const auto& u : outcome.updates) {
        gas += g.g_update_fixed + g.g_update_per_member * static_cast<Gas>(u.joined + u.left);
        const std::size_t before = u.previous.size();
        const std::size_t after = u.installed.size();
        if (before > after) refund += g.refund_per_freed_member * static_cast<Gas>(before - after);
    }
    return gas - std::min(refund, gas / 2);
}

Bytes encode(const LedgerTransaction& tx) {
    Writer w;
    if (const auto* r = std::get_if<RegisterTx>(&tx.body)) {
        w.u8(0).node(r->node).i64(r->fee);
    } else {
        const auto& v = std::get<VoteTx>(tx.body);
        w.u8(1).config(v.config).node(v.voter);
    }
    w.node(tx.submitter).f64(tx.submitted_at).i64(tx.attached_funds);
    return std::move(w).take();
}

LedgerTransaction decode_transaction(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    LedgerTransaction tx;
    switch (r.u8()) {
        case 0: {
            RegisterTx reg;
            reg.node = r.node();
            reg.fee = r.i64();
            tx.body = reg;
            break;
        }
        case 1: {
            VoteTx vote;
            vote.config = r.config();
            vote.voter = r.node();
            tx.body = std::move(vote);
            break;
        }
        default:
            throw DecodeError("unknown transaction kind");
    }
    tx.submitter = r.node();
    tx.submitted_at = r.f64();
    tx.attached_funds = r.i64();
    r.expect_done();
    return tx;
}

double ClampedNormal::mean() const {
    if (sigma <= 0.0) return std::max(0.0, mu);
    return sigma * g_of(mu / sigma);
}

double ClampedNormal::sd() const {
    if (sigma <= 0.0) return 0.0;
    const double r = mu / sigma;
    const double g = g_of(r);
    return sigma * std::sqrt(std::max(0.0, h_of(r) - g * g));
}

ClampedNormal clamped_normal_with_moments(double mean, double sd) {
    if (!(mean > 0.0) || sd < 0.0) throw std::invalid_argument("clamped normal needs a positive mean");
    if (sd == 0.0) return {mean, 0.0};
    const double target = (sd / mean) * (sd / mean);
    auto cv2 = [](double r) {
        const double g = g_of(r);
        return h_of(r) / (g * g) - 1.0;
    };
    // cv2 decreases in r.
    double lo = -8.0;
    double hi = 60.0;
    if (cv2(lo) < target) throw std::invalid_argument("coefficient of variation too large for a clamped normal");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (cv2(mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double r = 0.5 * (lo + hi);
    const double sigma = mean / g_of(r);
    return {r * sigma, sigma};
}

void validate(const LedgerParams& p) {
    if (!(p.block_interval_mean > 0.0)) throw std::invalid_argument("ledger.block_interval_mean must be positive");
    if (p.block_interval_sd < 0.0) throw std::invalid_argument("ledger.block_interval_sd must be non-negative");
    if (!(p.block_interval_min > 0.0)) throw std::invalid_argument("ledger.block_interval_min must be positive");
    if (p.block_interval_sd == 0.0 && p.block_interval_mean < p.block_interval_min) {
        throw std::invalid_argument("ledger.block_interval_mean below block_interval_min");
    }
    if (p.tx_latency_mean < 0.0 || p.tx_latency_sd < 0.0) throw std::invalid_argument("ledger.tx_latency must be non-negative");
    if (p.observer_delay_max < 0.0) throw std::invalid_argument("ledger.observer_delay_max must be non-negative");
}

namespace {

// Raw moments E[I], E[I^2], E[I^3] of the block interval.
std::tuple<double, double, double> interval_raw_moments(const LedgerParams& p) {
    if (p.block_interval_sd == 0.0) {
        const double x = p.block_interval_mean;
        return {x, x * x, x * x * x};
    }
    // Simpson integration of the truncated density.
    const double a = std::max(p.block_interval_min, p.block_interval_mean - 12.0 * p.block_interval_sd);
    const double b = p.block_interval_mean + 12.0 * p.block_interval_sd;
    const int n = 20000;
    const double h = (b - a) / n;
    double z = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = a + h * i;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double d = w * phi((x - p.block_interval_mean) / p.block_interval_sd);
        z += d;
        s1 += d * x;
        s2 += d * x * x;
        s3 += d * x * x * x;
    }
    return {s1 / z, s2 / z, s3 / z};
}

}  // namespace

std::pair<double, double> block_interval_moments(const LedgerParams& p) {
    [[maybe_unused]] const auto [m1, m2, m3] = interval_raw_moments(p);
    return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

ClampedNormal inclusion_delay_model(const LedgerParams& p) {
    const auto [m1, m2, m3] = interval_raw_moments(p);
    // Residual wait until the next block seen from an independent instant.
    const double wait_mean = m2 / (2.0 * m1);
    const double wait_var = m3 / (3.0 * m1) - wait_mean * wait_mean;
    const double mean = p.tx_latency_mean - wait_mean;
    const double var = p.tx_latency_sd * p.tx_latency_sd - wait_var;
    if (mean <= 0.0) return {0.0, 0.0};
    if (var <= 0.0) return {mean, 0.0};
    return clamped_normal_with_moments(mean, std::sqrt(var));
}

Ledger::Ledger(sim::Simulator& sim, LedgerParams params, GasSchedule gas, BmsContract contract)
    : sim_(sim),
      params_(params),
      gas_(gas),
      contract_(std::move(contract)),
      block_rng_(sim.make_rng("ledger.blocks")),
      tx_rng_(sim.make_rng("ledger.tx")),
      observer_rng_(sim.make_rng("ledger.observers")) {
    validate(params_);
    validate(gas_);
    delay_model_ = inclusion_delay_model(params_);
    interval_mean_ = block_interval_moments(params_).first;
    genesis_ = std::make_shared<const BmsState>(contract_.state());
}

void Ledger::start() {
    if (started_) throw std::logic_error("ledger already started");
    started_ = true;
    running_ = true;
    produce_block();
}

TxId Ledger::submit_tx(LedgerTransaction tx) {
    tx.submitted_at = sim_.now();
    const TxId id = records_.size();
    double delay = delay_model_.mu;
    if (delay_model_.sigma > 0.0) {
        std::normal_distribution<double> dist(delay_model_.mu, delay_model_.sigma);
        delay = dist(tx_rng_);
    }
    delay = std::max(0.0, delay);
    records_.push_back(Record{std::move(tx), std::nullopt, {}});
    pool_.push_back(Pending{id, sim_.now() + delay});
    return id;
}

TxId Ledger::submit_register(const sim::SigningKey& key, Amount fee) {
    LedgerTransaction tx;
    tx.body = RegisterTx{key.node(), fee};
    tx.submitter = key.node();
    tx.attached_funds = fee;
    return submit_tx(std::move(tx));
}

TxId Ledger::submit_vote(const sim::SigningKey& key, const Configuration& c) {
    LedgerTransaction tx;
    tx.body = VoteTx{c, key.node()};
    tx.submitter = key.node();
    return submit_tx(std::move(tx));
}

bool Ledger::is_confirmed(TxId id, std::size_t depth) const {
    if (id >= records_.size()) throw std::invalid_argument(fmt::format("unknown transaction {}", id));
    const auto& h = records_[id].height;
    return h.has_value() && head_height() - *h >= depth;
}

std::optional<TxReceipt> Ledger::receipt(TxId id) const {
    if (id >= records_.size()) throw std::invalid_argument(fmt::format("unknown transaction {}", id));
    if (!records_[id].height) return std::nullopt;
    return records_[id].receipt;
}

const LedgerTransaction& Ledger::transaction(TxId id) const {
    if (id >= records_.size()) throw std::invalid_argument(fmt::format("unknown transaction {}", id));
    return records_[id].tx;
}

std::optional<SimTime> Ledger::inclusion_time(TxId id) const {
    if (id >= records_.size()) throw std::invalid_argument(fmt::format("unknown transaction {}", id));
    if (!records_[id].height) return std::nullopt;
    return blocks_[*records_[id].height].produced_at;
}

void Ledger::add_observer(NodeId node, std::optional<SimTime> delay) {
    if (observer_index_.contains(node)) return;
    SimTime d;
    if (delay) {
        if (*delay < 0.0) throw std::invalid_argument("observer delay must be non-negative");
        d = *delay;
    } else {
        std::uniform_real_distribution<double> dist(0.0, params_.observer_delay_max);
        d = params_.observer_delay_max > 0.0 ? dist(observer_rng_) : 0.0;
    }
    observer_index_.emplace(node, observers_.size());
    observers_.push_back(Observer{node, d, 0, false, {}});
}

void Ledger::set_view_hook(NodeId node, ViewHook hook) {
    auto it = observer_index_.find(node);
    if (it == observer_index_.end()) throw std::invalid_argument("unknown observer " + to_string(node));
    observers_[it->second].hook = std::move(hook);
}

const Ledger::Observer& Ledger::observer(NodeId node) const {
    auto it = observer_index_.find(node);
    if (it == observer_index_.end()) throw std::invalid_argument("unknown observer " + to_string(node));
    return observers_[it->second];
}

SimTime Ledger::observer_delay(NodeId node) const { return observer(node).delay; }

ObserverView Ledger::observer_state(NodeId node) const { return observer_state(node, params_.confirmation_depth); }

ObserverView Ledger::observer_state(NodeId node, std::size_t depth) const {
    const Observer& o = observer(node);
    ObserverView view;
    view.state = genesis_;
    const SimTime now = sim_.now();
    // Blocks are ordered by production time; find the last one this observer has learned.
    auto it = std::upper_bound(blocks_.begin(), blocks_.end(), now,
                               [&](SimTime t, const Block& b) { return t < b.produced_at + o.delay; });
    if (it == blocks_.begin()) return view;
    view.visible_height = std::prev(it)->height;
    if (view.visible_height >= depth) {
        view.confirmed_height = view.visible_height - depth;
        view.state = states_[*view.confirmed_height];
    }
    return view;
}

void Ledger::schedule_next_block() {
    double interval = params_.block_interval_mean;
    if (params_.block_interval_sd > 0.0) {
        std::normal_distribution<double> dist(params_.block_interval_mean, params_.block_interval_sd);
        do {
            interval = dist(block_rng_);
        } while (interval < params_.block_interval_min);
    }
    sim_.schedule_after(interval, [this] {
        if (running_) produce_block();
    });
}

ExecutedTx Ledger::execute(TxId id, std::uint64_t height, SimTime at) {
    Record& rec = records_[id];
    ExecutedTx out;
    out.id = id;
    out.tx = &rec.tx;
    out.block_time = at;
    TxReceipt receipt;
    receipt.included_height = height;
    if (const auto* reg = std::get_if<RegisterTx>(&rec.tx.body)) {
        RegisterResult result = RegisterResult::FeeTooLow;
        if (reg->node == rec.tx.submitter && rec.tx.attached_funds == reg->fee) {
            result = contract_.register_node(reg->node, reg->fee);
            receipt.gas_used = register_gas(gas_, result);
        } else {
            receipt.gas_used = gas_.g_base;
        }
        receipt.accepted = result == RegisterResult::Accepted;
        out.registration = result;
    } else {
        const auto& vote = std::get<VoteTx>(rec.tx.body);
        VoteOutcome outcome;
        if (vote.voter == rec.tx.submitter && rec.tx.attached_funds == 0) outcome = contract_.vote(vote.config, vote.voter);
        receipt.gas_used = vote_gas(gas_, outcome, vote.config.members.size());
        receipt.accepted = outcome.accepted();
        for (const auto& u : outcome.updates) {
            for (const auto& t : u.transfers) {
                rewards_[t.to] += t.amount;
                total_rewards_ += t.amount;
            }
        }
        out.vote = std::move(outcome);
    }
    rec.height = height;
    rec.receipt = receipt;
    out.receipt = receipt;
    return out;
}

void Ledger::produce_block() {
    const SimTime now = sim_.now();
    Block block;
    block.height = blocks_.size();
    block.produced_at = now;
    if (!blocks_.empty() && !(now > blocks_.back().produced_at)) {
        throw InvariantViolation("block production time did not advance");
    }

    std::vector<TxId> included;
    std::vector<Pending> remaining;
    for (const auto& p : pool_) {
        if (p.eligible_at <= now) {
            included.push_back(p.id);
        } else {
            remaining.push_back(p);
        }
    }
    pool_ = std::move(remaining);

    std::vector<ExecutedTx> executed;
    bool changed = false;
    for (TxId id : included) {
        executed.push_back(execute(id, block.height, now));
        changed = changed || executed.back().receipt.accepted;
        block.txs.push_back(id);
        block.receipts.push_back(executed.back().receipt);
    }
    if (changed || states_.empty()) {
        states_.push_back(std::make_shared<const BmsState>(contract_.state()));
    } else {
        states_.push_back(states_.back());
    }
    blocks_.push_back(std::move(block));
    check_conservation();

    for (const auto& e : executed) {
        for (const auto& hook : executed_hooks_) hook(e);
    }
    for (const auto& hook : block_hooks_) hook(blocks_.back());
    const std::uint64_t height = blocks_.back().height;
    for (std::size_t i = 0; i < observers_.size(); ++i) {
        if (!observers_[i].hook) continue;
        sim_.schedule(now + observers_[i].delay, [this, i, height] {
            Observer& o = observers_[i];
            if (o.seen_any && height <= o.visible) return;
            o.visible = height;
            o.seen_any = true;
            if (o.hook) o.hook(height);
        });
    }
    if (running_) schedule_next_block();
}

void Ledger::check_conservation() const {
    const BmsState& s = contract_.state();
    if (s.balance < 0) throw InvariantViolation("membership service balance went negative");
    if (s.collected != s.balance + s.paid_out || s.paid_out != total_rewards_) {
        throw InvariantViolation(fmt::format("conservation broken: collected {} balance {} paid {} transferred {}",
                                             s.collected, s.balance, s.paid_out, total_rewards_));
    }
}

}  // namespace bms
