#include "bms/world.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include <fmt/format.h>

#include "bms/node.hpp"

namespace bms {

namespace {

Bytes pom_bytes(NodeId accused) {
    const std::string s = "pom:" + to_string(accused);
    return Bytes(s.begin(), s.end());
}

sim::NetworkConfig network_config(const ScenarioConfig& s, const sim::Simulator& sim) {
    sim::NetworkConfig c = s.network;
    c.rng_seed = sim.make_rng("network")();
    return c;
}

BmsContract make_contract(const ScenarioConfig& s) {
    if (!s.stake_weighted) return BmsContract(s.c0(), s.cost);
    return BmsContract(s.c0(), s.cost, StakeWeighted{s.stakes});
}

class World {
  public:
    explicit World(const ScenarioConfig& s)
        : s_(s),
          sim_(s.seed),
          auth_(sim_.make_rng("auth")()),
          net_(sim_, auth_, network_config(s, sim_)),
          ledger_(sim_, s.ledger, s.gas, make_contract(s)),
          tob_(sim_, s.tob),
          ctx_{sim_, net_, auth_, ledger_, tob_, NodeParams{}, NodeEvents{}},
          p_(s.p_bound()) {
        for (std::size_t i = 0; i < s_.names.size(); ++i) {
            const NodeId id{static_cast<std::uint32_t>(i)};
            keys_.emplace(id, auth_.enroll(id));
        }
        ctx_.params.policy = s_.policy;
        ctx_.params.registration_depth = s_.skip_confirmation ? 0 : s_.ledger.confirmation_depth;
        ctx_.params.revote_timeout = s_.revote_timeout.value_or(2.0 * s_.confirmation_time());
        ctx_.params.join_timeout = s_.join_timeout.value_or(2.0 * s_.confirmation_time() + 90.0);
        ctx_.params.fee = s_.fee;
        ctx_.params.pom_valid = [](NodeId accused, const Bytes& pom) { return pom == pom_bytes(accused); };
        wire_events();
        ledger_.on_executed([this](const ExecutedTx& e) { on_executed(e); });
        ledger_.on_block([this](const Block&) { check_overlap("block"); });

        const Configuration c0 = s_.c0();
        canonical_.push_back(c0);
        installed_at_.push_back(0.0);
        timeline_.push_back(PublishedConfig{c0, 0.0});
        for (NodeId m : c0.members) create_node(m);
        for (NodeId m : c0.members) nodes_.at(m)->start_member(NodeState::genesis(c0, s_.policy));

        if (s_.client) {
            const NodeId cid{static_cast<std::uint32_t>(s_.names.size())};
            ClientParams cp;
            cp.mode = s_.client->mode;
            cp.p_bound = p_;
            cp.retry_timeout = s_.client->retry_timeout;
            client_ = std::make_unique<Client>(sim_, net_, ledger_, auth_.enroll(cid), c0, cp);
        }
    }

    RunResult run() {
        for (std::size_t i = 0; i < s_.adversary.entries.size(); ++i) {
            const auto& e = s_.adversary.entries[i];
            if (e.trigger.kind == Trigger::Kind::FromStart) {
                fire(i);
            } else if (e.trigger.kind == Trigger::Kind::AtTime) {
                schedule_trigger(i, e.trigger.value);
            }
        }
        if (client_) {
            sim_.schedule(s_.client->bootstrap_at, [this] { client_->bootstrap(); });
            for (const auto& r : s_.client->requests) {
                if (r.trigger != ClientRequestSpec::Trigger::At) continue;
                ++unsent_requests_;
                sim_.schedule(std::max(r.time, s_.client->bootstrap_at), [this, op = r.op] { submit(op); });
            }
        }
        ledger_.start();
        tob_.start();
        sim_.schedule(0.0, [this] { poll(); });

        try {
            sim_.run_until(s_.max_time);
        } catch (const InvariantViolation& e) {
            throw RunFailure(e.what(), sim_.now(), sim_.processed());
        }
        return collect();
    }

  private:
    struct JoinTrack {
        std::optional<TxId> registration;
        std::map<std::uint32_t, SimTime> sent;
        std::uint32_t delivered_attempt = 0;
        std::optional<SimTime> delivered_at;
        std::optional<SimTime> installed_at;
        Configuration installed;
        bool activated = false;
    };

    void fail(const std::string& what) { throw InvariantViolation(what); }

    void create_node(NodeId id) {
        auto node = std::make_unique<BftNode>(ctx_, keys_.at(id));
        if (auto it = waiting_behaviors_.find(id); it != waiting_behaviors_.end()) {
            for (const auto& b : it->second) apply_behaviors(node->behaviors(), b, s_.c0());
            waiting_behaviors_.erase(it);
        }
        nodes_.emplace(id, std::move(node));
    }

    bool correct(NodeId id) const {
        auto it = nodes_.find(id);
        return it != nodes_.end() && !it->second->behaviors().any();
    }

    void wire_events() {
        NodeEvents& ev = ctx_.events;
        ev.registered = [this](NodeId joiner, TxId tx) { joins_[joiner].registration = tx; };
        ev.join_requested = [this](NodeId joiner, std::uint32_t attempt, SimTime at) {
            joins_[joiner].sent[attempt] = at;
        };
        ev.delivered = [this](NodeId, const proto::ReconfigRequest& req, const TobEntry& entry, EnqueueResult r) {
            if (r != EnqueueResult::Enqueued) return;
            if (const auto* j = std::get_if<proto::JoinRequest>(&req)) {
                JoinTrack& t = joins_[j->proof.subject];
                t.delivered_attempt = j->attempt;
                t.delivered_at = entry.delivered_at;
            }
        };
        ev.installed = [this](NodeId, const Installed& step, SimTime at) { on_installed(step, at); };
        ev.executed = [this](NodeId node, const proto::AppOperation& op, const Bytes& result) {
            if (correct(node)) honest_[{op.client, op.request_id}] = result;
        };
        ev.activated = [this](NodeId joiner, SimTime at) { on_activated(joiner, at); };
    }

    void on_installed(const Installed& step, SimTime at) {
        const Configuration& c = step.config;
        if (c.number < canonical_.size()) {
            if (canonical_[c.number] != c) {
                fail(fmt::format("replicas disagree on configuration {}: {} vs {}", c.number,
                                 to_string(canonical_[c.number]), to_string(c)));
            }
        } else if (c.number == canonical_.size()) {
            if (symmetric_difference(canonical_.back(), c) != 1) {
                fail(fmt::format("step to {} changes more than one member", to_string(c)));
            }
            canonical_.push_back(c);
            installed_at_.push_back(at);
            check_overlap("install");
        } else {
            fail(fmt::format("configuration {} installed before {}", c.number, canonical_.size()));
        }
        if (proto::adds_member(step.request.request)) {
            JoinTrack& t = joins_[proto::subject(step.request.request)];
            if (!t.installed_at) {
                t.installed_at = at;
                t.installed = c;
            }
        }
    }

    void on_activated(NodeId joiner, SimTime at) {
        JoinTrack& t = joins_[joiner];
        if (t.activated) return;
        t.activated = true;
        if (!t.registration || !t.delivered_at || !t.installed_at) fail("join of " + to_string(joiner) + " skipped a phase");
        const auto included = ledger_.inclusion_time(*t.registration);
        auto sent = t.sent.find(t.delivered_attempt);
        if (!included || sent == t.sent.end()) fail("join of " + to_string(joiner) + " has no request send time");

        JoinRecord r;
        r.node = joiner;
        r.size = t.installed.size();
        r.t = policy_threshold(s_.policy, t.installed);
        r.tx_latency = *included - ledger_.transaction(*t.registration).submitted_at;
        r.confirm_latency = sent->second - *included;
        if (s_.skip_confirmation) {
            r.confirm_latency += static_cast<double>(s_.ledger.confirmation_depth) * ledger_.mean_block_interval();
        }
        r.ordering_latency = *t.delivered_at - sent->second;
        r.checkpoint_latency = *t.installed_at - *t.delivered_at;
        r.activated_at = at;
        if (r.tx_latency < 0 || r.confirm_latency < 0 || r.ordering_latency < 0 || r.checkpoint_latency < 0) {
            fail("negative join phase for " + to_string(joiner));
        }
        result_.joins.push_back(r);
    }

    void on_executed(const ExecutedTx& e) {
        if (const auto* reg = std::get_if<RegisterTx>(&e.tx->body)) {
            (void)reg;
            result_.registration_latencies.push_back(e.block_time - e.tx->submitted_at);
            return;
        }
        const auto& vote = std::get<VoteTx>(e.tx->body);
        if (!e.vote || !e.vote->accepted()) return;
        VoteRecord v;
        v.size = vote.config.size();
        v.config_number = vote.config.number;
        v.gas = e.receipt.gas_used;
        v.first = e.vote->first_vote;
        v.update = !e.vote->updates.empty();
        v.voter = vote.voter;
        v.at = e.block_time;
        result_.votes.push_back(v);
        vote_gas_[vote.config] += e.receipt.gas_used;

        for (const auto& u : e.vote->updates) on_update(u, e.block_time);
    }

    void on_update(const UpdateOutcome& u, SimTime at) {
        if (u.installed.number <= u.previous.number) fail("published configuration number went backwards");
        for (NodeId voter : u.voters) {
            if (!u.previous.contains(voter)) fail(fmt::format("{} voted without being in {}", to_string(voter), to_string(u.previous)));
        }
        if (!s_.stake_weighted && u.voters.size() < vote_threshold(u.previous)) {
            fail(fmt::format("{} installed with {} votes", to_string(u.installed), u.voters.size()));
        }
        if (u.installed.number < canonical_.size() && canonical_[u.installed.number] != u.installed) {
            fail(fmt::format("published {} was never agreed", to_string(u.installed)));
        }

        UpdateRecord r;
        r.config_number = u.installed.number;
        r.previous_size = u.previous.size();
        r.size = u.installed.size();
        r.joiners = u.joined;
        r.leavers = u.left;
        r.voters = u.voters.size();
        r.total_gas = vote_gas_[u.installed];
        r.usd = usd_cost(r.total_gas, s_.price);
        r.at = at;
        result_.updates.push_back(r);
        for (auto it = vote_gas_.begin(); it != vote_gas_.end();) {
            it = it->first.number <= u.installed.number ? vote_gas_.erase(it) : std::next(it);
        }

        timeline_.push_back(PublishedConfig{u.installed, at});
        for (std::size_t i = 0; i < s_.adversary.entries.size(); ++i) {
            const auto& entry = s_.adversary.entries[i];
            if (entry.trigger.kind != Trigger::Kind::AfterRetirement || scheduled_.contains(i)) continue;
            const SimTime when = corruption_time(entry, timeline_, p_);
            if (when != kNever) schedule_trigger(i, when);
        }
        check_overlap("publish");
    }

    void check_overlap(const char* where) {
        if (s_.bypass_validation) return;
        const Configuration& published = ledger_.head_state().c_cur;
        if (!overlap_ok(published, canonical_.back())) {
            fail(fmt::format("published {} and local {} no longer overlap ({})", to_string(published),
                             to_string(canonical_.back()), where));
        }
    }

    void schedule_trigger(std::size_t i, SimTime at) {
        scheduled_.insert(i);
        sim_.schedule(std::max(at, sim_.now()), [this, i] {
            fire(i);
            ++fired_;
        });
    }

    void fire(std::size_t i) {
        const auto& e = s_.adversary.entries[i];
        if (auto it = nodes_.find(e.node); it != nodes_.end()) {
            apply_behaviors(it->second->behaviors(), e.behaviors, s_.c0());
        } else {
            waiting_behaviors_[e.node].push_back(e.behaviors);
        }
    }

    void submit(std::int64_t op) {
        --unsent_requests_;
        client_->submit(op);
    }

    BftNode* reference() {
        for (NodeId m : canonical_.back().members) {
            auto it = nodes_.find(m);
            if (it != nodes_.end() && it->second->active() && !it->second->behaviors().any()) return it->second.get();
        }
        return nullptr;
    }

    bool ready() {
        BftNode* ref = reference();
        if (ref == nullptr) return false;
        const NodeState& st = ref->state();
        return st.pending.empty() &&
               symmetric_difference(ref->latest(), st.c_cur) < policy_threshold(s_.policy, st.c_cur);
    }

    // Everything the policy requires to be published is published.
    bool settled() {
        const Configuration& published = ledger_.head_state().c_cur;
        if (published == canonical_.back()) return true;
        BftNode* ref = reference();
        if (ref == nullptr) return false;
        const NodeState& st = ref->state();
        return published.number >= st.c_last_voted.number &&
               symmetric_difference(st.c_last_voted, st.c_cur) < policy_threshold(s_.policy, st.c_cur);
    }

    bool step_done(const ChurnStep& step) const {
        if (step.op == ChurnStep::Op::Join) {
            auto it = joins_.find(step.node);
            return it != joins_.end() && it->second.activated;
        }
        return !canonical_.back().contains(step.node);
    }

    void start_step(const ChurnStep& step) {
        switch (step.op) {
            case ChurnStep::Op::Join:
                if (!nodes_.contains(step.node)) create_node(step.node);
                nodes_.at(step.node)->start_join();
                break;
            case ChurnStep::Op::Leave: nodes_.at(step.node)->request_leave(); break;
            case ChurnStep::Op::Evict: {
                BftNode* ref = reference();
                if (ref == nullptr) fail("no correct member left to propose an eviction");
                Bytes pom = step.pom_valid ? pom_bytes(step.node) : Bytes{'n', 'o'};
                ref->propose_evict(step.node, std::move(pom));
                break;
            }
        }
        if (step.op != ChurnStep::Op::Join) result_.has_leaves = true;
    }

    void poll() {
        const SimTime now = sim_.now();
        bool all_done = true;
        for (std::size_t i = 0; i < next_step_; ++i) all_done = all_done && step_done(s_.churn[i]);

        while (next_step_ < s_.churn.size()) {
            const ChurnStep& step = s_.churn[next_step_];
            if (step.at && now < *step.at) break;
            if (step.wait && (!all_done || !ready())) break;
            start_step(step);
            ++next_step_;
            if (step.wait) break;
        }

        bool churn_done = next_step_ == s_.churn.size();
        for (std::size_t i = 0; churn_done && i < next_step_; ++i) churn_done = step_done(s_.churn[i]);
        if (churn_done && !final_publish_ && settled()) {
            final_publish_ = timeline_.back().published_at;
            if (client_) {
                for (const auto& r : s_.client->requests) {
                    if (r.trigger != ClientRequestSpec::Trigger::AfterFinalPublish) continue;
                    ++unsent_requests_;
                    const SimTime at = std::max(now, *final_publish_ + p_ + r.time);
                    sim_.schedule(at, [this, op = r.op] { submit(op); });
                }
            }
        }
        const bool client_done = !client_ || (unsent_requests_ == 0 && !client_->waiting());
        if (churn_done && final_publish_ && client_done && fired_ == scheduled_.size()) {
            result_.churn_complete = true;
            sim_.stop();
            return;
        }
        sim_.schedule_after(1.0, [this] { poll(); });
    }

    RunResult collect() {
        RunResult& r = result_;
        r.scenario = s_.name;
        r.seed = s_.seed;
        r.churn_complete = r.churn_complete || (next_step_ == s_.churn.size() && std::all_of(
                                                    s_.churn.begin(), s_.churn.end(),
                                                    [this](const ChurnStep& c) { return step_done(c); }));
        std::map<std::uint64_t, SimTime> published;
        for (const auto& p : timeline_) published.emplace(p.config.number, p.published_at);
        for (std::size_t i = 0; i < canonical_.size(); ++i) {
            ConfigRecord c;
            c.number = canonical_[i].number;
            c.size = canonical_[i].size();
            c.installed_at = installed_at_[i];
            if (auto it = published.find(c.number); it != published.end()) c.published_at = it->second;
            r.configs.push_back(c);
        }
        if (client_) {
            r.acceptances = client_->accepted();
            for (const auto& a : r.acceptances) {
                auto it = honest_.find({client_->id(), a.request_id});
                if (it == honest_.end() || it->second != a.result) ++r.forged_acceptances;
            }
        }
        r.timeline = timeline_;
        r.schedule_violation = validate_schedule(s_.adversary, timeline_);
        r.final_local = canonical_.back();
        r.final_published = ledger_.head_state().c_cur;
        r.end_time = sim_.now();
        r.events = sim_.processed();
        r.trace_digest = sim_.trace_digest();
        return std::move(r);
    }

    const ScenarioConfig& s_;
    sim::Simulator sim_;
    sim::Authenticator auth_;
    sim::Network net_;
    Ledger ledger_;
    TotalOrderBroadcast tob_;
    NodeContext ctx_;
    SimTime p_;
    std::map<NodeId, sim::SigningKey> keys_;
    std::map<NodeId, std::unique_ptr<BftNode>> nodes_;
    std::unique_ptr<Client> client_;

    std::vector<Configuration> canonical_;
    std::vector<SimTime> installed_at_;
    std::vector<PublishedConfig> timeline_;
    std::map<NodeId, JoinTrack> joins_;
    std::map<Configuration, Gas> vote_gas_;
    std::map<std::pair<NodeId, std::uint64_t>, Bytes> honest_;
    std::map<NodeId, std::vector<std::vector<Behavior>>> waiting_behaviors_;
    std::set<std::size_t> scheduled_;
    std::size_t fired_ = 0;
    std::size_t next_step_ = 0;
    std::size_t unsent_requests_ = 0;
    std::optional<SimTime> final_publish_;
    RunResult result_;
};

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

RunResult run_scenario(const ScenarioConfig& s) {
    validate_scenario(s);
    World world(s);
    return world.run();
}

std::string joins_csv(const RunResult& r) {
    std::string out = "size,t,tx_latency_s,confirm_latency_s,ordering_latency_s,checkpoint_latency_s\n";
    for (const auto& j : r.joins) {
        out += fmt::format("{},{},{},{},{},{}\n", j.size, j.t, fixed(j.tx_latency), fixed(j.confirm_latency),
                           fixed(j.ordering_latency), fixed(j.checkpoint_latency));
    }
    return out;
}

std::string votes_csv(const RunResult& r) {
    std::string out = "size,config_number,gas_used,is_first_vote,is_update_vote\n";
    for (const auto& v : r.votes) {
        out += fmt::format("{},{},{},{},{}\n", v.size, v.config_number, v.gas, v.first ? 1 : 0, v.update ? 1 : 0);
    }
    return out;
}

std::string updates_csv(const RunResult& r) {
    std::string out = "size,joiners,total_gas,gas_per_join,usd_per_join\n";
    for (const auto& u : r.updates) {
        if (u.joiners == 0) {
            out += fmt::format("{},0,{},,\n", u.size, u.total_gas);
            continue;
        }
        const double k = static_cast<double>(u.joiners);
        out += fmt::format("{},{},{},{:.2f},{:.4f}\n", u.size, u.joiners, u.total_gas,
                           static_cast<double>(u.total_gas) / k, u.usd / k);
    }
    return out;
}

std::string configs_csv(const RunResult& r) {
    std::string out = "config_number,size,installed_at_s,published_at_s\n";
    for (const auto& c : r.configs) {
        out += fmt::format("{},{},{},{}\n", c.number, c.size, fixed(c.installed_at),
                           c.published_at ? fixed(*c.published_at) : "");
    }
    return out;
}

void write_csvs(const RunResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& body) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error(fmt::format("cannot write {}", (dir / name).string()));
        out << body;
    };
    put("joins.csv", joins_csv(r));
    put("votes.csv", votes_csv(r));
    put("updates.csv", updates_csv(r));
    put("configs.csv", configs_csv(r));
}

}  // namespace bms
