#include "bms/contract.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace bms {

namespace {

bool well_formed(const Configuration& c) {
    if (c.members.empty()) return false;
    for (std::size_t i = 1; i < c.members.size(); ++i) {
        if (!(c.members[i - 1] < c.members[i])) return false;
    }
    return true;
}

}  // namespace

BmsContract::BmsContract(Configuration c0, Amount cost, VotingMode mode) {
    if (c0.members.empty()) throw std::invalid_argument("initial configuration is empty");
    c0.v = vote_threshold(c0);
    state_.c_cur = std::move(c0);
    state_.cost = cost;
    state_.mode = std::move(mode);
}

bool has_active_registration(const BmsState& s, NodeId id) {
    return std::any_of(s.registrations.begin(), s.registrations.end(),
                       [id](const Registration& r) { return r.id == id && !r.consumed; });
}

bool BmsContract::has_active_registration(NodeId id) const { return bms::has_active_registration(state_, id); }

RegisterResult BmsContract::register_node(NodeId id, Amount fee) {
    if (fee < state_.cost) return RegisterResult::FeeTooLow;
    if (has_active_registration(id)) return RegisterResult::Duplicate;
    state_.registrations.push_back(Registration{id, fee, false, false});
    state_.balance += fee;
    state_.collected += fee;
    if (auto* weighted = std::get_if<StakeWeighted>(&state_.mode)) weighted->stakes.try_emplace(id, fee);
    return RegisterResult::Accepted;
}

VoteOutcome BmsContract::vote(const Configuration& c, NodeId voter) {
    VoteOutcome out;
    if (!well_formed(c)) {
        out.result = VoteResult::Malformed;
        return out;
    }
    if (!state_.c_cur.contains(voter)) {
        out.result = VoteResult::NotMember;
        return out;
    }
    if (c.number <= state_.c_cur.number) {
        out.result = VoteResult::Stale;
        return out;
    }
    auto& voters = state_.votes[c];
    if (voters.contains(voter)) {
        out.result = VoteResult::AlreadyVoted;
        return out;
    }
    out.first_vote = voters.empty();
    voters.insert(voter);
    out.result = VoteResult::Accepted;
    while (auto update = try_update()) out.updates.push_back(std::move(*update));
    return out;
}

bool BmsContract::weighted_vote_threshold_met(const Configuration& c) const {
    const auto* weighted = std::get_if<StakeWeighted>(&state_.mode);
    if (weighted == nullptr) throw std::logic_error("weighted threshold queried in count-voting mode");
    Amount total = 0;
    for (NodeId m : state_.c_cur.members) {
        auto it = weighted->stakes.find(m);
        if (it == weighted->stakes.end()) throw std::logic_error("missing stake entry for " + to_string(m));
        total += it->second;
    }
    Amount voted = 0;
    if (auto it = state_.votes.find(c); it != state_.votes.end()) {
        for (NodeId p : it->second) voted += weighted->stakes.at(p);
    }
    return 3 * voted > total;
}

bool BmsContract::threshold_met(const Configuration& c, const std::set<NodeId>& voters) const {
    if (std::holds_alternative<StakeWeighted>(state_.mode)) return weighted_vote_threshold_met(c);
    return voters.size() >= state_.c_cur.v;
}

std::optional<UpdateOutcome> BmsContract::try_update() {
    const Configuration* chosen = nullptr;
    for (const auto& [c, voters] : state_.votes) {
        if (c.number <= state_.c_cur.number || voters.empty()) continue;
        if (!threshold_met(c, voters)) continue;
        if (chosen == nullptr || c.number > chosen->number) chosen = &c;
    }
    if (chosen == nullptr) return std::nullopt;

    UpdateOutcome out;
    out.previous = state_.c_cur;
    out.installed = *chosen;
    out.installed.v = vote_threshold(out.installed);
    const auto& voters = state_.votes.at(*chosen);
    out.voters.assign(voters.begin(), voters.end());

    for (auto& r : state_.registrations) {
        if (r.consumed) continue;
        const bool in_new = out.installed.contains(r.id);
        const bool in_old = out.previous.contains(r.id);
        if (in_new == in_old) continue;
        out.reward += r.fee / 2;
        if (r.join_paid) {
            r.consumed = true;
        } else {
            r.join_paid = true;
        }
    }
    for (NodeId m : out.installed.members) {
        if (!out.previous.contains(m)) ++out.joined;
    }
    for (NodeId m : out.previous.members) {
        if (!out.installed.contains(m)) ++out.left;
    }

    const Amount share = out.reward / static_cast<Amount>(out.voters.size());
    const Amount payout = share * static_cast<Amount>(out.voters.size());
    if (payout > state_.balance) {
        throw InvariantViolation(fmt::format("membership service balance {} cannot cover reward {}", state_.balance, payout));
    }
    if (share > 0) {
        for (NodeId p : out.voters) out.transfers.push_back(Transfer{p, share});
    }
    state_.balance -= payout;
    state_.paid_out += payout;
    state_.c_cur = out.installed;

    // Drop votes for superseded numbers; votes from retired members no longer count.
    for (auto it = state_.votes.begin(); it != state_.votes.end();) {
        if (it->first.number <= state_.c_cur.number) {
            it = state_.votes.erase(it);
            continue;
        }
        std::erase_if(it->second, [this](NodeId p) { return !state_.c_cur.contains(p); });
        if (it->second.empty()) {
            it = state_.votes.erase(it);
        } else {
            ++it;
        }
    }
    return out;
}

}  // namespace bms
