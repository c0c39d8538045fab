#pragma once
// Independent reference models used by the unit tests and the acceptance run.
// They deliberately avoid the library's helpers except for plain data types.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "bms/contract.hpp"

namespace oracle {

inline std::size_t faults(std::size_t n) { return n == 0 ? 0 : (n - 1) / 3; }

// Largest d such that every churn of l leaves from the published set and j
// joins with l + j <= d keeps the two sets overlapping in f(pub) + f(local) + 1
// members. Enumerates actual leaver subsets.
inline std::size_t batch_by_member_sets(std::size_t n) {
    const std::size_t f_pub = faults(n);
    auto ok_with = [&](std::size_t d) {
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            std::set<std::uint32_t> pub, local;
            for (std::uint32_t i = 0; i < n; ++i) {
                pub.insert(i);
                if (!(mask & (1u << i))) local.insert(i);
            }
            const std::size_t l = n - local.size();
            if (l > d) continue;
            for (std::size_t j = 0; l + j <= d; ++j) {
                std::set<std::uint32_t> with_joins = local;
                for (std::size_t k = 0; k < j; ++k) with_joins.insert(static_cast<std::uint32_t>(1000 + k));
                if (with_joins.empty()) continue;
                std::size_t common = 0;
                for (auto m : pub) common += with_joins.count(m);
                if (common < f_pub + faults(with_joins.size()) + 1) return false;
            }
        }
        return true;
    };
    std::size_t d = 0;
    while (ok_with(d + 1)) ++d;
    return d;
}

// Same question answered on counts only.
inline std::size_t batch_by_counts(std::size_t n) {
    auto ok_with = [&](std::size_t d) {
        for (std::size_t l = 0; l <= std::min(d, n); ++l) {
            for (std::size_t j = 0; l + j <= d; ++j) {
                if (n - l + j == 0) continue;
                if (n - l < faults(n) + faults(n - l + j) + 1) return false;
            }
        }
        return true;
    };
    std::size_t d = 0;
    while (ok_with(d + 1)) ++d;
    return d;
}

// Literal interpreter of the membership contract on plain containers.
struct RefConfig {
    std::uint64_t number = 0;
    std::vector<std::uint32_t> members;

    bool has(std::uint32_t id) const { return std::find(members.begin(), members.end(), id) != members.end(); }
};

struct RefRegistration {
    std::uint32_t id = 0;
    std::int64_t fee = 0;
    int halves_paid = 0;
};

struct RefState {
    RefConfig cur;
    std::vector<RefRegistration> regs;
    std::vector<std::pair<RefConfig, std::set<std::uint32_t>>> votes;
    std::int64_t balance = 0;
    std::int64_t cost = 0;
    std::int64_t collected = 0;
    std::int64_t paid = 0;
    std::map<std::uint32_t, std::int64_t> rewards;
};

inline bool same_config(const RefConfig& a, const RefConfig& b) { return a.number == b.number && a.members == b.members; }

inline void ref_register(RefState& s, std::uint32_t id, std::int64_t fee) {
    if (fee < s.cost) return;
    for (const auto& r : s.regs) {
        if (r.id == id && r.halves_paid < 2) return;
    }
    s.regs.push_back({id, fee, 0});
    s.balance += fee;
    s.collected += fee;
}

inline void ref_try_updates(RefState& s) {
    for (;;) {
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < s.votes.size(); ++i) {
            const auto& [c, who] = s.votes[i];
            if (c.number <= s.cur.number || who.size() < faults(s.cur.members.size()) + 1) continue;
            if (!pick) {
                pick = i;
                continue;
            }
            const RefConfig& p = s.votes[*pick].first;
            if (c.number > p.number || (c.number == p.number && c.members < p.members)) pick = i;
        }
        if (!pick) return;
        const RefConfig next = s.votes[*pick].first;
        const std::set<std::uint32_t> voters = s.votes[*pick].second;

        std::int64_t reward = 0;
        for (auto& r : s.regs) {
            if (r.halves_paid >= 2) continue;
            if (next.has(r.id) != s.cur.has(r.id)) {
                reward += r.fee / 2;
                ++r.halves_paid;
            }
        }
        const std::int64_t share = reward / static_cast<std::int64_t>(voters.size());
        for (auto p : voters) {
            s.rewards[p] += share;
            s.balance -= share;
            s.paid += share;
        }
        s.cur = next;
        std::vector<std::pair<RefConfig, std::set<std::uint32_t>>> kept;
        for (auto& [c, who] : s.votes) {
            if (c.number <= s.cur.number) continue;
            std::set<std::uint32_t> still;
            for (auto p : who) {
                if (s.cur.has(p)) still.insert(p);
            }
            if (!still.empty()) kept.emplace_back(c, still);
        }
        s.votes = std::move(kept);
    }
}

inline void ref_vote(RefState& s, const RefConfig& c, std::uint32_t voter) {
    if (c.members.empty()) return;
    for (std::size_t i = 1; i < c.members.size(); ++i) {
        if (c.members[i - 1] >= c.members[i]) return;
    }
    if (!s.cur.has(voter) || c.number <= s.cur.number) return;
    for (auto& [k, who] : s.votes) {
        if (same_config(k, c)) {
            if (!who.insert(voter).second) return;
            ref_try_updates(s);
            return;
        }
    }
    s.votes.emplace_back(c, std::set<std::uint32_t>{voter});
    ref_try_updates(s);
}

// True when the library state matches the reference state field by field.
inline bool equivalent(const bms::BmsState& got, const RefState& want) {
    if (got.c_cur.number != want.cur.number) return false;
    std::vector<std::uint32_t> members;
    for (auto m : got.c_cur.members) members.push_back(m.value);
    if (members != want.cur.members) return false;
    if (got.balance != want.balance || got.collected != want.collected || got.paid_out != want.paid) return false;
    if (got.registrations.size() != want.regs.size()) return false;
    for (std::size_t i = 0; i < want.regs.size(); ++i) {
        const auto& g = got.registrations[i];
        const auto& w = want.regs[i];
        const int halves = g.consumed ? 2 : (g.join_paid ? 1 : 0);
        if (g.id.value != w.id || g.fee != w.fee || halves != w.halves_paid) return false;
    }
    if (got.votes.size() != want.votes.size()) return false;
    for (const auto& [c, who] : want.votes) {
        bool found = false;
        for (const auto& [gc, gwho] : got.votes) {
            std::vector<std::uint32_t> gm;
            for (auto m : gc.members) gm.push_back(m.value);
            if (gc.number != c.number || gm != c.members) continue;
            std::set<std::uint32_t> gv;
            for (auto p : gwho) gv.insert(p.value);
            found = gv == who;
            break;
        }
        if (!found) return false;
    }
    return true;
}

// One random register/vote transaction.
struct RandomTx {
    bool is_register = false;
    std::uint32_t node = 0;
    std::int64_t fee = 0;
    RefConfig config;
};

// Sequences over a universe of up to 9 ids with configurations of at most 7 members.
struct SequenceGen {
    std::mt19937_64 rng;
    std::int64_t cost = 100;

    explicit SequenceGen(std::uint64_t seed) : rng(seed) {}

    std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

    RefConfig random_config(std::uint64_t number) {
        RefConfig c;
        c.number = number;
        std::vector<std::uint32_t> ids{0, 1, 2, 3, 4, 5, 6, 7, 8};
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(pick(1, 7));
        std::sort(ids.begin(), ids.end());
        c.members = ids;
        return c;
    }

    std::vector<std::uint32_t> initial() {
        auto c = random_config(0);
        return c.members;
    }

    std::vector<RandomTx> sequence(std::size_t max_len) {
        std::vector<RandomTx> out;
        // A small pool of candidate configurations so votes pile up.
        std::vector<RefConfig> pool;
        for (int i = 0; i < 3; ++i) pool.push_back(random_config(pick(1, 3)));
        const std::size_t len = pick(1, max_len);
        for (std::size_t i = 0; i < len; ++i) {
            RandomTx tx;
            tx.node = static_cast<std::uint32_t>(pick(0, 8));
            if (pick(0, 3) == 0) {
                tx.is_register = true;
                tx.fee = static_cast<std::int64_t>(pick(0, 3) == 0 ? cost - 1 : cost + 2 * pick(0, 50));
            } else {
                if (pick(0, 4) == 0) pool.push_back(random_config(pick(1, 6)));
                tx.config = pool[pick(0, pool.size() - 1)];
            }
            out.push_back(tx);
        }
        return out;
    }
};

inline bms::Configuration to_config(const RefConfig& c) {
    std::vector<bms::NodeId> ids;
    for (auto m : c.members) ids.push_back(bms::NodeId{m});
    return bms::Configuration::make(c.number, ids);
}

}  // namespace oracle
