#include "bms/adversary.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include <fmt/format.h>

namespace bms {

namespace {

constexpr std::array<std::string_view, 10> kMessageKinds = {
    "register_announce", "register_confirm", "join_request",    "leave_request", "evict_request",
    "final_response",    "client_request",   "client_response", "config_query",  "config_reply",
};

}  // namespace

std::string to_string(BehaviorKind k) {
    switch (k) {
        case BehaviorKind::Silent: return "silent";
        case BehaviorKind::ForgeConfigResponse: return "forge_config_response";
        case BehaviorKind::WithholdVote: return "withhold_vote";
        case BehaviorKind::VoteBogus: return "vote_bogus";
        case BehaviorKind::DropMessages: return "drop_messages";
        case BehaviorKind::StaleQuorum: return "stale_quorum";
    }
    return "?";
}

std::string ScheduleViolation::describe() const {
    return fmt::format("configuration {} has {} faulty members at t={:.3f}s, more than f={}", to_string(config), count,
                       instant, f);
}

std::size_t message_kind(std::string_view name) {
    auto it = std::find(kMessageKinds.begin(), kMessageKinds.end(), name);
    if (it == kMessageKinds.end()) throw std::invalid_argument(fmt::format("unknown message kind '{}'", name));
    return static_cast<std::size_t>(it - kMessageKinds.begin());
}

SimTime corruption_time(const CorruptionEntry& e, const std::vector<PublishedConfig>& timeline, SimTime grace_p) {
    switch (e.trigger.kind) {
        case Trigger::Kind::AtTime: return e.trigger.value;
        case Trigger::Kind::FromStart: return 0.0;
        case Trigger::Kind::AfterRetirement: break;
    }
    bool member = false;
    for (const auto& p : timeline) {
        if (p.config.contains(e.node)) {
            member = true;
        } else if (member) {
            return p.published_at + grace_p + e.trigger.value;
        }
    }
    return kNever;
}

std::optional<ScheduleViolation> validate_schedule(const CorruptionSchedule& s,
                                                   const std::vector<PublishedConfig>& timeline) {
    std::vector<SimTime> when;
    when.reserve(s.entries.size());
    for (const auto& e : s.entries) when.push_back(corruption_time(e, timeline, s.grace_p));

    for (std::size_t k = 0; k < timeline.size(); ++k) {
        SimTime protect_end = kNever;
        for (std::size_t j = k + 1; j < timeline.size(); ++j) {
            protect_end = std::min(protect_end, timeline[j].published_at + s.grace_p);
        }
        const Configuration& c = timeline[k].config;
        // Earliest corruption per member of C_k.
        std::vector<SimTime> faulty;
        for (NodeId m : c.members) {
            SimTime first = kNever;
            for (std::size_t i = 0; i < s.entries.size(); ++i) {
                if (s.entries[i].node == m) first = std::min(first, when[i]);
            }
            if (first < protect_end) faulty.push_back(first);
        }
        const std::size_t f = max_faults(c);
        if (faulty.size() > f) {
            std::sort(faulty.begin(), faulty.end());
            return ScheduleViolation{c, std::max(faulty[f], timeline[k].published_at), faulty.size(), f};
        }
    }
    return std::nullopt;
}

void apply_behaviors(Behaviors& target, const std::vector<Behavior>& behaviors, const Configuration& fallback) {
    for (const auto& b : behaviors) {
        switch (b.kind) {
            case BehaviorKind::Silent: target.silent = true; break;
            case BehaviorKind::WithholdVote: target.withhold_vote = true; break;
            case BehaviorKind::VoteBogus: target.vote_bogus = b.config.value_or(fallback); break;
            case BehaviorKind::DropMessages:
                for (const auto& d : b.drop) {
                    if (d == "all") {
                        target.drop_all = true;
                    } else {
                        target.drop_kinds.insert(message_kind(d));
                    }
                }
                break;
            case BehaviorKind::StaleQuorum:
                target.stale_quorum = true;
                if (!b.forged_state.empty()) target.forged_state = b.forged_state;
                break;
            case BehaviorKind::ForgeConfigResponse:
                target.forge_config = b.config.value_or(fallback);
                if (!b.forged_state.empty()) target.forged_state = b.forged_state;
                break;
        }
    }
    if (target.forged_state.empty() && (target.stale_quorum || target.forge_config)) {
        const std::string s = "forged-state";
        target.forged_state.assign(s.begin(), s.end());
    }
}

}  // namespace bms
