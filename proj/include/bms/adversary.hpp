#pragma once

#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bms/membership.hpp"
#include "bms/node.hpp"
#include "bms/types.hpp"

namespace bms {

enum class BehaviorKind { Silent, ForgeConfigResponse, WithholdVote, VoteBogus, DropMessages, StaleQuorum };

std::string to_string(BehaviorKind k);

struct Behavior {
    BehaviorKind kind = BehaviorKind::Silent;
    // VoteBogus target, or the configuration claimed by ForgeConfigResponse.
    std::optional<Configuration> config;
    // DropMessages pattern: message kind names, or "all".
    std::vector<std::string> drop;
    Bytes forged_state;
};

struct Trigger {
    enum class Kind { AtTime, FromStart, AfterRetirement };
    Kind kind = Kind::FromStart;
    // Absolute time for AtTime, extra delay beyond the grace period for AfterRetirement.
    SimTime value = 0.0;
};

struct CorruptionEntry {
    NodeId node;
    Trigger trigger;
    std::vector<Behavior> behaviors;
};

struct CorruptionSchedule {
    std::vector<CorruptionEntry> entries;
    SimTime grace_p = 0.0;
};

struct PublishedConfig {
    Configuration config;
    SimTime published_at = 0.0;
};

inline constexpr SimTime kNever = std::numeric_limits<SimTime>::infinity();

struct ScheduleViolation {
    Configuration config;
    SimTime instant = 0.0;
    std::size_t count = 0;
    std::size_t f = 0;

    std::string describe() const;
};

// Message kind index for a drop pattern name; throws std::invalid_argument for unknown names.
std::size_t message_kind(std::string_view name);

// When the entry's node starts misbehaving under the given publication
// timeline (first entry is C0 at time 0). kNever if the trigger never fires.
SimTime corruption_time(const CorruptionEntry& e, const std::vector<PublishedConfig>& timeline, SimTime grace_p);

// Checks that each published configuration has at most f faulty members until
// P has elapsed after a newer configuration was published.
std::optional<ScheduleViolation> validate_schedule(const CorruptionSchedule& s,
                                                   const std::vector<PublishedConfig>& timeline);

// Switches the node's flags on. Unset configurations default to `fallback`.
void apply_behaviors(Behaviors& target, const std::vector<Behavior>& behaviors, const Configuration& fallback);

}  // namespace bms
