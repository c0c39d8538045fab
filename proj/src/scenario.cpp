#include "bms/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace bms {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ScenarioError(fmt::format("{}: {}", path, what));
}

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
  public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    const json* get(std::string_view key) {
        seen_.insert(std::string(key));
        auto it = j_.find(std::string(key));
        if (it == j_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    double number(std::string_view key, double fallback) {
        const json* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_number()) fail(at(key), "expected a number");
        return v->get<double>();
    }

    std::optional<double> opt_number(std::string_view key) {
        const json* v = get(key);
        if (v == nullptr) return std::nullopt;
        if (!v->is_number()) fail(at(key), "expected a number");
        return v->get<double>();
    }

    std::int64_t integer(std::string_view key, std::int64_t fallback) {
        const json* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_number_integer()) fail(at(key), "expected an integer");
        return v->get<std::int64_t>();
    }

    std::uint64_t count(std::string_view key, std::uint64_t fallback) {
        const std::int64_t v = integer(key, static_cast<std::int64_t>(fallback));
        if (v < 0) fail(at(key), "must be non-negative");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(std::string_view key, bool fallback) {
        const json* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_boolean()) fail(at(key), "expected true or false");
        return v->get<bool>();
    }

    std::optional<std::string> string(std::string_view key) {
        const json* v = get(key);
        if (v == nullptr) return std::nullopt;
        if (!v->is_string()) fail(at(key), "expected a string");
        return v->get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) fail(at(it.key()), "unknown field");
        }
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Policy parse_policy(const json& v, const std::string& path) {
    if (v.is_object()) {
        Fields f(v, path);
        const auto t = f.count("fixed", 0);
        f.finish();
        if (t == 0) fail(path + ".fixed", "must be at least 1");
        return Policy::fixed(t);
    }
    if (!v.is_string()) fail(path, "expected \"t1\", \"halff\" or {\"fixed\": t}");
    const auto s = v.get<std::string>();
    if (s == "t1" || s == "every") return Policy::every();
    if (s == "halff") return Policy::half_f();
    if (s.starts_with("fixed:")) {
        try {
            const auto t = std::stoul(s.substr(6));
            if (t == 0) fail(path, "fixed threshold must be at least 1");
            return Policy::fixed(t);
        } catch (const std::logic_error&) {
            fail(path, "bad fixed threshold");
        }
    }
    fail(path, fmt::format("unknown policy '{}'", s));
}

json policy_json(const Policy& p) {
    switch (p.kind) {
        case PolicyKind::Every: return "t1";
        case PolicyKind::HalfF: return "halff";
        case PolicyKind::Fixed: return json{{"fixed", p.fixed_t}};
    }
    return "t1";
}

struct Names {
    ScenarioConfig& s;

    NodeId lookup(const json& v, const std::string& path) const {
        if (!v.is_string()) fail(path, "expected a node name");
        const auto name = v.get<std::string>();
        auto it = std::find(s.names.begin(), s.names.end(), name);
        if (it == s.names.end()) fail(path, fmt::format("unknown node '{}'", name));
        return NodeId{static_cast<std::uint32_t>(it - s.names.begin())};
    }

    NodeId declare(const json& v, const std::string& path) const {
        if (!v.is_string() || v.get<std::string>().empty()) fail(path, "expected a node name");
        const auto name = v.get<std::string>();
        if (std::find(s.names.begin(), s.names.end(), name) != s.names.end()) {
            fail(path, fmt::format("node '{}' declared twice", name));
        }
        s.names.push_back(name);
        return NodeId{static_cast<std::uint32_t>(s.names.size() - 1)};
    }
};

Configuration parse_config(const json& v, const std::string& path, const Names& names) {
    Fields f(v, path);
    const auto number = f.count("number", 0);
    const json* members = f.get("members");
    f.finish();
    if (members == nullptr || !members->is_array() || members->empty()) fail(path + ".members", "expected a non-empty list");
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < members->size(); ++i) {
        ids.push_back(names.lookup((*members)[i], fmt::format("{}.members[{}]", path, i)));
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) fail(path + ".members", "duplicate member");
    return Configuration::make(number, std::move(ids));
}

json config_json(const Configuration& c, const ScenarioConfig& s) {
    json members = json::array();
    for (NodeId m : c.members) members.push_back(s.name_of(m));
    return json{{"number", c.number}, {"members", members}};
}

Behavior parse_behavior(const json& v, const std::string& path, const Names& names) {
    Behavior b;
    auto kind_of = [&](const std::string& k) {
        static const std::pair<const char*, BehaviorKind> table[] = {
            {"silent", BehaviorKind::Silent},
            {"forge_config_response", BehaviorKind::ForgeConfigResponse},
            {"withhold_vote", BehaviorKind::WithholdVote},
            {"vote_bogus", BehaviorKind::VoteBogus},
            {"drop_messages", BehaviorKind::DropMessages},
            {"stale_quorum", BehaviorKind::StaleQuorum},
        };
        for (const auto& [name, kind] : table) {
            if (k == name) return kind;
        }
        fail(path, fmt::format("unknown behavior '{}'", k));
    };
    if (v.is_string()) {
        b.kind = kind_of(v.get<std::string>());
        if (b.kind == BehaviorKind::DropMessages) b.drop = {"all"};
        return b;
    }
    if (!v.is_object() || v.size() != 1) fail(path, "expected a behavior name or a single-key object");
    const std::string key = v.begin().key();
    const json& arg = v.begin().value();
    b.kind = kind_of(key);
    switch (b.kind) {
        case BehaviorKind::VoteBogus:
        case BehaviorKind::ForgeConfigResponse:
            if (!arg.is_null()) b.config = parse_config(arg, path + "." + key, names);
            break;
        case BehaviorKind::DropMessages:
            if (!arg.is_array()) fail(path + "." + key, "expected a list of message kinds");
            for (std::size_t i = 0; i < arg.size(); ++i) {
                if (!arg[i].is_string()) fail(fmt::format("{}.{}[{}]", path, key, i), "expected a string");
                const auto d = arg[i].get<std::string>();
                if (d != "all") {
                    try {
                        (void)message_kind(d);
                    } catch (const std::invalid_argument& e) {
                        fail(fmt::format("{}.{}[{}]", path, key, i), e.what());
                    }
                }
                b.drop.push_back(d);
            }
            break;
        default:
            if (!arg.is_null() && !(arg.is_object() && arg.empty())) fail(path + "." + key, "takes no arguments");
    }
    return b;
}

json behavior_json(const Behavior& b, const ScenarioConfig& s) {
    const std::string k = to_string(b.kind);
    switch (b.kind) {
        case BehaviorKind::VoteBogus:
        case BehaviorKind::ForgeConfigResponse:
            if (b.config) return json{{k, config_json(*b.config, s)}};
            return k;
        case BehaviorKind::DropMessages: return json{{k, b.drop}};
        default: return k;
    }
}

void parse_ledger(const json& v, LedgerParams& p) {
    Fields f(v, "ledger");
    p.block_interval_mean = f.number("block_interval_mean", p.block_interval_mean);
    p.block_interval_sd = f.number("block_interval_sd", p.block_interval_sd);
    p.block_interval_min = f.number("block_interval_min", p.block_interval_min);
    p.tx_latency_mean = f.number("tx_latency_mean", p.tx_latency_mean);
    p.tx_latency_sd = f.number("tx_latency_sd", p.tx_latency_sd);
    p.confirmation_depth = f.count("confirmation_depth", p.confirmation_depth);
    p.observer_delay_max = f.number("observer_delay_max", p.observer_delay_max);
    f.finish();
}

void parse_gas(const json& v, GasSchedule& g) {
    Fields f(v, "gas");
    g.g_base = f.integer("g_base", g.g_base);
    g.g_vote_store = f.integer("g_vote_store", g.g_vote_store);
    g.g_first_vote_init = f.integer("g_first_vote_init", g.g_first_vote_init);
    g.g_update_fixed = f.integer("g_update_fixed", g.g_update_fixed);
    g.g_update_per_member = f.integer("g_update_per_member", g.g_update_per_member);
    g.g_register = f.integer("g_register", g.g_register);
    g.refund_per_freed_member = f.integer("refund_per_freed_member", g.refund_per_freed_member);
    g.g_vote_per_member = f.integer("g_vote_per_member", g.g_vote_per_member);
    f.finish();
}

}  // namespace

Configuration ScenarioConfig::c0() const {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < initial_count; ++i) ids.push_back(NodeId{static_cast<std::uint32_t>(i)});
    return Configuration::make(0, std::move(ids));
}

NodeId ScenarioConfig::id(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ScenarioError(fmt::format("unknown node '{}'", name));
    return NodeId{static_cast<std::uint32_t>(it - names.begin())};
}

const std::string& ScenarioConfig::name_of(NodeId id) const {
    if (id.value >= names.size()) throw ScenarioError(fmt::format("node id {} out of range", id.value));
    return names[id.value];
}

SimTime ScenarioConfig::confirmation_time() const {
    return static_cast<double>(ledger.confirmation_depth) * ledger.block_interval_mean;
}

SimTime ScenarioConfig::p_bound() const {
    if (client && client->p_bound) return *client->p_bound;
    return confirmation_time() + network.delta;
}

ScenarioConfig parse_scenario(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioError(fmt::format("scenario is not valid JSON: {}", e.what()));
    }
    ScenarioConfig s;
    Names names{s};
    Fields f(root, "");
    if (auto n = f.string("name")) s.name = *n;
    s.seed = f.count("seed", s.seed);

    const json* initial = f.get("initial");
    const auto initial_size = f.count("initial_size", 0);
    if (initial != nullptr) {
        if (!initial->is_array() || initial->empty()) fail("initial", "expected a non-empty list of names");
        if (initial_size != 0 && initial_size != initial->size()) fail("initial_size", "disagrees with initial");
        for (std::size_t i = 0; i < initial->size(); ++i) names.declare((*initial)[i], fmt::format("initial[{}]", i));
    } else {
        if (initial_size == 0) fail("initial_size", "required when no initial list is given");
        for (std::size_t i = 0; i < initial_size; ++i) s.names.push_back(fmt::format("n{}", i));
    }
    s.initial_count = s.names.size();

    if (const json* p = f.get("policy")) s.policy = parse_policy(*p, "policy");

    const auto target = f.count("target_size", 0);
    if (target != 0 && target < s.initial_count) fail("target_size", "smaller than the initial configuration");

    if (const json* churn = f.get("churn")) {
        if (!churn->is_array()) fail("churn", "expected a list");
        for (std::size_t i = 0; i < churn->size(); ++i) {
            const std::string path = fmt::format("churn[{}]", i);
            Fields c((*churn)[i], path);
            ChurnStep step;
            const auto op = c.string("op");
            if (!op) fail(path + ".op", "required");
            const json* node = c.get("node");
            if (node == nullptr) fail(path + ".node", "required");
            if (*op == "join") {
                step.op = ChurnStep::Op::Join;
                step.node = names.declare(*node, path + ".node");
            } else if (*op == "leave" || *op == "evict") {
                step.op = *op == "leave" ? ChurnStep::Op::Leave : ChurnStep::Op::Evict;
                step.node = names.lookup(*node, path + ".node");
            } else {
                fail(path + ".op", fmt::format("unknown operation '{}'", *op));
            }
            step.at = c.opt_number("at");
            if (auto w = c.string("wait")) {
                if (*w != "ready" && *w != "none") fail(path + ".wait", "expected \"ready\" or \"none\"");
                step.wait = *w == "ready";
            }
            if (auto pom = c.string("pom")) {
                if (step.op != ChurnStep::Op::Evict) fail(path + ".pom", "only evictions carry a proof");
                if (*pom != "valid" && *pom != "invalid") fail(path + ".pom", "expected \"valid\" or \"invalid\"");
                step.pom_valid = *pom == "valid";
            }
            c.finish();
            s.churn.push_back(step);
        }
    }
    if (target != 0) {
        if (!s.churn.empty()) fail("target_size", "cannot be combined with an explicit churn list");
        for (std::size_t i = s.initial_count; i < target; ++i) {
            ChurnStep step;
            step.node = names.declare(json(fmt::format("n{}", i)), "target_size");
            s.churn.push_back(step);
        }
    }

    if (const json* cp = f.get("checkpoint")) {
        Fields c(*cp, "checkpoint");
        s.tob.checkpoint_interval = c.number("interval", s.tob.checkpoint_interval);
        s.tob.checkpoint_every = c.count("every_requests", s.tob.checkpoint_every);
        c.finish();
    }
    s.tob.latency = f.number("tob_latency", s.tob.latency);
    if (const json* l = f.get("ledger")) parse_ledger(*l, s.ledger);
    if (const json* g = f.get("gas")) parse_gas(*g, s.gas);
    if (const json* p = f.get("price")) {
        Fields c(*p, "price");
        s.price.gas_price_gwei = c.number("gas_price_gwei", s.price.gas_price_gwei);
        s.price.eth_usd = c.number("eth_usd", s.price.eth_usd);
        c.finish();
    }
    if (const json* n = f.get("network")) {
        Fields c(*n, "network");
        s.network.gst = c.number("gst", s.network.gst);
        s.network.delta = c.number("delta", s.network.delta);
        s.network.drop_probability = c.number("drop_probability", s.network.drop_probability);
        s.network.max_delay = c.number("max_delay", s.network.max_delay);
        c.finish();
    }
    if (const json* fees = f.get("fees")) {
        Fields c(*fees, "fees");
        s.cost = c.integer("cost", s.cost);
        s.fee = c.integer("fee", s.fee);
        c.finish();
    }
    if (const json* voting = f.get("voting")) {
        Fields c(*voting, "voting");
        const auto mode = c.string("mode").value_or("count");
        if (mode != "count" && mode != "stake") fail("voting.mode", "expected \"count\" or \"stake\"");
        s.stake_weighted = mode == "stake";
        if (const json* stakes = c.get("stakes")) {
            if (!s.stake_weighted) fail("voting.stakes", "only used in stake mode");
            if (!stakes->is_object()) fail("voting.stakes", "expected an object of name: stake");
            for (auto it = stakes->begin(); it != stakes->end(); ++it) {
                const std::string path = "voting.stakes." + it.key();
                const NodeId id = names.lookup(json(it.key()), path);
                if (!it->is_number_integer()) fail(path, "expected an integer stake");
                s.stakes[id] = it->get<Amount>();
            }
        }
        c.finish();
    }

    if (const json* adv = f.get("adversary")) {
        Fields a(*adv, "adversary");
        const json* entries = a.get("entries");
        a.finish();
        if (entries != nullptr) {
            if (!entries->is_array()) fail("adversary.entries", "expected a list");
            for (std::size_t i = 0; i < entries->size(); ++i) {
                const std::string path = fmt::format("adversary.entries[{}]", i);
                Fields e((*entries)[i], path);
                CorruptionEntry entry;
                const json* node = e.get("node");
                if (node == nullptr) fail(path + ".node", "required");
                entry.node = names.lookup(*node, path + ".node");
                const json* trig = e.get("trigger");
                if (trig == nullptr) fail(path + ".trigger", "required");
                if (trig->is_string() && trig->get<std::string>() == "from_start") {
                    entry.trigger.kind = Trigger::Kind::FromStart;
                } else if (trig->is_object()) {
                    Fields t(*trig, path + ".trigger");
                    auto at = t.opt_number("at");
                    auto after = t.opt_number("after_retirement");
                    t.finish();
                    if (at.has_value() == after.has_value()) {
                        fail(path + ".trigger", "expected exactly one of at / after_retirement");
                    }
                    entry.trigger.kind = at ? Trigger::Kind::AtTime : Trigger::Kind::AfterRetirement;
                    entry.trigger.value = at ? *at : *after;
                } else {
                    fail(path + ".trigger", "expected \"from_start\", {\"at\": t} or {\"after_retirement\": extra}");
                }
                const json* behaviors = e.get("behaviors");
                if (behaviors == nullptr || !behaviors->is_array() || behaviors->empty()) {
                    fail(path + ".behaviors", "expected a non-empty list");
                }
                for (std::size_t k = 0; k < behaviors->size(); ++k) {
                    entry.behaviors.push_back(parse_behavior((*behaviors)[k], fmt::format("{}.behaviors[{}]", path, k), names));
                }
                e.finish();
                s.adversary.entries.push_back(std::move(entry));
            }
        }
    }

    if (const json* cl = f.get("client")) {
        Fields c(*cl, "client");
        ClientSpec spec;
        const auto mode = c.string("mode").value_or("bms");
        if (mode != "bms" && mode != "control") fail("client.mode", "expected \"bms\" or \"control\"");
        spec.mode = mode == "bms" ? ClientMode::WithBms : ClientMode::Control;
        spec.p_bound = c.opt_number("p");
        spec.retry_timeout = c.number("retry_timeout", spec.retry_timeout);
        spec.bootstrap_at = c.number("bootstrap_at", spec.bootstrap_at);
        if (const json* reqs = c.get("requests")) {
            if (!reqs->is_array()) fail("client.requests", "expected a list");
            for (std::size_t i = 0; i < reqs->size(); ++i) {
                const std::string path = fmt::format("client.requests[{}]", i);
                Fields r((*reqs)[i], path);
                ClientRequestSpec req;
                auto at = r.opt_number("at");
                auto after = r.opt_number("after_final_publish");
                req.op = r.integer("op", req.op);
                r.finish();
                if (at.has_value() == after.has_value()) fail(path, "expected exactly one of at / after_final_publish");
                req.trigger = at ? ClientRequestSpec::Trigger::At : ClientRequestSpec::Trigger::AfterFinalPublish;
                req.time = at ? *at : *after;
                spec.requests.push_back(req);
            }
        }
        c.finish();
        s.client = spec;
    }

    s.bypass_validation = f.boolean("bypass_validation", s.bypass_validation);
    s.skip_confirmation = f.boolean("skip_confirmation", s.skip_confirmation);
    s.max_time = f.number("max_time", s.max_time);
    s.join_timeout = f.opt_number("join_timeout");
    s.revote_timeout = f.opt_number("revote_timeout");
    f.finish();

    s.adversary.grace_p = s.p_bound();
    return s;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(fmt::format("cannot open scenario file {}", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string dump_scenario(const ScenarioConfig& s) {
    json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    json initial = json::array();
    for (std::size_t i = 0; i < s.initial_count; ++i) initial.push_back(s.names[i]);
    j["initial"] = initial;
    j["policy"] = policy_json(s.policy);
    json churn = json::array();
    for (const auto& c : s.churn) {
        json step;
        step["op"] = c.op == ChurnStep::Op::Join ? "join" : (c.op == ChurnStep::Op::Leave ? "leave" : "evict");
        step["node"] = s.name_of(c.node);
        if (c.at) step["at"] = *c.at;
        if (!c.wait) step["wait"] = "none";
        if (c.op == ChurnStep::Op::Evict) step["pom"] = c.pom_valid ? "valid" : "invalid";
        churn.push_back(step);
    }
    j["churn"] = churn;
    j["checkpoint"] = {{"interval", s.tob.checkpoint_interval}, {"every_requests", s.tob.checkpoint_every}};
    j["tob_latency"] = s.tob.latency;
    j["ledger"] = {{"block_interval_mean", s.ledger.block_interval_mean},
                   {"block_interval_sd", s.ledger.block_interval_sd},
                   {"block_interval_min", s.ledger.block_interval_min},
                   {"tx_latency_mean", s.ledger.tx_latency_mean},
                   {"tx_latency_sd", s.ledger.tx_latency_sd},
                   {"confirmation_depth", s.ledger.confirmation_depth},
                   {"observer_delay_max", s.ledger.observer_delay_max}};
    j["gas"] = {{"g_base", s.gas.g_base},
                {"g_vote_store", s.gas.g_vote_store},
                {"g_first_vote_init", s.gas.g_first_vote_init},
                {"g_update_fixed", s.gas.g_update_fixed},
                {"g_update_per_member", s.gas.g_update_per_member},
                {"g_register", s.gas.g_register},
                {"refund_per_freed_member", s.gas.refund_per_freed_member},
                {"g_vote_per_member", s.gas.g_vote_per_member}};
    j["price"] = {{"gas_price_gwei", s.price.gas_price_gwei}, {"eth_usd", s.price.eth_usd}};
    j["network"] = {{"gst", s.network.gst},
                    {"delta", s.network.delta},
                    {"drop_probability", s.network.drop_probability},
                    {"max_delay", s.network.max_delay}};
    j["fees"] = {{"cost", s.cost}, {"fee", s.fee}};
    if (s.stake_weighted) {
        json stakes = json::object();
        for (const auto& [id, v] : s.stakes) stakes[s.name_of(id)] = v;
        j["voting"] = {{"mode", "stake"}, {"stakes", stakes}};
    }
    if (!s.adversary.entries.empty()) {
        json entries = json::array();
        for (const auto& e : s.adversary.entries) {
            json entry;
            entry["node"] = s.name_of(e.node);
            switch (e.trigger.kind) {
                case Trigger::Kind::FromStart: entry["trigger"] = "from_start"; break;
                case Trigger::Kind::AtTime: entry["trigger"] = {{"at", e.trigger.value}}; break;
                case Trigger::Kind::AfterRetirement: entry["trigger"] = {{"after_retirement", e.trigger.value}}; break;
            }
            json behaviors = json::array();
            for (const auto& b : e.behaviors) behaviors.push_back(behavior_json(b, s));
            entry["behaviors"] = behaviors;
            entries.push_back(entry);
        }
        j["adversary"] = {{"entries", entries}};
    }
    if (s.client) {
        json c;
        c["mode"] = to_string(s.client->mode);
        if (s.client->p_bound) c["p"] = *s.client->p_bound;
        c["retry_timeout"] = s.client->retry_timeout;
        c["bootstrap_at"] = s.client->bootstrap_at;
        json reqs = json::array();
        for (const auto& r : s.client->requests) {
            if (r.trigger == ClientRequestSpec::Trigger::At) {
                reqs.push_back({{"at", r.time}, {"op", r.op}});
            } else {
                reqs.push_back({{"after_final_publish", r.time}, {"op", r.op}});
            }
        }
        c["requests"] = reqs;
        j["client"] = c;
    }
    j["bypass_validation"] = s.bypass_validation;
    j["skip_confirmation"] = s.skip_confirmation;
    j["max_time"] = s.max_time;
    if (s.join_timeout) j["join_timeout"] = *s.join_timeout;
    if (s.revote_timeout) j["revote_timeout"] = *s.revote_timeout;
    return j.dump(2) + "\n";
}

void validate_scenario(const ScenarioConfig& s) {
    if (s.initial_count == 0) fail("initial", "needs at least one node");
    {
        std::set<std::string> unique(s.names.begin(), s.names.end());
        if (unique.size() != s.names.size()) fail("nodes", "duplicate node name");
    }
    if (s.policy.kind == PolicyKind::Fixed && s.policy.fixed_t == 0) fail("policy", "fixed threshold must be at least 1");
    auto wrap = [](const char* field, auto&& check) {
        try {
            check();
        } catch (const std::invalid_argument& e) {
            fail(field, e.what());
        }
    };
    wrap("ledger", [&] { validate(s.ledger); });
    wrap("gas", [&] { validate(s.gas); });
    wrap("price", [&] { validate(s.price); });
    wrap("network", [&] { sim::validate(s.network); });
    if (s.tob.latency < 0.0) fail("tob_latency", "must be non-negative");
    if (s.tob.checkpoint_interval < 0.0) fail("checkpoint.interval", "must be non-negative");
    if (s.tob.checkpoint_interval == 0.0 && s.tob.checkpoint_every == 0) {
        fail("checkpoint", "needs an interval or a request count");
    }
    if (s.cost < 0) fail("fees.cost", "must be non-negative");
    if (s.fee < s.cost) fail("fees.fee", "below the registration cost");
    if (!(s.max_time > 0.0)) fail("max_time", "must be positive");
    if (s.join_timeout && !(*s.join_timeout > 0.0)) fail("join_timeout", "must be positive");
    if (s.revote_timeout && !(*s.revote_timeout > 0.0)) fail("revote_timeout", "must be positive");
    if (s.stake_weighted) {
        for (std::size_t i = 0; i < s.initial_count; ++i) {
            auto it = s.stakes.find(NodeId{static_cast<std::uint32_t>(i)});
            if (it == s.stakes.end() || it->second <= 0) {
                fail("voting.stakes", fmt::format("missing positive stake for '{}'", s.names[i]));
            }
        }
    }
    if (s.client) {
        if (!(s.client->retry_timeout > 0.0)) fail("client.retry_timeout", "must be positive");
        if (s.client->p_bound && *s.client->p_bound < 0.0) fail("client.p", "must be non-negative");
        if (s.client->bootstrap_at < 0.0) fail("client.bootstrap_at", "must be non-negative");
        for (std::size_t i = 0; i < s.client->requests.size(); ++i) {
            if (s.client->requests[i].time < 0.0) fail(fmt::format("client.requests[{}]", i), "time must be non-negative");
        }
    }

    // Project the configuration chain, assuming each step is published once the policy asks for a vote.
    std::set<NodeId> faulty_now;
    for (const auto& e : s.adversary.entries) {
        const bool early = e.trigger.kind != Trigger::Kind::AfterRetirement || e.trigger.value < 0.0;
        if (early) faulty_now.insert(e.node);
    }
    auto check_faults = [&](const Configuration& c, const std::string& where) {
        std::size_t n = 0;
        for (NodeId m : c.members) n += faulty_now.contains(m) ? 1 : 0;
        if (n > max_faults(c) && !s.bypass_validation) {
            fail("adversary", fmt::format("{} faulty members in {} ({}), more than f={}", n, to_string(c), where,
                                          max_faults(c)));
        }
    };

    Configuration local = s.c0();
    Configuration published = local;
    Configuration last_voted = local;
    std::size_t leaves_since_publish = 0;
    check_faults(local, "initial");
    for (std::size_t i = 0; i < s.churn.size(); ++i) {
        const auto& step = s.churn[i];
        const std::string path = fmt::format("churn[{}]", i);
        if (step.node.value >= s.names.size()) fail(path + ".node", "undeclared node");
        if (step.at && *step.at < 0.0) fail(path + ".at", "must be non-negative");
        std::vector<NodeId> members = local.members;
        if (step.op == ChurnStep::Op::Join) {
            if (local.contains(step.node)) fail(path, fmt::format("'{}' is already a member", s.name_of(step.node)));
            members.insert(std::lower_bound(members.begin(), members.end(), step.node), step.node);
        } else {
            if (!local.contains(step.node)) fail(path, fmt::format("'{}' is not a member", s.name_of(step.node)));
            if (members.size() == 1) fail(path, "would remove the last member");
            members.erase(std::find(members.begin(), members.end(), step.node));
        }
        if (!s.bypass_validation) {
            const std::size_t t = policy_threshold(s.policy, local);
            if (t > max_batch_threshold(published)) {
                fail("policy", fmt::format("threshold {} at size {} exceeds the publishable bound {} of {}", t,
                                           local.size(), max_batch_threshold(published), to_string(published)));
            }
        }
        if (step.op == ChurnStep::Op::Leave && !faulty_now.contains(step.node)) ++leaves_since_publish;
        if (!s.bypass_validation && leaves_since_publish > max_correct_leavers(published)) {
            fail(path, fmt::format("{} correct departures since {} exceed the bound {}", leaves_since_publish,
                                   to_string(published), max_correct_leavers(published)));
        }
        local = Configuration::make(local.number + 1, std::move(members));
        check_faults(local, path);
        if (symmetric_difference(last_voted, local) >= policy_threshold(s.policy, local)) {
            last_voted = local;
            published = local;
            leaves_since_publish = 0;
        }
    }
}

ScenarioConfig sweep_scenario(Policy policy, std::size_t from, std::size_t to, std::uint64_t seed) {
    if (from == 0 || to < from) throw ScenarioError("sweep sizes must satisfy 1 <= from <= to");
    ScenarioConfig s;
    s.name = fmt::format("sweep-{}-{}-{}", to_string(policy), from, to);
    s.seed = seed;
    s.policy = policy;
    for (std::size_t i = 0; i < to; ++i) s.names.push_back(fmt::format("n{}", i));
    s.initial_count = from;
    for (std::size_t i = from; i < to; ++i) {
        ChurnStep step;
        step.node = NodeId{static_cast<std::uint32_t>(i)};
        s.churn.push_back(step);
    }
    s.adversary.grace_p = s.p_bound();
    return s;
}

ScenarioConfig long_range_scenario(const LongRangeOptions& opts) {
    if (opts.initial_size < 4) throw ScenarioError("long-range scenario needs at least 4 initial nodes");
    if (opts.leaves_per_batch == 0) throw ScenarioError("leaves_per_batch must be positive");
    ScenarioConfig s;
    s.name = fmt::format("long-range-{}", to_string(opts.mode));
    s.seed = opts.seed;
    s.policy = Policy::every();
    auto name = [](std::size_t i) { return i < 26 ? std::string(1, static_cast<char>('A' + i)) : fmt::format("N{}", i); };
    const std::size_t n = opts.initial_size;
    for (std::size_t i = 0; i < 2 * n; ++i) s.names.push_back(name(i));
    s.initial_count = n;

    // Alternate rounds of joins and leaves until C0 has fully turned over.
    std::size_t joined = 0;
    std::size_t left = 0;
    std::size_t size = n;
    while (left < n) {
        const std::size_t k = std::min(opts.leaves_per_batch, n - left);
        for (std::size_t i = 0; i < k && joined < n; ++i, ++joined, ++size) {
            ChurnStep step;
            step.node = NodeId{static_cast<std::uint32_t>(n + joined)};
            s.churn.push_back(step);
        }
        if (k > max_correct_leavers(size)) {
            throw ScenarioError(fmt::format("turnover of {} nodes between publications exceeds the {} that a "
                                            "{}-node configuration can lose",
                                            k, max_correct_leavers(size), size));
        }
        for (std::size_t i = 0; i < k; ++i, ++left, --size) {
            ChurnStep step;
            step.op = ChurnStep::Op::Leave;
            step.node = NodeId{static_cast<std::uint32_t>(left)};
            step.wait = i == 0;
            s.churn.push_back(step);
        }
    }
    while (joined < n) {
        ChurnStep step;
        step.node = NodeId{static_cast<std::uint32_t>(n + joined++)};
        s.churn.push_back(step);
    }

    const Configuration c0 = s.c0();
    for (std::size_t i = 0; i < n; ++i) {
        CorruptionEntry e;
        e.node = NodeId{static_cast<std::uint32_t>(i)};
        e.trigger = Trigger{Trigger::Kind::AfterRetirement, 1.0};
        e.behaviors.push_back(Behavior{BehaviorKind::StaleQuorum, std::nullopt, {}, {}});
        e.behaviors.push_back(Behavior{BehaviorKind::ForgeConfigResponse, c0, {}, {}});
        s.adversary.entries.push_back(std::move(e));
    }

    ClientSpec client;
    client.mode = opts.mode;
    client.requests.push_back({ClientRequestSpec::Trigger::At, 1.0, 1});
    client.requests.push_back({ClientRequestSpec::Trigger::AfterFinalPublish, opts.reconnect_margin, 1});
    s.client = client;
    s.adversary.grace_p = s.p_bound();
    return s;
}

ScenarioConfig stall_scenario(bool exceed_bound, std::uint64_t seed) {
    ScenarioConfig s;
    s.name = exceed_bound ? "stall-exceeding" : "stall-within-bound";
    s.seed = seed;
    s.names = {"A", "B", "C", "D", "E"};
    s.initial_count = 4;
    CorruptionEntry d;
    d.node = NodeId{3};
    d.trigger = Trigger{Trigger::Kind::FromStart, 0.0};
    d.behaviors.push_back(Behavior{BehaviorKind::WithholdVote, std::nullopt, {}, {}});
    s.adversary.entries.push_back(d);

    auto step = [](ChurnStep::Op op, std::uint32_t node, std::optional<SimTime> at, bool wait) {
        ChurnStep c;
        c.op = op;
        c.node = NodeId{node};
        c.at = at;
        c.wait = wait;
        return c;
    };
    if (exceed_bound) {
        // Both departures land in one checkpoint, below the vote threshold of 3.
        s.policy = Policy::fixed(3);
        s.bypass_validation = true;
        s.churn.push_back(step(ChurnStep::Op::Leave, 0, 2.0, false));
        s.churn.push_back(step(ChurnStep::Op::Leave, 1, 3.0, false));
        s.churn.push_back(step(ChurnStep::Op::Join, 4, 30.0, false));
    } else {
        // Same two departures, each published before the next, with joins
        // keeping D within the fault bound of every configuration.
        s.policy = Policy::every();
        s.names.push_back("F");
        s.churn.push_back(step(ChurnStep::Op::Join, 4, 2.0, true));
        s.churn.push_back(step(ChurnStep::Op::Leave, 0, std::nullopt, true));
        s.churn.push_back(step(ChurnStep::Op::Join, 5, std::nullopt, true));
        s.churn.push_back(step(ChurnStep::Op::Leave, 1, std::nullopt, true));
    }
    s.max_time = 100.0 * s.confirmation_time() + 1000.0;
    s.adversary.grace_p = s.p_bound();
    return s;
}

}  // namespace bms
