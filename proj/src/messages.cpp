#include "bms/messages.hpp"

#include "bms/codec.hpp"

namespace bms::proto {

namespace {

void put(Writer& w, const ProofOfRegistration& p) {
    w.node(p.subject).u32(static_cast<std::uint32_t>(p.confirmations.size()));
    for (const auto& c : p.confirmations) w.node(c.confirmer).u64(c.signature);
}

ProofOfRegistration get_proof(Reader& r) {
    ProofOfRegistration p;
    p.subject = r.node();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        Confirmation c;
        c.confirmer = r.node();
        c.signature = r.u64();
        p.confirmations.push_back(c);
    }
    return p;
}

void put(Writer& w, const JoinRequest& m) {
    put(w, m.proof);
    w.u32(m.attempt);
}
void put(Writer& w, const LeaveRequest& m) { w.node(m.node).u64(m.signature); }
void put(Writer& w, const EvictRequest& m) { w.node(m.node).bytes(m.pom); }

JoinRequest get_join(Reader& r) {
    JoinRequest m;
    m.proof = get_proof(r);
    m.attempt = r.u32();
    return m;
}

LeaveRequest get_leave(Reader& r) {
    LeaveRequest m;
    m.node = r.node();
    m.signature = r.u64();
    return m;
}

EvictRequest get_evict(Reader& r) {
    EvictRequest m;
    m.node = r.node();
    m.pom = r.bytes();
    return m;
}

}  // namespace

Bytes confirmation_bytes(NodeId joiner) { return std::move(Writer().str("REGISTER-CONFIRM").node(joiner)).take(); }

Bytes leave_bytes(NodeId node) { return std::move(Writer().str("LEAVE-REQUEST").node(node)).take(); }

NodeId subject(const ReconfigRequest& r) {
    return std::visit(
        [](const auto& m) -> NodeId {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, JoinRequest>) {
                return m.proof.subject;
            } else {
                return m.node;
            }
        },
        r);
}

bool adds_member(const ReconfigRequest& r) { return std::holds_alternative<JoinRequest>(r); }

Bytes encode(const Message& m) {
    Writer w;
    w.u8(static_cast<std::uint8_t>(m.index()));
    std::visit(
        [&w](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, RegisterAnnounce>) {
                w.node(x.joiner);
            } else if constexpr (std::is_same_v<T, RegisterConfirm>) {
                w.node(x.joiner).node(x.confirmation.confirmer).u64(x.confirmation.signature).config(x.hint);
            } else if constexpr (std::is_same_v<T, JoinRequest> || std::is_same_v<T, LeaveRequest> ||
                                 std::is_same_v<T, EvictRequest>) {
                put(w, x);
            } else if constexpr (std::is_same_v<T, FinalResponse>) {
                w.node(x.joiner).bytes(x.app_state).config(x.config).u64(x.log_position).bytes(x.protocol_data);
            } else if constexpr (std::is_same_v<T, ClientRequest>) {
                w.node(x.client).u64(x.request_id).i64(x.op);
            } else if constexpr (std::is_same_v<T, ClientResponse>) {
                w.u64(x.request_id).bytes(x.result);
            } else if constexpr (std::is_same_v<T, ConfigQuery>) {
                w.u64(x.query_id);
            } else {
                w.u64(x.query_id).config(x.config);
            }
        },
        m);
    return std::move(w).take();
}

Message decode_message(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    Message out;
    switch (r.u8()) {
        case 0:
            out = RegisterAnnounce{r.node()};
            break;
        case 1: {
            RegisterConfirm m;
            m.joiner = r.node();
            m.confirmation.confirmer = r.node();
            m.confirmation.signature = r.u64();
            m.hint = r.config();
            out = std::move(m);
            break;
        }
        case 2:
            out = get_join(r);
            break;
        case 3:
            out = get_leave(r);
            break;
        case 4:
            out = get_evict(r);
            break;
        case 5: {
            FinalResponse m;
            m.joiner = r.node();
            m.app_state = r.bytes();
            m.config = r.config();
            m.log_position = r.u64();
            m.protocol_data = r.bytes();
            out = std::move(m);
            break;
        }
        case 6: {
            ClientRequest m;
            m.client = r.node();
            m.request_id = r.u64();
            m.op = r.i64();
            out = m;
            break;
        }
        case 7: {
            ClientResponse m;
            m.request_id = r.u64();
            m.result = r.bytes();
            out = std::move(m);
            break;
        }
        case 8:
            out = ConfigQuery{r.u64()};
            break;
        case 9: {
            ConfigReply m;
            m.query_id = r.u64();
            m.config = r.config();
            out = std::move(m);
            break;
        }
        default:
            throw DecodeError("unknown message kind");
    }
    r.expect_done();
    return out;
}

Bytes encode_tob(const TobPayload& p) {
    Writer w;
    w.u8(static_cast<std::uint8_t>(p.index()));
    std::visit(
        [&w](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, BmsObservation>) {
                w.config(x.config).node(x.observer);
            } else if constexpr (std::is_same_v<T, AppOperation>) {
                w.node(x.client).u64(x.request_id).i64(x.op);
            } else if constexpr (std::is_same_v<T, CheckpointMarker>) {
                w.u64(x.index);
            } else {
                put(w, x);
            }
        },
        p);
    return std::move(w).take();
}

TobPayload decode_tob(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    TobPayload out;
    switch (r.u8()) {
        case 0:
            out = get_join(r);
            break;
        case 1:
            out = get_leave(r);
            break;
        case 2:
            out = get_evict(r);
            break;
        case 3: {
            BmsObservation m;
            m.config = r.config();
            m.observer = r.node();
            out = std::move(m);
            break;
        }
        case 4: {
            AppOperation m;
            m.client = r.node();
            m.request_id = r.u64();
            m.op = r.i64();
            out = m;
            break;
        }
        case 5:
            out = CheckpointMarker{r.u64()};
            break;
        default:
            throw DecodeError("unknown broadcast payload");
    }
    r.expect_done();
    return out;
}

std::optional<ReconfigRequest> as_reconfig(const TobPayload& p) {
    if (const auto* j = std::get_if<JoinRequest>(&p)) return *j;
    if (const auto* l = std::get_if<LeaveRequest>(&p)) return *l;
    if (const auto* e = std::get_if<EvictRequest>(&p)) return *e;
    return std::nullopt;
}

TobPayload to_tob(const ReconfigRequest& r) {
    return std::visit([](const auto& m) -> TobPayload { return m; }, r);
}

}  // namespace bms::proto
