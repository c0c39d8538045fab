#include "bms/sim/network.hpp"

#include <algorithm>
#include <memory>
#include <stdexcept>

namespace bms::sim {

void validate(const NetworkConfig& config) {
    if (!(config.delta > 0.0)) throw std::invalid_argument("network.delta must be positive");
    if (config.drop_probability < 0.0 || config.drop_probability > 1.0) {
        throw std::invalid_argument("network.drop_probability must lie in [0, 1]");
    }
    if (config.gst < 0.0) throw std::invalid_argument("network.gst must be non-negative");
    if (config.max_delay < 0.0) throw std::invalid_argument("network.max_delay must be non-negative");
}

Network::Network(Simulator& sim, const Authenticator& auth, NetworkConfig config)
    : sim_(sim), auth_(auth), config_(config), rng_(config.rng_seed) {
    validate(config_);
}

void Network::attach(NodeId node, Handler handler) { handlers_[node] = std::move(handler); }

void Network::detach(NodeId node) { handlers_.erase(node); }

void Network::send_signed(const SigningKey& key, NodeId to, Bytes payload) {
    Envelope env;
    env.sender = key.node();
    env.receiver = to;
    env.sent_at = sim_.now();
    env.signature = auth_.sign(key, payload);
    env.payload = std::move(payload);
    send(std::move(env));
}

void Network::send(Envelope env) {
    if (!auth_.enrolled(env.sender)) throw std::invalid_argument("send from unknown node " + to_string(env.sender));
    ++sent_;
    for (const auto& tap : taps_) tap(env);

    const SimTime s = env.sent_at;
    std::uniform_real_distribution<double> post(0.0, config_.delta);
    SimTime at;
    if (s >= config_.gst) {
        at = s + post(rng_);
    } else {
        std::uniform_real_distribution<double> pre(0.0, config_.max_delay);
        const SimTime natural = s + pre(rng_);
        if (natural < config_.gst) {
            std::bernoulli_distribution drop(config_.drop_probability);
            if (drop(rng_)) {
                ++dropped_;
                return;
            }
            at = natural;
        } else {
            at = std::min(natural, config_.gst + post(rng_));
        }
    }
    at = std::max(at, sim_.now());
    auto shared = std::make_shared<Envelope>(std::move(env));
    sim_.schedule(at, [this, shared] { deliver(*shared); });
}

void Network::deliver(const Envelope& env) {
    if (!auth_.verify(env.sender, env.payload, env.signature)) {
        ++rejected_;
        return;
    }
    auto it = handlers_.find(env.receiver);
    if (it == handlers_.end()) {
        ++dropped_;
        return;
    }
    ++delivered_;
    // Copy the handler: it may detach itself while running.
    Handler h = it->second;
    h(env);
}

}  // namespace bms::sim
