#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bms/codec.hpp"
#include "bms/ledger.hpp"
#include "support/oracles.hpp"

using namespace bms;

namespace {

const NodeId A{0}, B{1}, C{2}, D{3}, E{4};

Configuration abcd() { return Configuration::make(0, {A, B, C, D}); }

struct Moments {
    double mean = 0, sd = 0;
};

template <class Sample>
Moments sample_moments(std::size_t n, Sample draw) {
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = draw();
        s += x;
        s2 += x * x;
    }
    const double m = s / n;
    return {m, std::sqrt(s2 / n - m * m)};
}

// Trapezoid integration of max(0, X) moments, X ~ N(mu, sigma).
Moments clamped_by_quadrature(double mu, double sigma) {
    double m1 = 0, m2 = 0;
    const double lo = 0, hi = mu + 12 * sigma;
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    for (int i = 0; i <= steps; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        const double pdf = std::exp(-0.5 * std::pow((x - mu) / sigma, 2)) / (sigma * std::sqrt(2 * M_PI));
        m1 += w * x * pdf * h;
        m2 += w * x * x * pdf * h;
    }
    return {m1, std::sqrt(m2 - m1 * m1)};
}

struct Fixture {
    sim::Simulator sim;
    sim::Authenticator auth{11};
    Ledger ledger;
    std::vector<sim::SigningKey> keys;

    explicit Fixture(std::uint64_t seed, LedgerParams p = {}, Amount cost = 100)
        : sim(seed), ledger(sim, p, GasSchedule{}, BmsContract(abcd(), cost)) {
        for (std::uint32_t i = 0; i < 8; ++i) keys.push_back(auth.enroll(NodeId{i}));
    }
};

}  // namespace

TEST(ClampedNormal, MomentsMatchQuadrature) {
    for (auto [mu, sigma] : {std::pair{10.0, 5.0}, {0.0, 3.0}, {-2.0, 4.0}, {20.0, 25.0}}) {
        ClampedNormal c{mu, sigma};
        const auto q = clamped_by_quadrature(mu, sigma);
        EXPECT_NEAR(c.mean(), q.mean, 1e-6) << mu << " " << sigma;
        EXPECT_NEAR(c.sd(), q.sd, 1e-6) << mu << " " << sigma;
    }
}

TEST(ClampedNormal, SolvesForRequestedMoments) {
    for (auto [m, s] : {std::pair{20.0, 24.0}, {5.0, 2.0}, {1.0, 1.2}}) {
        const auto c = clamped_normal_with_moments(m, s);
        EXPECT_NEAR(c.mean(), m, 1e-6);
        EXPECT_NEAR(c.sd(), s, 1e-6);
    }
    EXPECT_THROW(clamped_normal_with_moments(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(clamped_normal_with_moments(1.0, -1.0), std::invalid_argument);
}

TEST(LedgerModel, BlockIntervalMomentsMatchSampling) {
    LedgerParams p;
    const auto [mean, sd] = block_interval_moments(p);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(15.0, 5.0);
    const auto s = sample_moments(400000, [&] {
        double x;
        do x = n(rng);
        while (x < 1.0);
        return x;
    });
    EXPECT_NEAR(mean, s.mean, 0.05);
    EXPECT_NEAR(sd, s.sd, 0.05);
    EXPECT_GT(mean, 15.0);
}

TEST(LedgerModel, ObservedInclusionLatencyHasTargetMoments) {
    Fixture f(21);
    f.ledger.start();
    std::vector<TxId> ids;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> when(0.0, 200000.0);
    for (int i = 0; i < 20000; ++i) {
        f.sim.schedule(when(rng), [&f, &ids, i] {
            ids.push_back(f.ledger.submit_register(f.keys[4 + i % 4], 50));  // fee too low: no state change
        });
    }
    f.sim.run_until(201000.0);
    f.ledger.stop();
    std::size_t k = 0;
    const auto s = sample_moments(ids.size(), [&] {
        const TxId id = ids[k++];
        return *f.ledger.inclusion_time(id) - f.ledger.transaction(id).submitted_at;
    });
    EXPECT_NEAR(s.mean, 27.7, 0.8);
    EXPECT_NEAR(s.sd, 24.9, 1.0);
}

TEST(LedgerModel, ParamsValidation) {
    LedgerParams p;
    p.block_interval_mean = 0.0;
    EXPECT_THROW(validate(p), std::invalid_argument);
    p = {};
    p.block_interval_min = 20.0;
    EXPECT_NO_THROW(validate(p));
    p.block_interval_sd = 0.0;
    EXPECT_THROW(validate(p), std::invalid_argument);
    GasSchedule g;
    g.g_vote_store = -1;
    EXPECT_THROW(validate(g), std::invalid_argument);
}

TEST(Gas, VoteAndRegisterValues) {
    GasSchedule g;
    VoteOutcome rejected;
    rejected.result = VoteResult::NotMember;
    EXPECT_EQ(vote_gas(g, rejected, 5), 21000 + 286 * 5);

    VoteOutcome first;
    first.result = VoteResult::Accepted;
    first.first_vote = true;
    EXPECT_EQ(vote_gas(g, first, 5), 21000 + 286 * 5 + 7941 + 58665);

    VoteOutcome install;
    install.result = VoteResult::Accepted;
    UpdateOutcome u;
    u.previous = abcd();
    u.installed = Configuration::make(1, {A, B, C, D, E});
    u.joined = 1;
    install.updates.push_back(u);
    EXPECT_EQ(vote_gas(g, install, 5), 21000 + 286 * 5 + 7941 + 30000 + 17230);

    VoteOutcome shrink = install;
    std::swap(shrink.updates[0].previous, shrink.updates[0].installed);
    shrink.updates[0].joined = 0;
    shrink.updates[0].left = 1;
    EXPECT_EQ(vote_gas(g, shrink, 4), 21000 + 286 * 4 + 7941 + 30000 + 17230 - 4800);

    EXPECT_EQ(register_gas(g, RegisterResult::Accepted), 21000 + 65000);
    EXPECT_EQ(register_gas(g, RegisterResult::FeeTooLow), 21000);
}

TEST(Gas, JoinAtSizeFiveUnderPerJoinPolicy) {
    // Two votes for a one-member join at size 4 -> 5: first vote plus installing vote.
    GasSchedule g;
    const Gas first = g.g_base + 5 * g.g_vote_per_member + g.g_vote_store + g.g_first_vote_init;
    const Gas second = g.g_base + 5 * g.g_vote_per_member + g.g_vote_store + g.g_update_fixed + g.g_update_per_member;
    EXPECT_EQ(first + second, 166637);
}

TEST(Gas, UsdConversion) {
    PriceModel pm;
    EXPECT_NEAR(usd_cost(166640, pm), 5.99, 0.01);
    pm.gas_price_gwei = 0;
    EXPECT_THROW(validate(pm), std::invalid_argument);
}

TEST(LedgerTx, EncodeDecodeRoundTrip) {
    LedgerTransaction reg;
    reg.body = RegisterTx{E, 120};
    reg.submitter = E;
    reg.submitted_at = 3.5;
    reg.attached_funds = 120;
    EXPECT_EQ(decode_transaction(encode(reg)), reg);
    LedgerTransaction vote;
    vote.body = VoteTx{Configuration::make(4, {A, C, E}), C};
    vote.submitter = C;
    EXPECT_EQ(decode_transaction(encode(vote)), vote);
    Bytes bad = encode(vote);
    bad[0] = 99;
    EXPECT_THROW(decode_transaction(bad), DecodeError);
}

TEST(Ledger, GenesisAndConfirmationDepth) {
    LedgerParams p;
    p.confirmation_depth = 3;
    Fixture f(2, p);
    f.ledger.start();
    EXPECT_EQ(f.ledger.head_height(), 0u);
    const TxId id = f.ledger.submit_register(f.keys[4], 100);
    EXPECT_FALSE(f.ledger.receipt(id).has_value());
    f.sim.run_until(2000.0);
    ASSERT_TRUE(f.ledger.receipt(id).has_value());
    EXPECT_TRUE(f.ledger.receipt(id)->accepted);
    EXPECT_TRUE(f.ledger.is_confirmed(id));
    EXPECT_THROW(f.ledger.is_confirmed(999), std::invalid_argument);
    const auto h = f.ledger.receipt(id)->included_height;
    EXPECT_FALSE(f.ledger.is_confirmed(id, f.ledger.head_height() - h + 1));
}

TEST(Ledger, ObserverSeesConfirmedStateAfterDelay) {
    LedgerParams p;
    p.confirmation_depth = 2;
    Fixture f(4, p);
    f.ledger.add_observer(A, 0.4);
    f.ledger.start();
    f.ledger.submit_register(f.keys[4], 100);
    f.sim.run_until(3000.0);
    const auto& blocks = f.ledger.blocks();
    ASSERT_GT(blocks.size(), 5u);
    // Just before the last block becomes visible the observer still sees the previous head.
    const auto last = blocks.back();
    EXPECT_GT(f.ledger.observer_delay(A), 0.0);
    Fixture g(4, p);
    g.ledger.add_observer(A, 0.4);
    g.ledger.start();
    g.ledger.submit_register(g.keys[4], 100);
    g.sim.run_until(last.produced_at + 0.39);
    EXPECT_EQ(g.ledger.observer_state(A).visible_height, last.height - 1);
    g.sim.run_until(last.produced_at + 0.41);
    const auto view = g.ledger.observer_state(A);
    EXPECT_EQ(view.visible_height, last.height);
    ASSERT_TRUE(view.confirmed_height.has_value());
    EXPECT_EQ(*view.confirmed_height, last.height - 2);
    EXPECT_EQ(view.state, g.ledger.state_at(last.height - 2));
    EXPECT_THROW(g.ledger.observer_state(B), std::invalid_argument);
}

TEST(Ledger, ViewHookFiresOncePerBlock) {
    Fixture f(6);
    f.ledger.add_observer(A);
    std::vector<std::uint64_t> seen;
    f.ledger.set_view_hook(A, [&](std::uint64_t h) { seen.push_back(h); });
    f.ledger.start();
    f.sim.run_until(600.0);
    ASSERT_FALSE(seen.empty());
    for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i);
    EXPECT_LE(f.ledger.observer_delay(A), 0.5);
}

TEST(Ledger, SubmitterMustMatch) {
    Fixture f(8);
    f.ledger.start();
    LedgerTransaction tx;
    tx.body = VoteTx{Configuration::make(1, {A, B, C, D, E}), A};
    tx.submitter = B;
    const TxId id = f.ledger.submit_tx(tx);
    f.sim.run_until(500.0);
    ASSERT_TRUE(f.ledger.receipt(id).has_value());
    EXPECT_FALSE(f.ledger.receipt(id)->accepted);
    EXPECT_TRUE(f.ledger.head_state().votes.empty());
}

// Re-executing the included transactions on a fresh contract reproduces every
// recorded state, and funds are conserved at each height.
TEST(LedgerProperty, ReplayReproducesStates) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Fixture f(seed);
        f.ledger.start();
        oracle::SequenceGen gen(seed);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> when(0.0, 600.0);
        // Everything runs from the fixed four-member start.
        for (const auto& tx : gen.sequence(40)) {
            const auto& key = f.keys[tx.node % f.keys.size()];
            f.sim.schedule(when(rng), [&f, tx, &key] {
                if (tx.is_register) {
                    f.ledger.submit_register(key, tx.fee);
                } else {
                    f.ledger.submit_vote(key, oracle::to_config(tx.config));
                }
            });
        }
        f.sim.run_until(1200.0);
        BmsContract replay(abcd(), 100);
        for (const auto& b : f.ledger.blocks()) {
            for (TxId id : b.txs) {
                const auto& tx = f.ledger.transaction(id);
                if (const auto* r = std::get_if<RegisterTx>(&tx.body)) {
                    replay.register_node(r->node, r->fee);
                } else {
                    const auto& v = std::get<VoteTx>(tx.body);
                    replay.vote(v.config, v.voter);
                }
            }
            ASSERT_EQ(replay.state(), *f.ledger.state_at(b.height)) << "seed " << seed << " height " << b.height;
            const auto& s = *f.ledger.state_at(b.height);
            ASSERT_EQ(s.collected, s.balance + s.paid_out);
        }
        Amount rewarded = 0;
        for (const auto& [who, amount] : f.ledger.rewards()) rewarded += amount;
        EXPECT_EQ(rewarded, f.ledger.head_state().paid_out);
    }
}
