#include <gtest/gtest.h>

#include "bms/experiments.hpp"

using namespace bms;

TEST(Experiments, ProjectedUpdateSizes) {
    EXPECT_EQ(projected_update_sizes(Policy::half_f(), 4, 100),
              (std::vector<std::size_t>{5, 6, 7, 8, 9, 10, 11, 12, 14, 16, 18, 21, 24, 28, 33, 39, 46, 54, 64, 76, 90,
                                        107}));
    const auto every = projected_update_sizes(Policy::every(), 4, 100);
    ASSERT_EQ(every.size(), 96u);
    EXPECT_EQ(every.front(), 5u);
    EXPECT_EQ(every.back(), 100u);
}

TEST(Experiments, ParseAnchors) {
    const auto a = parse_anchors("gas,size\n166640,5\n113314,25\n");
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[1].size, 25u);
    EXPECT_EQ(a[1].gas, 113314.0);
    EXPECT_FALSE(a[1].usd.has_value());
    const auto b = parse_anchors("size,gas,usd\n5,166640,5.71\n");
    EXPECT_DOUBLE_EQ(*b[0].usd, 5.71);
    EXPECT_THROW(parse_anchors("size,cost\n5,1\n"), CalibrationError);
}

TEST(Experiments, DefaultAnchors) {
    const auto a = default_anchors();
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a[0].size, 5u);
    EXPECT_EQ(a[0].gas, 166640.0);
    EXPECT_EQ(a[3].size, 93u);
    EXPECT_EQ(a[3].gas, 127590.0);
}

TEST(Experiments, CalibrationNeedsTwoAnchors) {
    EXPECT_THROW(calibrate_gas({}), CalibrationError);
    EXPECT_THROW(calibrate_gas({GasAnchor{5, 166640.0, std::nullopt}}), CalibrationError);
}

TEST(Experiments, CalibrationMatchesAnchors) {
    const auto c = calibrate_gas(default_anchors());
    EXPECT_EQ(c.fitted_parameters, 4u);
    EXPECT_FALSE(c.degenerate);
    ASSERT_EQ(c.rows.size(), 4u);
    const std::size_t covering[] = {5, 28, 64, 107};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c.rows[i].covering_size, covering[i]);
        EXPECT_LT(std::abs(c.rows[i].residual), 0.10);
        EXPECT_LT(std::abs(c.rows[i].fitted_usd - *c.rows[i].anchor.usd) / *c.rows[i].anchor.usd, 0.10);
    }
    EXPECT_EQ(calibration_csv(c).substr(0, calibration_csv(c).find('\n')),
              "size,covering_size,anchor_gas,fitted_gas,residual_pct,anchor_usd,fitted_usd");
}

TEST(Experiments, TwoAnchorFitKeepsOtherConstants) {
    const auto c = calibrate_gas({{5, 170000.0, std::nullopt}, {25, 115000.0, std::nullopt}});
    EXPECT_EQ(c.fitted_parameters, 2u);
    GasSchedule base;
    EXPECT_EQ(c.schedule.g_vote_per_member, base.g_vote_per_member);
    EXPECT_EQ(c.schedule.g_update_per_member, base.g_update_per_member);
    for (const auto& r : c.rows) EXPECT_LT(std::abs(r.residual), 0.01);
}

TEST(Experiments, PredictedGasMatchesSimulatedUpdates) {
    const auto r = run_scenario(sweep_scenario(Policy::half_f(), 4, 30, 1));
    const auto rows = aggregate_sweep(r, PriceModel{});
    for (const auto& u : r.updates) {
        EXPECT_NEAR(predicted_gas_per_join(GasSchedule{}, u), static_cast<double>(u.total_gas) / u.joiners, 1e-6)
            << u.size;
    }
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(sweep_csv(rows).substr(0, sweep_csv(rows).find('\n')),
              "size,votes,avg_vote_gas,joiners,gas_per_join,usd_per_join");
    EXPECT_EQ(covering_update(r.updates, 13)->size, 14u);
    EXPECT_FALSE(covering_update(r.updates, 4).has_value());
}

TEST(Experiments, GasJsonListsEveryConstant) {
    const auto j = gas_json(GasSchedule{});
    for (auto key : {"g_base", "g_vote_store", "g_first_vote_init", "g_update_fixed", "g_update_per_member",
                     "g_register", "refund_per_freed_member", "g_vote_per_member"}) {
        EXPECT_NE(j.find(key), std::string::npos) << key;
    }
}

TEST(Experiments, AttackDemoSmall) {
    const auto bms = attack_demo(ClientMode::WithBms, 3);
    EXPECT_EQ(bms.runs.size(), 3u);
    EXPECT_EQ(bms.total_forged(), 0u);
    const auto control = attack_demo(ClientMode::Control, 3);
    EXPECT_EQ(control.runs_with_forgery(), 3u);
}
