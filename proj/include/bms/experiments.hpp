#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bms/world.hpp"

namespace bms {

// Per-size averages of one sweep run.
struct SweepRow {
    std::size_t size = 0;
    std::size_t votes = 0;
    double avg_vote_gas = 0.0;
    std::size_t joiners = 0;
    std::optional<double> gas_per_join;
    std::optional<double> usd_per_join;
};

std::vector<SweepRow> aggregate_sweep(const RunResult& r, const PriceModel& price);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Sizes at which a join-only run from `from` publishes, up to the first one >= `until`.
std::vector<std::size_t> projected_update_sizes(Policy policy, std::size_t from, std::size_t until);

struct AttackRun {
    std::uint64_t seed = 0;
    std::size_t acceptances = 0;
    std::size_t forged = 0;
    bool complete = false;
};

struct AttackReport {
    ClientMode mode = ClientMode::WithBms;
    std::vector<AttackRun> runs;

    std::size_t runs_with_forgery() const;
    std::size_t total_forged() const;
};

AttackReport attack_demo(ClientMode mode, std::size_t seeds, std::uint64_t first_seed = 1);

struct GasAnchor {
    std::size_t size = 0;
    double gas = 0.0;
    std::optional<double> usd;
};

// Per-join gas and cost of the four reference rows.
std::vector<GasAnchor> default_anchors();
// CSV with a header naming at least `size` and `gas`; an optional `usd` column.
std::vector<GasAnchor> parse_anchors(std::string_view csv);

class CalibrationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Update whose size range (previous_size, size] contains `size`.
std::optional<UpdateRecord> covering_update(const std::vector<UpdateRecord>& updates, std::size_t size);

// Per-join gas the schedule charges for a join-only update.
double predicted_gas_per_join(const GasSchedule& g, const UpdateRecord& u);

struct CalibrationRow {
    GasAnchor anchor;
    std::size_t covering_size = 0;
    double fitted_gas = 0.0;
    double fitted_usd = 0.0;
    double residual = 0.0;
};

struct Calibration {
    GasSchedule schedule;
    std::vector<CalibrationRow> rows;
    std::size_t fitted_parameters = 0;
    // Fit gave constants the model cannot represent; schedule is the input one.
    bool degenerate = false;
    std::string note;
};

// Non-negative least squares fit of the gas constants against anchors, using
// the updates of a half-f join sweep. Throws CalibrationError with fewer than two anchors.
Calibration calibrate_gas(const std::vector<GasAnchor>& anchors, const GasSchedule& base = {},
                          const PriceModel& price = {}, std::uint64_t seed = 1);
std::string calibration_csv(const Calibration& c);
std::string gas_json(const GasSchedule& g);

}  // namespace bms
