#include "bms/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "json.hpp"

namespace bms {

std::vector<SweepRow> aggregate_sweep(const RunResult& r, const PriceModel& price) {
    std::map<std::size_t, SweepRow> rows;
    std::map<std::size_t, double> vote_sum;
    std::map<std::size_t, double> update_gas;
    for (const auto& v : r.votes) {
        SweepRow& row = rows[v.size];
        row.size = v.size;
        ++row.votes;
        vote_sum[v.size] += static_cast<double>(v.gas);
    }
    for (const auto& u : r.updates) {
        SweepRow& row = rows[u.size];
        row.size = u.size;
        row.joiners += u.joiners;
        update_gas[u.size] += static_cast<double>(u.total_gas);
    }
    std::vector<SweepRow> out;
    for (auto& [size, row] : rows) {
        if (row.votes > 0) row.avg_vote_gas = vote_sum[size] / static_cast<double>(row.votes);
        if (row.joiners > 0) {
            row.gas_per_join = update_gas[size] / static_cast<double>(row.joiners);
            row.usd_per_join = usd_cost(static_cast<Gas>(std::llround(*row.gas_per_join)), price);
        }
        out.push_back(row);
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "size,votes,avg_vote_gas,joiners,gas_per_join,usd_per_join\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{:.2f},{},{},{}\n", r.size, r.votes, r.avg_vote_gas, r.joiners,
                           r.gas_per_join ? fmt::format("{:.2f}", *r.gas_per_join) : "",
                           r.usd_per_join ? fmt::format("{:.4f}", *r.usd_per_join) : "");
    }
    return out;
}

std::vector<std::size_t> projected_update_sizes(Policy policy, std::size_t from, std::size_t until) {
    std::vector<std::size_t> sizes;
    std::size_t published = from;
    for (std::size_t n = from + 1;; ++n) {
        if (n - published >= policy_threshold(policy, n)) {
            sizes.push_back(n);
            published = n;
            if (n >= until) break;
        }
    }
    return sizes;
}

std::size_t AttackReport::runs_with_forgery() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const AttackRun& r) { return r.forged > 0; }));
}

std::size_t AttackReport::total_forged() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.forged;
    return n;
}

AttackReport attack_demo(ClientMode mode, std::size_t seeds, std::uint64_t first_seed) {
    AttackReport report;
    report.mode = mode;
    for (std::size_t i = 0; i < seeds; ++i) {
        LongRangeOptions opts;
        opts.mode = mode;
        opts.seed = first_seed + i;
        const RunResult r = run_scenario(long_range_scenario(opts));
        report.runs.push_back(AttackRun{opts.seed, r.acceptances.size(), r.forged_acceptances, r.churn_complete});
    }
    return report;
}

std::vector<GasAnchor> default_anchors() {
    return {{5, 166640, 5.71}, {25, 113314, 3.88}, {60, 111179, 3.81}, {93, 127590, 4.37}};
}

std::vector<GasAnchor> parse_anchors(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell.erase(0, cell.find_first_not_of(" \t\r"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            cells.push_back(cell);
        }
        return cells;
    };
    if (!std::getline(in, line)) throw CalibrationError("anchor file is empty");
    const auto header = split(line);
    auto column = [&](const char* name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto size_col = column("size");
    const auto gas_col = column("gas");
    const auto usd_col = column("usd");
    if (!size_col || !gas_col) throw CalibrationError("anchor header needs 'size' and 'gas' columns");

    std::vector<GasAnchor> anchors;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split(line);
        try {
            GasAnchor a;
            a.size = std::stoul(cells.at(*size_col));
            a.gas = std::stod(cells.at(*gas_col));
            if (usd_col && *usd_col < cells.size() && !cells[*usd_col].empty()) a.usd = std::stod(cells[*usd_col]);
            if (a.size < 2 || a.gas <= 0) throw std::invalid_argument("out of range");
            anchors.push_back(a);
        } catch (const std::exception&) {
            throw CalibrationError(fmt::format("anchor line {}: cannot read '{}'", lineno, line));
        }
    }
    return anchors;
}

std::optional<UpdateRecord> covering_update(const std::vector<UpdateRecord>& updates, std::size_t size) {
    for (const auto& u : updates) {
        if (u.joiners > 0 && u.previous_size < size && size <= u.size) return u;
    }
    return std::nullopt;
}

namespace {

// Columns: per-vote constant, per-update constant, per carried member, per changed member.
std::array<double, 4> features(const UpdateRecord& u) {
    const double k = static_cast<double>(u.joiners);
    const double v = static_cast<double>(u.voters);
    const double n = static_cast<double>(u.size);
    const double changed = static_cast<double>(u.joiners + u.leavers);
    return {v / k, 1.0 / k, v * n / k, changed / k};
}

std::array<double, 4> parameters(const GasSchedule& g) {
    return {static_cast<double>(g.g_base + g.g_vote_store), static_cast<double>(g.g_first_vote_init + g.g_update_fixed),
            static_cast<double>(g.g_vote_per_member), static_cast<double>(g.g_update_per_member)};
}

}  // namespace

double predicted_gas_per_join(const GasSchedule& g, const UpdateRecord& u) {
    const auto x = features(u);
    const auto p = parameters(g);
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) sum += x[i] * p[i];
    return sum;
}

Calibration calibrate_gas(const std::vector<GasAnchor>& anchors, const GasSchedule& base, const PriceModel& price,
                          std::uint64_t seed) {
    if (anchors.size() < 2) {
        throw CalibrationError(fmt::format("{} anchor(s) cannot determine the gas constants; give at least two",
                                           anchors.size()));
    }
    std::size_t largest = 0;
    for (const auto& a : anchors) largest = std::max(largest, a.size);
    const std::size_t from = 4;
    if (largest <= from) throw CalibrationError("anchor sizes must exceed the initial size 4");
    const auto sizes = projected_update_sizes(Policy::half_f(), from, largest);

    ScenarioConfig s = sweep_scenario(Policy::half_f(), from, sizes.back(), seed);
    s.gas = base;
    s.price = price;
    const RunResult run = run_scenario(s);

    const std::size_t rows = anchors.size();
    std::vector<UpdateRecord> covering;
    for (const auto& a : anchors) {
        auto u = covering_update(run.updates, a.size);
        if (!u) throw CalibrationError(fmt::format("no update covers size {}", a.size));
        covering.push_back(*u);
    }

    // Fit the leading parameters; the rest stay at their input values.
    const std::size_t fit = std::min<std::size_t>(rows, 4);
    const auto fixed = parameters(base);
    Eigen::MatrixXd A(rows, fit);
    Eigen::VectorXd y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto x = features(covering[i]);
        double rest = 0.0;
        for (std::size_t j = fit; j < 4; ++j) rest += x[j] * fixed[j];
        for (std::size_t j = 0; j < fit; ++j) A(i, j) = x[j];
        y(i) = anchors[i].gas - rest;
    }

    // Non-negative least squares by trying every active set.
    Eigen::VectorXd best = Eigen::VectorXd::Zero(fit);
    double best_err = (y).squaredNorm();
    for (unsigned mask = 1; mask < (1u << fit); ++mask) {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < fit; ++j) {
            if (mask & (1u << j)) cols.push_back(j);
        }
        Eigen::MatrixXd sub(rows, cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) sub.col(c) = A.col(cols[c]);
        const Eigen::VectorXd z = sub.colPivHouseholderQr().solve(y);
        if ((z.array() < 0.0).any()) continue;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(fit);
        for (std::size_t c = 0; c < cols.size(); ++c) x(cols[c]) = z(c);
        const double err = (A * x - y).squaredNorm();
        if (err < best_err - 1e-9 * std::max(1.0, best_err)) {
            best_err = err;
            best = x;
        }
    }

    Calibration out;
    out.fitted_parameters = fit;
    std::array<double, 4> p = fixed;
    for (std::size_t j = 0; j < fit; ++j) p[j] = best(j);
    GasSchedule g = base;
    g.g_vote_store = static_cast<Gas>(std::llround(p[0])) - base.g_base;
    g.g_first_vote_init = static_cast<Gas>(std::llround(p[1])) - base.g_update_fixed;
    g.g_vote_per_member = static_cast<Gas>(std::llround(p[2]));
    g.g_update_per_member = static_cast<Gas>(std::llround(p[3]));
    if (g.g_vote_store < 0 || g.g_first_vote_init < 0) {
        out.degenerate = true;
        out.note = fmt::format("fit needs a per-vote cost of {:.0f} and a per-update cost of {:.0f}, below the fixed "
                               "base costs; keeping the input schedule",
                               p[0], p[1]);
        g = base;
    }
    out.schedule = g;
    for (std::size_t i = 0; i < rows; ++i) {
        CalibrationRow row;
        row.anchor = anchors[i];
        row.covering_size = covering[i].size;
        row.fitted_gas = predicted_gas_per_join(g, covering[i]);
        row.fitted_usd = usd_cost(static_cast<Gas>(std::llround(row.fitted_gas)), price);
        row.residual = (row.fitted_gas - anchors[i].gas) / anchors[i].gas;
        out.rows.push_back(row);
    }
    return out;
}

std::string calibration_csv(const Calibration& c) {
    std::string out = "size,covering_size,anchor_gas,fitted_gas,residual_pct,anchor_usd,fitted_usd\n";
    for (const auto& r : c.rows) {
        out += fmt::format("{},{},{:.0f},{:.0f},{:.3f},{},{:.4f}\n", r.anchor.size, r.covering_size, r.anchor.gas,
                           r.fitted_gas, 100.0 * r.residual, r.anchor.usd ? fmt::format("{:.2f}", *r.anchor.usd) : "",
                           r.fitted_usd);
    }
    return out;
}

std::string gas_json(const GasSchedule& g) {
    nlohmann::json j = {{"g_base", g.g_base},
                        {"g_vote_store", g.g_vote_store},
                        {"g_first_vote_init", g.g_first_vote_init},
                        {"g_update_fixed", g.g_update_fixed},
                        {"g_update_per_member", g.g_update_per_member},
                        {"g_register", g.g_register},
                        {"refund_per_freed_member", g.refund_per_freed_member},
                        {"g_vote_per_member", g.g_vote_per_member}};
    return j.dump(2) + "\n";
}

}  // namespace bms
