// Experiment runner: scenarios, sweeps, attack demos and gas calibration.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "bms/experiments.hpp"

namespace fs = std::filesystem;
using namespace bms;

namespace {

fs::path out_dir(const std::string& flag) {
    if (const char* env = std::getenv("BMS_SIM_OUT"); env != nullptr && *env != '\0') return env;
    return flag;
}

void write_file(const fs::path& p, const std::string& body) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
}

void print_summary(const RunResult& r) {
    fmt::print("scenario {} seed {}: {} joins, {} votes, {} updates, ended at {:.1f}s after {} events\n", r.scenario,
               r.seed, r.joins.size(), r.votes.size(), r.updates.size(), r.end_time, r.events);
    fmt::print("local {} published {}\n", to_string(r.final_local), to_string(r.final_published));
    if (!r.churn_complete) fmt::print("churn did not complete before max_time\n");
    if (r.has_leaves) fmt::print("note: run includes leaves or evictions (beyond the join-only sweep)\n");
    if (!r.acceptances.empty()) {
        fmt::print("client accepted {} responses, {} forged\n", r.acceptances.size(), r.forged_acceptances);
    }
    if (r.schedule_violation) fmt::print("fault bound exceeded: {}\n", r.schedule_violation->describe());
    fmt::print("trace digest {:016x}\n", r.trace_digest);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BFT membership service simulator"};
    app.require_subcommand(1);

    std::string out = "out";

    auto* run = app.add_subcommand("run", "run one scenario file");
    std::string file;
    std::optional<std::uint64_t> seed;
    bool skip_confirmation = false;
    run->add_option("file", file, "scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out, "output directory");
    run->add_flag("--skip-confirmation", skip_confirmation, "report confirmation analytically instead of waiting");

    auto* sweep = app.add_subcommand("sweep", "join-only sweep between two sizes");
    std::string policy = "t1";
    std::size_t from = 4;
    std::size_t to = 100;
    std::uint64_t sweep_seed = 1;
    sweep->add_option("--policy", policy, "batching policy")->check(CLI::IsMember({"t1", "halff"}));
    sweep->add_option("--from", from, "initial size")->check(CLI::Range(1, 100000));
    sweep->add_option("--to", to, "final size")->check(CLI::Range(1, 100000));
    sweep->add_option("--seed", sweep_seed);
    sweep->add_option("--out", out, "output directory");

    auto* attack = app.add_subcommand("attack-demo", "long-range attack against a stale client");
    std::string mode = "bms";
    std::size_t seeds = 100;
    std::uint64_t first_seed = 1;
    attack->add_option("--mode", mode)->check(CLI::IsMember({"bms", "control"}));
    attack->add_option("--seeds", seeds, "number of seeded runs")->check(CLI::Range(1, 1000000));
    attack->add_option("--first-seed", first_seed);
    attack->add_option("--out", out, "output directory");

    auto* calib = app.add_subcommand("calibrate-gas", "fit gas constants to per-join anchors");
    std::string anchors_file;
    std::uint64_t calib_seed = 1;
    calib->add_option("--anchors", anchors_file, "CSV with size,gas[,usd]")->check(CLI::ExistingFile);
    calib->add_option("--seed", calib_seed);
    calib->add_option("--out", out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ScenarioConfig s = load_scenario(file);
            if (seed) s.seed = *seed;
            if (skip_confirmation) s.skip_confirmation = true;
            const RunResult r = run_scenario(s);
            const fs::path dir = out_dir(out);
            write_csvs(r, dir);
            write_file(dir / "scenario.json", dump_scenario(s));
            print_summary(r);
            fmt::print("wrote {}\n", dir.string());
        } else if (*sweep) {
            if (to < from) throw ScenarioError("--to must be at least --from");
            const Policy p = policy == "t1" ? Policy::every() : Policy::half_f();
            const ScenarioConfig s = sweep_scenario(p, from, to, sweep_seed);
            const RunResult r = run_scenario(s);
            const fs::path dir = out_dir(out);
            write_csvs(r, dir);
            write_file(dir / "sweep.csv", sweep_csv(aggregate_sweep(r, s.price)));
            write_file(dir / "scenario.json", dump_scenario(s));
            print_summary(r);
            fmt::print("wrote {}\n", dir.string());
        } else if (*attack) {
            const ClientMode m = mode == "bms" ? ClientMode::WithBms : ClientMode::Control;
            const AttackReport rep = attack_demo(m, seeds, first_seed);
            std::string csv = "seed,acceptances,forged,complete\n";
            for (const auto& r : rep.runs) {
                csv += fmt::format("{},{},{},{}\n", r.seed, r.acceptances, r.forged, r.complete ? 1 : 0);
            }
            const fs::path dir = out_dir(out);
            write_file(dir / fmt::format("attack_{}.csv", mode), csv);
            fmt::print("mode {}: {} runs, {} with a forged acceptance, {} forged acceptances in total\n", mode,
                       rep.runs.size(), rep.runs_with_forgery(), rep.total_forged());
        } else if (*calib) {
            std::vector<GasAnchor> anchors = default_anchors();
            if (!anchors_file.empty()) {
                std::ifstream in(anchors_file);
                std::stringstream buf;
                buf << in.rdbuf();
                anchors = parse_anchors(buf.str());
            }
            const Calibration c = calibrate_gas(anchors, GasSchedule{}, PriceModel{}, calib_seed);
            if (c.degenerate) fmt::print("degenerate fit: {}\n", c.note);
            fmt::print("fitted {} parameter(s)\n", c.fitted_parameters);
            for (const auto& r : c.rows) {
                fmt::print("size {:>4} (update at {:>4}): anchor {:>9.0f} fitted {:>9.0f} ({:+.2f}%)  ${:.2f}\n",
                           r.anchor.size, r.covering_size, r.anchor.gas, r.fitted_gas, 100.0 * r.residual,
                           r.fitted_usd);
            }
            const fs::path dir = out_dir(out);
            write_file(dir / "gas.json", gas_json(c.schedule));
            write_file(dir / "calibration.csv", calibration_csv(c));
            fmt::print("wrote {}\n", dir.string());
        }
    } catch (const RunFailure& e) {
        fmt::print(stderr, "invariant violated at t={:.3f}s (event {}): {}\n", e.at(), e.event(), e.what());
        return 3;
    } catch (const ScenarioError& e) {
        fmt::print(stderr, "invalid scenario: {}\n", e.what());
        return 2;
    } catch (const CalibrationError& e) {
        fmt::print(stderr, "calibration failed: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
