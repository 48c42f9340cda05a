#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aoi_copilot/config.hpp"
#include "aoi_copilot/sim.hpp"
#include "aoi_copilot/trace_io.hpp"

namespace aoi_copilot::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kUnstable = 3 };

struct Overrides {
    std::string config_path;
    std::optional<std::string> scheduler;
    bool no_gpr = false;
    std::optional<std::int64_t> steps;
    std::optional<std::size_t> systems;
    std::optional<std::int64_t> runs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t workers = 1;
};

inline std::filesystem::path resolve_out_dir(const Overrides &o) {
    if (o.out_dir) { return *o.out_dir; }
    if (const char *env = std::getenv("AOI_COPILOT_OUT"); env != nullptr && *env != '\0') { return env; }
    return ".";
}

/// File (if any), then flags, then validation. Throws ConfigError.
inline SimConfig build_config(const Overrides &o) {
    SimConfig cfg;
    if (!o.config_path.empty()) { cfg = load_config(o.config_path, cfg, false); }
    std::vector<std::string> errs;
    if (o.scheduler) {
        if (auto kind = parse_scheduler(*o.scheduler)) {
            cfg.scheduler = *kind;
        } else {
            errs.push_back("--scheduler: expected 'proposed' or 'round_robin'");
        }
    }
    if (o.no_gpr) { cfg.predictor_enabled = false; }
    if (o.steps) { cfg.steps = *o.steps; }
    if (o.systems) { cfg.systems = *o.systems; }
    if (o.runs) {
        if (*o.runs < 0) {
            errs.push_back("--runs: must be >= 1");
        } else {
            cfg.runs = static_cast<std::size_t>(*o.runs);
        }
    }
    if (o.seed) { cfg.master_seed = *o.seed; }
    for (auto &e : validate(cfg)) { errs.push_back("config: " + e); }
    if (!errs.empty()) { throw ConfigError(std::move(errs)); }
    return cfg;
}

/// Runs one experiment, streaming its trace to `trace_<scheduler>.csv` and
/// writing `metrics_<scheduler>.json` under out_dir.
inline ExperimentMetrics execute(const SimConfig &cfg, const std::filesystem::path &out_dir,
                                 std::size_t workers) {
    const std::string tag = to_string(cfg.scheduler);
    std::filesystem::create_directories(out_dir);
    AtomicFile trace(out_dir / ("trace_" + tag + ".csv"));
    trace.stream() << trace_csv_header(4) << '\n';
    std::string rows;
    auto metrics = run_experiment(
        cfg, workers,
        [&](std::uint64_t, const RunResult &r) {
            for (const auto &rec : r.records) {
                append_csv_row(rows, rec);
                if (rows.size() > (1u << 20)) {
                    trace.stream() << rows;
                    rows.clear();
                }
            }
        },
        true);
    trace.stream() << rows;
    trace.commit();
    write_file_atomic(out_dir / ("metrics_" + tag + ".json"), metrics_to_json(metrics).dump(2) + "\n");
    return metrics;
}

inline void add_common_flags(CLI::App &cmd, Overrides &o) {
    cmd.add_option("--config", o.config_path, "JSON config file");
    cmd.add_option("--steps", o.steps, "slots per run");
    cmd.add_option("--systems", o.systems, "number of control loops M");
    cmd.add_option("--runs", o.runs, "independent runs");
    cmd.add_option("--seed", o.seed, "master seed");
    cmd.add_option("--out-dir", o.out_dir, "output directory (default $AOI_COPILOT_OUT or .)");
    cmd.add_option("--workers", o.workers, "max concurrent runs")->check(CLI::PositiveNumber);
}

inline int report_config_error(const ConfigError &e) {
    for (const auto &d : e.diagnostics()) { std::cerr << "config error: " << d << '\n'; }
    return kConfigError;
}

inline int cmd_run(const Overrides &o) {
    SimConfig cfg;
    try {
        cfg = build_config(o);
    } catch (const ConfigError &e) {
        return report_config_error(e);
    }
    const auto metrics = execute(cfg, resolve_out_dir(o), o.workers);
    std::cout << to_string(cfg.scheduler) << ": fleet mean |angle| "
              << metrics.at("fleet_mean_abs_angle").mean << " rad, diverged runs " << metrics.diverged_runs
              << "/" << metrics.runs << '\n';
    return metrics.diverged_fraction() > 0.5 ? kUnstable : kOk;
}

inline int cmd_compare(const Overrides &o) {
    SimConfig base;
    try {
        base = build_config(o);
    } catch (const ConfigError &e) {
        return report_config_error(e);
    }
    const auto out_dir = resolve_out_dir(o);
    SimConfig proposed = base;
    proposed.scheduler = SchedulerKind::proposed;
    SimConfig baseline = base;
    baseline.scheduler = SchedulerKind::round_robin;
    baseline.predictor_enabled = false;

    const auto mp = execute(proposed, out_dir, o.workers);
    const auto mb = execute(baseline, out_dir, o.workers);

    const double angle_p = mp.at("fleet_mean_abs_angle").mean;
    const double angle_b = mb.at("fleet_mean_abs_angle").mean;
    const double peak_p = mp.at("post_warmup_peak_aoi").mean;
    const double peak_b = mb.at("post_warmup_peak_aoi").mean;
    nlohmann::json cmp = {
        {"error_ratio", angle_p > 0.0 ? angle_b / angle_p : 0.0},
        {"peak_aoi_ratio", peak_b > 0.0 ? peak_p / peak_b : 0.0},
        {"trk_gt_trv_fraction", mp.at("post_warmup_trk_gt_trv_fraction").mean},
        {"proposed_fleet_mean_abs_angle", angle_p},
        {"baseline_fleet_mean_abs_angle", angle_b},
        {"proposed_post_warmup_peak_aoi", peak_p},
        {"baseline_post_warmup_peak_aoi", peak_b},
        {"proposed_diverged_runs", mp.diverged_runs},
        {"baseline_diverged_runs", mb.diverged_runs},
        {"runs", base.runs}};
    write_file_atomic(out_dir / "comparison.json", cmp.dump(2) + "\n");
    std::cout << "error ratio (baseline/proposed): " << cmp["error_ratio"].get<double>()
              << ", peak AoI ratio: " << cmp["peak_aoi_ratio"].get<double>() << '\n';
    return (mp.diverged_fraction() > 0.5 || mb.diverged_fraction() > 0.5) ? kUnstable : kOk;
}

/// Entry point shared by the executable and the tests. args excludes argv[0].
inline int main_entry(std::vector<std::string> args) {
    CLI::App app{"Networked control simulator: AoI-aware scheduling with GPR state prediction"};
    app.name("aoi-copilot");
    app.require_subcommand(1);
    Overrides run_o;
    Overrides cmp_o;
    auto *run = app.add_subcommand("run", "run one scheduler and write its trace and metrics");
    add_common_flags(*run, run_o);
    run->add_option("--scheduler", run_o.scheduler, "proposed | round_robin");
    run->add_flag("--no-gpr", run_o.no_gpr, "disable GPR prediction (hold last estimate)");
    auto *compare = app.add_subcommand("compare", "run proposed vs. round-robin without GPR");
    add_common_flags(*compare, cmp_o);

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kConfigError;
    }
    try {
        if (run->parsed()) { return cmd_run(run_o); }
        return cmd_compare(cmp_o);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace aoi_copilot::cli
