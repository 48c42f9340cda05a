#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "gpr.hpp"
#include "plant.hpp"
#include "scheduler.hpp"
#include "wireless.hpp"

namespace aoi_copilot {

inline constexpr double kDivergenceBound = 1e6;

struct SimConfig {
    std::size_t systems = 30;
    std::int64_t steps = 12000;  // 120 s at 10 ms
    std::size_t runs = 100;
    SchedulerKind scheduler = SchedulerKind::proposed;
    bool predictor_enabled = true;
    RadioParams radio;
    LyapunovParams lyapunov;
    GprHyperparams gpr = GprHyperparams::with_default_jitter(1.0, 20.0);
    std::size_t gpr_window = kDefaultGprWindow;
    double plant_noise_var = kDefaultPlantNoiseVar;
    std::uint64_t master_seed = 1;
    std::int64_t warmup_slots = kDefaultWarmupSlots;
};

/// Returns one message per violated constraint; empty when valid.
inline std::vector<std::string> validate(const SimConfig &c) {
    std::vector<std::string> errs;
    auto check = [&](bool ok, const char *msg) {
        if (!ok) { errs.emplace_back(msg); }
    };
    check(c.systems >= 1, "systems must be >= 1");
    check(c.steps >= 1, "steps must be >= 1");
    check(c.runs >= 1, "runs must be >= 1");
    check(c.radio.p_max > 0.0, "radio.p_max must be > 0");
    check(c.radio.snr_th > 0.0, "radio.snr_th must be > 0");
    check(c.radio.n0 > 0.0, "radio.n0 must be > 0");
    check(c.radio.sigma_x.rows() == 4 && c.radio.sigma_x.cols() == 4, "radio.sigma_x must be 4 x 4");
    check(is_symmetric_psd(c.radio.sigma_x), "radio.sigma_x must be symmetric PSD");
    check(c.lyapunov.v_weight >= 0.0, "lyapunov.v_weight must be >= 0");
    check(c.lyapunov.omega_beta > 0.0, "lyapunov.omega_beta must be > 0");
    check(c.lyapunov.omega_power > 0.0, "lyapunov.omega_power must be > 0");
    check(c.gpr.h > 0.0, "gpr.h must be > 0");
    check(c.gpr.lambda > 0.0, "gpr.lambda must be > 0");
    check(c.gpr.jitter >= 0.0, "gpr.jitter must be >= 0");
    check(c.gpr_window >= 1, "gpr.w_max must be >= 1");
    check(c.plant_noise_var >= 0.0, "plant_noise_var must be >= 0");
    check(c.warmup_slots >= 0, "warmup_slots must be >= 0");
    return errs;
}

inline const char *to_string(SchedulerKind kind) {
    return kind == SchedulerKind::proposed ? "proposed" : "round_robin";
}

/// One row per (run, slot, system). Values are those in effect during the
/// slot, before the end-of-slot AoI/queue updates.
struct TraceRecord {
    std::uint64_t run = 0;
    std::int64_t slot = 0;
    std::size_t system = 0;
    Vector x;
    double abs_angle = 0.0;
    std::int64_t beta = 1;
    int alpha = 0;
    int xi = 0;
    double power = 0.0;
    double trK = 0.0;
    double trV = 0.0;
    double m_bar = 0.0;
    double q_beta = 0.0;
    double q_power = 0.0;
    double q_stab = 0.0;
    double gamma_beta = 0.0;
    double gamma_power = 0.0;
};

struct RunMetrics {
    std::vector<double> mean_abs_angle;
    std::vector<double> peak_aoi;
    std::vector<double> post_warmup_peak_aoi;
    std::vector<double> mean_aoi;
    std::vector<double> mean_power;
    std::vector<double> scheduling_rate;
    std::vector<double> delivery_rate;
    std::vector<double> stability_bound;  // time-average of max{m, 0}
    std::vector<double> trk_gt_trv_fraction;
    std::vector<double> post_warmup_trk_gt_trv_fraction;

    double fleet_mean_abs_angle = 0.0;
    // Pooled over all systems' scheduled slots.
    std::int64_t scheduled_slots = 0;
    std::int64_t scheduled_trk_gt_trv = 0;
    std::int64_t post_warmup_scheduled_slots = 0;
    std::int64_t post_warmup_scheduled_trk_gt_trv = 0;

    bool diverged = false;
    std::size_t diverged_systems = 0;
    std::int64_t first_divergence_slot = -1;
};

struct RunResult {
    std::vector<TraceRecord> records;
    RunMetrics metrics;
};

using TraceSink = std::function<void(const TraceRecord &)>;

enum class StreamPurpose : std::uint64_t { channel = 1, plant_noise = 2, link_noise = 3 };

/// Independent stream per (master seed, run, system, purpose).
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t run, std::uint64_t system,
                       StreamPurpose purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                      static_cast<std::uint32_t>(system), static_cast<std::uint32_t>(purpose)};
    return Rng(seq);
}

namespace detail {

struct Loop {
    PlantState state;
    GprPredictor predictor;
    Vector last_estimate;
    bool diverged = false;
    Rng channel_rng;
    Rng plant_rng;
    Rng link_rng;
};

struct MetricAccumulator {
    explicit MetricAccumulator(std::size_t m)
        : abs_angle(m, 0.0), aoi(m, 0.0), power(m, 0.0), peak(m, 0.0), post_peak(m, 0.0),
          scheduled(m, 0), delivered(m, 0), kv(m, 0), post_scheduled(m, 0), post_kv(m, 0) {}

    std::vector<double> abs_angle, aoi, power, peak, post_peak;
    std::vector<std::int64_t> scheduled, delivered, kv, post_scheduled, post_kv;
};

}  // namespace detail

/// Simulates one run of all M loops. Per slot: draw channels; GPR
/// prediction (trK*); pre-transmission MMSE error trace at the
/// channel-inversion power (trV); update m and m_bar; decide; transmit and
/// gate on SNR; apply control; step plants; update AoI and queues.
///
/// A loop whose state leaves [-1e6, 1e6] is latched at its last finite
/// state and the run is flagged diverged; scheduling continues.
inline RunMetrics run_once(const SimConfig &config, std::uint64_t run, const TraceSink &sink) {
    if (auto errs = validate(config); !errs.empty()) {
        throw ContractViolation("invalid SimConfig: " + errs.front());
    }
    const std::size_t M = config.systems;
    const PlantModel plant = make_pendulum(config.plant_noise_var);
    const Index D = plant.state_dim();
    const RadioParams &radio = config.radio;

    Vector x0 = Vector::Zero(D);
    x0[kPendulumAngleIndex] = 0.1;

    std::vector<detail::Loop> loops;
    loops.reserve(M);
    for (std::size_t i = 0; i < M; ++i) {
        loops.push_back({PlantState{x0, 0}, GprPredictor(D, config.gpr_window, config.gpr),
                         Vector::Zero(D), false,
                         make_stream(config.master_seed, run, i, StreamPurpose::channel),
                         make_stream(config.master_seed, run, i, StreamPurpose::plant_noise),
                         make_stream(config.master_seed, run, i, StreamPurpose::link_noise)});
    }
    LyapunovScheduler scheduler(M, config.scheduler, config.lyapunov, radio.p_max, config.warmup_slots);

    RunMetrics metrics;
    detail::MetricAccumulator acc(M);
    std::vector<ChannelDraw> channels(M);
    std::vector<GprPrediction> predictions(M);
    std::vector<double> trK(M), trV(M), p_star(M);
    std::vector<int> xi(M);

    for (std::int64_t k = 0; k < config.steps; ++k) {
        for (std::size_t i = 0; i < M; ++i) {
            channels[i] = draw_channel(loops[i].channel_rng, D, radio.n0);
            predictions[i] = loops[i].predictor.predict(k);
            trK[i] = predictions[i].trK;
            p_star[i] = power_opt(channels[i], radio);
            trV[i] = mmse_error_trace(p_star[i], channels[i].matrix(), radio.n0, radio.sigma_x);
        }
        scheduler.observe(trK, trV);
        const std::vector<double> m_bars = scheduler.m_bars();
        const Decision decision = scheduler.decide(k, p_star);

        for (std::size_t i = 0; i < M; ++i) {
            auto &loop = loops[i];
            xi[i] = 0;
            Vector x_bar;
            if (decision.alpha[i] != 0) {
                const Matrix H = channels[i].matrix();
                const double power = decision.power[i];
                const Vector y = transmit(loop.state.x, power, H, radio.n0, loop.link_rng);
                if (success(snr(power, channels[i]), radio.snr_th)) {
                    xi[i] = 1;
                    x_bar = mmse_estimate(y, power, H, radio.n0, radio.sigma_x).x_bar;
                    loop.predictor.push(k, x_bar);
                    loop.last_estimate = x_bar;
                }
            }

            if (sink) {
                TraceRecord rec;
                rec.run = run;
                rec.slot = k;
                rec.system = i;
                rec.x = loop.state.x;
                rec.abs_angle = std::abs(loop.state.x[kPendulumAngleIndex]);
                rec.beta = scheduler.betas()[i];
                rec.alpha = decision.alpha[i];
                rec.xi = xi[i];
                rec.power = decision.power[i];
                rec.trK = trK[i];
                rec.trV = trV[i];
                rec.m_bar = m_bars[i];
                rec.q_beta = scheduler.queues().q_beta[i];
                rec.q_power = scheduler.queues().q_power[i];
                rec.q_stab = scheduler.queues().q_stab[i];
                rec.gamma_beta = decision.gamma_beta[i];
                rec.gamma_power = decision.gamma_power[i];
                sink(rec);
            }

            acc.abs_angle[i] += std::abs(loop.state.x[kPendulumAngleIndex]);
            const auto beta = static_cast<double>(scheduler.betas()[i]);
            acc.aoi[i] += beta;
            acc.peak[i] = std::max(acc.peak[i], beta);
            if (k >= config.warmup_slots) { acc.post_peak[i] = std::max(acc.post_peak[i], beta); }
            acc.power[i] += decision.power[i];
            if (decision.alpha[i] != 0) {
                const bool kv = trK[i] > trV[i];
                ++acc.scheduled[i];
                acc.kv[i] += kv ? 1 : 0;
                if (k >= config.warmup_slots) {
                    ++acc.post_scheduled[i];
                    acc.post_kv[i] += kv ? 1 : 0;
                }
            }
            acc.delivered[i] += xi[i];

            const Vector x_hat = config.predictor_enabled ? predictions[i].x_hat : loop.last_estimate;
            const Vector u = control_input(plant, xi[i] != 0, x_bar, x_hat);
            const Vector w = draw_plant_noise(loop.plant_rng, plant);
            if (!loop.diverged) {
                PlantState next = step(plant, loop.state, u, w);
                if (!next.x.allFinite() || next.x.cwiseAbs().maxCoeff() > kDivergenceBound) {
                    loop.diverged = true;
                    ++metrics.diverged_systems;
                    if (metrics.first_divergence_slot < 0) { metrics.first_divergence_slot = k; }
                } else {
                    loop.state = std::move(next);
                }
            }
        }
        scheduler.commit(decision, xi);
    }

    const auto steps = static_cast<double>(config.steps);
    const auto ratio = [](std::int64_t num, std::int64_t den) {
        return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
    };
    const std::vector<double> final_m_bars = scheduler.m_bars();
    for (std::size_t i = 0; i < M; ++i) {
        metrics.mean_abs_angle.push_back(acc.abs_angle[i] / steps);
        metrics.peak_aoi.push_back(acc.peak[i]);
        metrics.post_warmup_peak_aoi.push_back(acc.post_peak[i]);
        metrics.mean_aoi.push_back(acc.aoi[i] / steps);
        metrics.mean_power.push_back(acc.power[i] / steps);
        metrics.scheduling_rate.push_back(static_cast<double>(acc.scheduled[i]) / steps);
        metrics.delivery_rate.push_back(static_cast<double>(acc.delivered[i]) / steps);
        metrics.stability_bound.push_back(final_m_bars[i]);
        metrics.trk_gt_trv_fraction.push_back(ratio(acc.kv[i], acc.scheduled[i]));
        metrics.post_warmup_trk_gt_trv_fraction.push_back(ratio(acc.post_kv[i], acc.post_scheduled[i]));
        metrics.scheduled_slots += acc.scheduled[i];
        metrics.scheduled_trk_gt_trv += acc.kv[i];
        metrics.post_warmup_scheduled_slots += acc.post_scheduled[i];
        metrics.post_warmup_scheduled_trk_gt_trv += acc.post_kv[i];
    }
    double angle_sum = 0.0;
    for (double a : metrics.mean_abs_angle) { angle_sum += a; }
    metrics.fleet_mean_abs_angle = angle_sum / static_cast<double>(M);
    metrics.diverged = metrics.diverged_systems > 0;
    return metrics;
}

inline RunResult run_once(const SimConfig &config, std::uint64_t run = 0) {
    RunResult result;
    result.records.reserve(static_cast<std::size_t>(config.steps) * config.systems);
    result.metrics = run_once(config, run, [&](const TraceRecord &r) { result.records.push_back(r); });
    return result;
}

/// Cross-run summary of one metric: mean/std of the per-run fleet value and
/// the per-system means.
struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> per_system;
};

struct ExperimentMetrics {
    SchedulerKind scheduler = SchedulerKind::proposed;
    bool predictor_enabled = true;
    std::size_t runs = 0;
    std::size_t diverged_runs = 0;
    std::vector<std::pair<std::string, MetricSummary>> metrics;  // insertion order
    std::vector<RunMetrics> per_run;

    [[nodiscard]] double diverged_fraction() const {
        return runs == 0 ? 0.0 : static_cast<double>(diverged_runs) / static_cast<double>(runs);
    }
    [[nodiscard]] const MetricSummary &at(const std::string &name) const {
        for (const auto &[key, value] : metrics) {
            if (key == name) { return value; }
        }
        throw std::out_of_range("unknown metric: " + name);
    }
};

namespace detail {

enum class FleetReduce { mean, max, pooled_trk, pooled_post_trk };

inline MetricSummary summarize(const std::vector<RunMetrics> &runs,
                               std::vector<double> RunMetrics::*field, FleetReduce reduce) {
    MetricSummary s;
    const std::size_t m = (runs.front().*field).size();
    s.per_system.assign(m, 0.0);
    std::vector<double> fleet;
    for (const auto &r : runs) {
        const auto &v = r.*field;
        double value = 0.0;
        switch (reduce) {
        case FleetReduce::mean:
            for (double x : v) { value += x; }
            value /= static_cast<double>(m);
            break;
        case FleetReduce::max:
            value = *std::max_element(v.begin(), v.end());
            break;
        case FleetReduce::pooled_trk:
            value = r.scheduled_slots > 0 ? static_cast<double>(r.scheduled_trk_gt_trv) /
                                                static_cast<double>(r.scheduled_slots)
                                          : 0.0;
            break;
        case FleetReduce::pooled_post_trk:
            value = r.post_warmup_scheduled_slots > 0
                        ? static_cast<double>(r.post_warmup_scheduled_trk_gt_trv) /
                              static_cast<double>(r.post_warmup_scheduled_slots)
                        : 0.0;
            break;
        }
        fleet.push_back(value);
        for (std::size_t i = 0; i < m; ++i) { s.per_system[i] += v[i]; }
    }
    const auto n = static_cast<double>(runs.size());
    for (double &x : s.per_system) { x /= n; }
    for (double f : fleet) { s.mean += f; }
    s.mean /= n;
    if (runs.size() > 1) {
        double ss = 0.0;
        for (double f : fleet) { ss += (f - s.mean) * (f - s.mean); }
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

}  // namespace detail

inline ExperimentMetrics aggregate(const SimConfig &config, std::vector<RunMetrics> runs) {
    require(!runs.empty(), "aggregate: need at least one run");
    using detail::FleetReduce;
    ExperimentMetrics out;
    out.scheduler = config.scheduler;
    out.predictor_enabled = config.predictor_enabled;
    out.runs = runs.size();
    for (const auto &r : runs) { out.diverged_runs += r.diverged ? 1 : 0; }
    auto add = [&](const char *name, std::vector<double> RunMetrics::*field, FleetReduce reduce) {
        out.metrics.emplace_back(name, detail::summarize(runs, field, reduce));
    };
    add("fleet_mean_abs_angle", &RunMetrics::mean_abs_angle, FleetReduce::mean);
    add("peak_aoi", &RunMetrics::peak_aoi, FleetReduce::max);
    add("post_warmup_peak_aoi", &RunMetrics::post_warmup_peak_aoi, FleetReduce::max);
    add("mean_aoi", &RunMetrics::mean_aoi, FleetReduce::mean);
    add("mean_power", &RunMetrics::mean_power, FleetReduce::mean);
    add("scheduling_rate", &RunMetrics::scheduling_rate, FleetReduce::mean);
    add("delivery_rate", &RunMetrics::delivery_rate, FleetReduce::mean);
    add("stability_bound", &RunMetrics::stability_bound, FleetReduce::mean);
    add("trk_gt_trv_fraction", &RunMetrics::trk_gt_trv_fraction, FleetReduce::pooled_trk);
    add("post_warmup_trk_gt_trv_fraction", &RunMetrics::post_warmup_trk_gt_trv_fraction,
        FleetReduce::pooled_post_trk);
    out.per_run = std::move(runs);
    return out;
}

/// Called once per run, in run order, with that run's trace (empty when
/// traces are not requested) and metrics.
using RunCallback = std::function<void(std::uint64_t run, const RunResult &)>;

/// Executes config.runs independent runs, up to `workers` at a time, and
/// aggregates them. Results are delivered to on_run in run order.
inline ExperimentMetrics run_experiment(const SimConfig &config, std::size_t workers = 1,
                                        const RunCallback &on_run = {}, bool keep_traces = false) {
    if (auto errs = validate(config); !errs.empty()) {
        throw ContractViolation("invalid SimConfig: " + errs.front());
    }
    workers = std::max<std::size_t>(workers, 1);
    auto one = [&config, keep_traces](std::uint64_t run) {
        if (keep_traces) { return run_once(config, run); }
        RunResult r;
        r.metrics = run_once(config, run, TraceSink{});
        return r;
    };

    std::vector<RunMetrics> all;
    all.reserve(config.runs);
    for (std::size_t first = 0; first < config.runs; first += workers) {
        const std::size_t last = std::min(config.runs, first + workers);
        std::vector<std::future<RunResult>> batch;
        for (std::size_t r = first; r < last; ++r) {
            batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, one,
                                       static_cast<std::uint64_t>(r)));
        }
        for (std::size_t j = 0; j < batch.size(); ++j) {
            RunResult result = batch[j].get();
            if (on_run) { on_run(first + j, result); }
            all.push_back(std::move(result.metrics));
        }
    }
    return aggregate(config, std::move(all));
}

}  // namespace aoi_copilot
