#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "wireless.hpp"

namespace aoi_copilot {

inline constexpr double kRatioEpsilon = 1e-9;
inline constexpr double kRatioCap = 1e6;
inline constexpr double kGammaMax = 1e6;
inline constexpr std::int64_t kDefaultWarmupSlots = 200;

/// Drift-plus-penalty trade-off V and the cost weights of the AoI and power
/// terms (both costs are log(1 + .)).
struct LyapunovParams {
    double v_weight = 100.0;
    double omega_beta = 1.0;
    double omega_power = 1.0;
};

struct VirtualQueues {
    std::vector<double> q_beta;
    std::vector<double> q_power;
    std::vector<double> q_stab;

    explicit VirtualQueues(std::size_t m = 0) : q_beta(m, 0.0), q_power(m, 0.0), q_stab(m, 0.0) {}
    [[nodiscard]] std::size_t size() const { return q_beta.size(); }
};

struct Decision {
    std::vector<int> alpha;
    std::vector<double> power;
    std::vector<double> gamma_beta;
    std::vector<double> gamma_power;

    explicit Decision(std::size_t m = 0)
        : alpha(m, 0), power(m, 0.0), gamma_beta(m, 0.0), gamma_power(m, 0.0) {}
};

/// AoI recursion: beta' = 1 + (1 - xi) beta.
inline std::int64_t aoi_update(std::int64_t beta, bool delivered) {
    require(beta >= 1, "aoi_update: AoI must be at least 1");
    return 1 + (delivered ? 0 : beta);
}

/// Tr K* / (Tr K* - Tr V), capped near the singular point and zero when the
/// prediction is no worse than the estimate.
inline double stability_ratio(double trK, double trV) {
    const double gap = trK - trV;
    if (gap > kRatioEpsilon) { return std::min(trK / gap, kRatioCap); }
    if (gap > 0.0) { return kRatioCap; }
    return 0.0;
}

/// Running time-average of max{m, 0}.
class StabilityTracker {
public:
    void update(double m) {
        sum_ += std::max(m, 0.0);
        ++count_;
        m_bar_ = sum_ / static_cast<double>(count_);
    }
    [[nodiscard]] double m_bar() const { return m_bar_; }
    [[nodiscard]] std::int64_t count() const { return count_; }

private:
    double sum_ = 0.0;
    double m_bar_ = 0.0;
    std::int64_t count_ = 0;
};

inline double aux_beta_opt(double q_beta, const LyapunovParams &params) {
    require(q_beta >= 0.0, "aux_beta_opt: queue must be non-negative");
    if (q_beta == 0.0) { return kGammaMax; }
    return std::max((params.v_weight * params.omega_beta - q_beta) / q_beta, 1.0);
}

inline double aux_power_opt(double q_power, const LyapunovParams &params, double p_max) {
    require(q_power >= 0.0, "aux_power_opt: queue must be non-negative");
    if (q_power == 0.0) { return p_max; }
    return std::min(std::max((params.v_weight * params.omega_power - q_power) / q_power, 0.0), p_max);
}

/// Channel-inversion power hitting SNR_th with equality, clamped to P_max.
/// The result is nudged up by ulps if rounding would leave snr just below
/// the threshold. Zero channel energy returns P_max.
inline double power_opt(double gain_energy, double n0, double snr_th, double p_max) {
    if (!(gain_energy > 0.0)) { return p_max; }
    double p = snr_th * n0 / gain_energy;
    for (int i = 0; i < 4 && p * gain_energy / n0 < snr_th; ++i) {
        p = std::nextafter(p, std::numeric_limits<double>::infinity());
    }
    return std::min(p, p_max);
}

inline double power_opt(const ChannelDraw &channel, const RadioParams &radio) {
    return power_opt(channel.gain_energy(), channel.n0, radio.snr_th, radio.p_max);
}

/// Reduction of the drift-plus-penalty bound bought by scheduling system i:
/// Q^beta * beta - Q^P * P* - Q^S.
inline double priority_score(double q_beta, std::int64_t beta, double q_power, double p_star,
                             double q_stab) {
    return q_beta * static_cast<double>(beta) - q_power * p_star - q_stab;
}

/// One-hot (or empty) scheduling decision. Systems are visited in order of
/// descending priority score (ties by lower index); the first one with a
/// positive score and max{m_bar, 0} >= 1 is granted. During warm-up
/// (slot < warmup_slots) the m_bar gate is waived if nobody qualified.
inline std::vector<int> schedule(const VirtualQueues &queues, const std::vector<std::int64_t> &betas,
                                 const std::vector<double> &m_bars,
                                 const std::vector<double> &p_stars, std::int64_t slot = 0,
                                 std::int64_t warmup_slots = kDefaultWarmupSlots) {
    const std::size_t m = queues.size();
    require(betas.size() == m && m_bars.size() == m && p_stars.size() == m,
            "schedule: per-system vectors must have equal length");

    std::vector<double> score(m);
    for (std::size_t i = 0; i < m; ++i) {
        score[i] = priority_score(queues.q_beta[i], betas[i], queues.q_power[i], p_stars[i],
                                  queues.q_stab[i]);
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    std::vector<int> alpha(m, 0);
    for (std::size_t i : order) {
        if (score[i] > 0.0 && std::max(m_bars[i], 0.0) >= 1.0) {
            alpha[i] = 1;
            return alpha;
        }
    }
    if (slot < warmup_slots) {
        for (std::size_t i : order) {
            if (score[i] > 0.0) {
                alpha[i] = 1;
                return alpha;
            }
        }
    }
    return alpha;
}

inline double queue_update_beta(double q, double gamma, double beta) {
    return std::max(q - gamma, 0.0) + beta;
}

inline double queue_update_power(double q, double gamma, double p_hat) {
    return std::max(q - gamma, 0.0) + p_hat;
}

inline double queue_update_stab(double q, double m_bar, double alpha) {
    return std::max(q - std::max(m_bar, 0.0), 0.0) + alpha;
}

/// Right-hand side of the drift-plus-penalty bound without the constant B.
/// Diagnostic only.
inline double per_slot_objective(const LyapunovParams &params, const VirtualQueues &queues,
                                 const Decision &decision, const std::vector<std::int64_t> &next_betas,
                                 const std::vector<double> &m_bars) {
    const std::size_t m = queues.size();
    require(decision.alpha.size() == m && next_betas.size() == m && m_bars.size() == m,
            "per_slot_objective: per-system vectors must have equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double gb = decision.gamma_beta[i];
        const double gp = decision.gamma_power[i];
        total += params.v_weight * params.omega_beta * std::log1p(gb) - queues.q_beta[i] * gb;
        total += params.v_weight * params.omega_power * std::log1p(gp) - queues.q_power[i] * gp;
        total += queues.q_beta[i] * static_cast<double>(next_betas[i]);
        total += queues.q_power[i] * static_cast<double>(decision.alpha[i]) * decision.power[i];
        total -= queues.q_stab[i] * (std::max(m_bars[i], 0.0) - static_cast<double>(decision.alpha[i]));
    }
    return total;
}

/// Baseline: one-hot at k mod M.
inline std::vector<int> round_robin(std::int64_t k, std::size_t m) {
    require(m >= 1, "round_robin: need at least one system");
    require(k >= 0, "round_robin: slot must be non-negative");
    std::vector<int> alpha(m, 0);
    alpha[static_cast<std::size_t>(k % static_cast<std::int64_t>(m))] = 1;
    return alpha;
}

enum class SchedulerKind { proposed, round_robin };

/// Owns all per-system scheduling state: AoI, virtual queues and the
/// stability trackers. Per slot: observe() -> decide() -> commit().
class LyapunovScheduler {
public:
    LyapunovScheduler(std::size_t m, SchedulerKind kind, LyapunovParams params, double p_max,
                      std::int64_t warmup_slots = kDefaultWarmupSlots)
        : kind_(kind), params_(params), p_max_(p_max), warmup_(warmup_slots),
          queues_(m), betas_(m, 1), trackers_(m) {
        require(m >= 1, "LyapunovScheduler: need at least one system");
    }

    /// Feed this slot's prediction/estimation error traces; returns m per system.
    std::vector<double> observe(const std::vector<double> &trK, const std::vector<double> &trV) {
        require(trK.size() == size() && trV.size() == size(), "observe: size mismatch");
        std::vector<double> m(size());
        for (std::size_t i = 0; i < size(); ++i) {
            m[i] = stability_ratio(trK[i], trV[i]);
            trackers_[i].update(m[i]);
        }
        return m;
    }

    [[nodiscard]] Decision decide(std::int64_t slot, const std::vector<double> &p_stars) const {
        require(p_stars.size() == size(), "decide: size mismatch");
        Decision d(size());
        for (std::size_t i = 0; i < size(); ++i) {
            d.gamma_beta[i] = aux_beta_opt(queues_.q_beta[i], params_);
            d.gamma_power[i] = aux_power_opt(queues_.q_power[i], params_, p_max_);
        }
        d.alpha = kind_ == SchedulerKind::round_robin
                      ? round_robin(slot, size())
                      : schedule(queues_, betas_, m_bars(), p_stars, slot, warmup_);
        for (std::size_t i = 0; i < size(); ++i) {
            d.power[i] = d.alpha[i] != 0 ? p_stars[i] : 0.0;
        }
        return d;
    }

    /// End-of-slot update of the virtual queues and the AoI.
    void commit(const Decision &d, const std::vector<int> &xi) {
        require(d.alpha.size() == size() && xi.size() == size(), "commit: size mismatch");
        for (std::size_t i = 0; i < size(); ++i) {
            queues_.q_beta[i] =
                queue_update_beta(queues_.q_beta[i], d.gamma_beta[i], static_cast<double>(betas_[i]));
            queues_.q_power[i] = queue_update_power(queues_.q_power[i], d.gamma_power[i],
                                                    static_cast<double>(d.alpha[i]) * d.power[i]);
            queues_.q_stab[i] = queue_update_stab(queues_.q_stab[i], trackers_[i].m_bar(),
                                                  static_cast<double>(d.alpha[i]));
            betas_[i] = aoi_update(betas_[i], xi[i] != 0);
        }
    }

    [[nodiscard]] std::size_t size() const { return betas_.size(); }
    [[nodiscard]] const VirtualQueues &queues() const { return queues_; }
    [[nodiscard]] const std::vector<std::int64_t> &betas() const { return betas_; }
    [[nodiscard]] std::vector<double> m_bars() const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < size(); ++i) { out[i] = trackers_[i].m_bar(); }
        return out;
    }
    [[nodiscard]] SchedulerKind kind() const { return kind_; }

private:
    SchedulerKind kind_;
    LyapunovParams params_;
    double p_max_;
    std::int64_t warmup_;
    VirtualQueues queues_;
    std::vector<std::int64_t> betas_;
    std::vector<StabilityTracker> trackers_;
};

}  // namespace aoi_copilot
