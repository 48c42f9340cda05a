#include <gtest/gtest.h>

#include <random>

#include "aoi_copilot/scheduler.hpp"

using namespace aoi_copilot;

TEST(Aoi, Recursion) {
    EXPECT_EQ(aoi_update(3, false), 4);
    EXPECT_EQ(aoi_update(7, true), 1);
    EXPECT_EQ(aoi_update(1, true), 1);
    EXPECT_THROW(aoi_update(0, false), ContractViolation);
}

TEST(Aoi, TrajectoryMatchesDirectBookkeeping) {
    Rng rng(31);
    std::bernoulli_distribution coin(0.2);
    std::int64_t beta = 1;
    std::int64_t last_delivery = -1;
    for (std::int64_t k = 0; k < 2000; ++k) {
        const std::int64_t expected = last_delivery >= 0 ? k - last_delivery : k + 1;
        ASSERT_EQ(beta, expected) << "slot " << k;
        const bool xi = coin(rng);
        beta = aoi_update(beta, xi);
        if (xi) { last_delivery = k; }
    }
}

TEST(StabilityRatio, Cases) {
    EXPECT_DOUBLE_EQ(stability_ratio(2.0, 1.0), 2.0);
    EXPECT_EQ(stability_ratio(1.0, 2.0), 0.0);
    EXPECT_EQ(stability_ratio(1.0, 1.0), 0.0);
    EXPECT_EQ(stability_ratio(1.0 + 1e-12, 1.0), kRatioCap);
    EXPECT_LE(stability_ratio(1.0 + 2e-9, 1.0), kRatioCap);
}

TEST(StabilityTracker, RunningMeanOfClippedValues) {
    StabilityTracker t;
    t.update(2.0);
    t.update(-5.0);
    t.update(4.0);
    EXPECT_DOUBLE_EQ(t.m_bar(), 2.0);
    EXPECT_EQ(t.count(), 3);
}

TEST(AuxBeta, ClosedForm) {
    const LyapunovParams p10{10.0, 1.0, 1.0};
    EXPECT_DOUBLE_EQ(aux_beta_opt(2.0, p10), 4.0);
    EXPECT_DOUBLE_EQ(10.0 / (1.0 + 4.0) - 2.0, 0.0);
    EXPECT_DOUBLE_EQ(aux_beta_opt(5.0, {1.0, 1.0, 1.0}), 1.0);
    EXPECT_EQ(aux_beta_opt(0.0, p10), kGammaMax);
}

TEST(AuxPower, ClosedForm) {
    const LyapunovParams p10{10.0, 1.0, 1.0};
    EXPECT_DOUBLE_EQ(aux_power_opt(5.0, p10, 10.0), 1.0);
    EXPECT_EQ(aux_power_opt(1e9, p10, 10.0), 0.0);
    EXPECT_EQ(aux_power_opt(1.0, {1000.0, 1.0, 1.0}, 10.0), 10.0);
    EXPECT_EQ(aux_power_opt(0.0, p10, 10.0), 10.0);
}

TEST(AuxVariables, ClampsAndStationarity) {
    Rng rng(32);
    std::uniform_real_distribution<double> q(0.0, 500.0), v(0.0, 1000.0), w(0.1, 5.0), pm(0.5, 50.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const LyapunovParams lp{v(rng), w(rng), w(rng)};
        const double qb = q(rng), qp = q(rng), p_max = pm(rng);
        const double gb = aux_beta_opt(qb, lp);
        const double gp = aux_power_opt(qp, lp, p_max);
        ASSERT_GE(gb, 1.0);
        ASSERT_GE(gp, 0.0);
        ASSERT_LE(gp, p_max);
        if (gb > 1.0) { EXPECT_NEAR(lp.v_weight * lp.omega_beta / (1.0 + gb) - qb, 0.0, 1e-9); }
        if (gp > 0.0 && gp < p_max) {
            EXPECT_NEAR(lp.v_weight * lp.omega_power / (1.0 + gp) - qp, 0.0, 1e-9);
        }
    }
}

TEST(PowerOpt, ChannelInversion) {
    EXPECT_DOUBLE_EQ(power_opt(2.0, 0.5, 4.0, 10.0), 1.0);
    EXPECT_EQ(power_opt(0.2, 1.0, 4.0, 10.0), 10.0);  // needs 20
    EXPECT_LT(snr(10.0, ChannelDraw{Vector::Constant(1, std::sqrt(0.2)), 1.0}), 4.0);
    EXPECT_NEAR(power_opt(3.0, 1.0, 1e-12, 10.0), 0.0, 1e-12);
    EXPECT_EQ(power_opt(0.0, 1.0, 4.0, 10.0), 10.0);
}

TEST(PowerOpt, ReachesThresholdExactlyWhenFeasible) {
    Rng rng(33);
    std::uniform_real_distribution<double> th(0.5, 20.0), n0(0.1, 3.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto ch = draw_channel(rng, 4, n0(rng));
        const double t = th(rng);
        const double p = power_opt(ch.gain_energy(), ch.n0, t, 1e9);
        ASSERT_TRUE(success(snr(p, ch), t));
        EXPECT_NEAR(p, t * ch.n0 / ch.gain_energy(), 1e-12 * p);
    }
}

TEST(Schedule, PicksHighestScoreAmongStable) {
    VirtualQueues q(2);
    q.q_beta = {5.0, 1.0};
    const auto a = schedule(q, {1, 1}, {2.0, 2.0}, {0.0, 0.0}, 500);
    EXPECT_EQ(a, (std::vector<int>{1, 0}));
}

TEST(Schedule, NobodyWithoutPositiveGainAfterWarmup) {
    VirtualQueues q(2);
    q.q_stab = {1.0, 2.0};
    EXPECT_EQ(schedule(q, {1, 1}, {2.0, 2.0}, {0.0, 0.0}, 500), (std::vector<int>{0, 0}));
}

TEST(Schedule, WarmupWaivesStabilityGate) {
    VirtualQueues q(1);
    q.q_beta = {3.0};
    EXPECT_EQ(schedule(q, {2}, {0.0}, {1.0}, 10), (std::vector<int>{1}));
    EXPECT_EQ(schedule(q, {2}, {0.0}, {1.0}, 200), (std::vector<int>{0}));
}

TEST(Schedule, SkipsUnstableCandidateForNextQualified) {
    VirtualQueues q(3);
    q.q_beta = {10.0, 5.0, 8.0};
    EXPECT_EQ(schedule(q, {1, 1, 1}, {0.5, 1.0, 3.0}, {0.0, 0.0, 0.0}, 500), (std::vector<int>{0, 0, 1}));
}

TEST(Schedule, TiesGoToLowerIndex) {
    VirtualQueues q(3);
    q.q_beta = {2.0, 2.0, 2.0};
    EXPECT_EQ(schedule(q, {1, 1, 1}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, 500), (std::vector<int>{1, 0, 0}));
}

TEST(Schedule, AtMostOneAndScaleInvariant) {
    Rng rng(34);
    std::uniform_real_distribution<double> u(0.0, 10.0), mb(0.0, 3.0), c(0.01, 100.0);
    std::uniform_int_distribution<int> b(1, 30), msz(1, 12);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t m = static_cast<std::size_t>(msz(rng));
        VirtualQueues q(m);
        std::vector<std::int64_t> betas(m);
        std::vector<double> mbars(m), ps(m);
        for (std::size_t i = 0; i < m; ++i) {
            q.q_beta[i] = u(rng);
            q.q_power[i] = u(rng);
            q.q_stab[i] = u(rng);
            betas[i] = b(rng);
            mbars[i] = mb(rng);
            ps[i] = u(rng) / 5.0;
        }
        const std::int64_t slot = trial % 2 == 0 ? 10 : 1000;
        const auto a = schedule(q, betas, mbars, ps, slot);
        int total = 0;
        for (int v : a) { total += v; }
        ASSERT_LE(total, 1);

        // Scaling every queue by s > 0 scales every score by s.
        const double s = c(rng);
        VirtualQueues qs(m);
        for (std::size_t i = 0; i < m; ++i) {
            qs.q_beta[i] = s * q.q_beta[i];
            qs.q_power[i] = s * q.q_power[i];
            qs.q_stab[i] = s * q.q_stab[i];
        }
        EXPECT_EQ(schedule(qs, betas, mbars, ps, slot), a);
    }
}

TEST(Queues, Updates) {
    EXPECT_EQ(queue_update_beta(5, 2, 3), 6);
    EXPECT_EQ(queue_update_beta(1, 5, 2), 2);
    EXPECT_EQ(queue_update_beta(0, 0, 1), 1);
    EXPECT_EQ(queue_update_power(5, 1, 0.5), 4.5);
    EXPECT_EQ(queue_update_power(3, 1, 0.0), 2.0);
    EXPECT_EQ(queue_update_power(0, 10, 0), 0);
    EXPECT_EQ(queue_update_stab(2, 0.5, 1), 2.5);
    EXPECT_EQ(queue_update_stab(2, 5, 0), 0);
    EXPECT_EQ(queue_update_stab(0, 0, 1), 1);
    EXPECT_EQ(queue_update_stab(2, -3, 0), 2);
}

TEST(Queues, StayNonNegative) {
    Rng rng(35);
    std::uniform_real_distribution<double> u(0.0, 10.0), m(-5.0, 5.0);
    double qb = 0, qp = 0, qs = 0;
    for (int k = 0; k < 10000; ++k) {
        qb = queue_update_beta(qb, u(rng) * 3, static_cast<double>(1 + k % 7));
        qp = queue_update_power(qp, u(rng), (k % 3 == 0) ? u(rng) : 0.0);
        qs = queue_update_stab(qs, m(rng), k % 2);
        ASSERT_GE(qb, 0.0);
        ASSERT_GE(qp, 0.0);
        ASSERT_GE(qs, 0.0);
    }
}

TEST(Objective, ZeroWeightsAndQueues) {
    const LyapunovParams lp{0.0, 1.0, 1.0};
    VirtualQueues q(2);
    Decision d(2);
    d.alpha = {1, 0};
    d.power = {2.0, 0.0};
    d.gamma_beta = {3.0, 1.0};
    d.gamma_power = {1.0, 4.0};
    EXPECT_EQ(per_slot_objective(lp, q, d, {1, 5}, {1.0, 2.0}), 0.0);
}

TEST(Objective, HandComputedSingleSystem) {
    const LyapunovParams lp{10.0, 2.0, 0.5};
    VirtualQueues q(1);
    q.q_beta = {3.0};
    q.q_power = {4.0};
    q.q_stab = {1.5};
    Decision d(1);
    d.alpha = {1};
    d.power = {0.8};
    d.gamma_beta = {2.0};
    d.gamma_power = {0.25};
    // 20 ln3 - 6 + 5 ln1.25 - 1 + 3*1 + 4*0.8 - 1.5*(2.5 - 1)
    const double expected = 20.0 * std::log(3.0) - 6.0 + 5.0 * std::log(1.25) - 1.0 + 3.0 + 3.2 - 2.25;
    EXPECT_NEAR(per_slot_objective(lp, q, d, {1}, {2.5}), expected, 1e-12);
}

TEST(Objective, StationaryAtInteriorClosedForms) {
    const LyapunovParams lp{100.0, 1.0, 1.0};
    VirtualQueues q(1);
    q.q_beta = {20.0};
    q.q_power = {30.0};
    q.q_stab = {0.5};
    Decision d(1);
    d.gamma_beta = {aux_beta_opt(20.0, lp)};
    d.gamma_power = {aux_power_opt(30.0, lp, 10.0)};
    ASSERT_GT(d.gamma_beta[0], 1.0);
    ASSERT_GT(d.gamma_power[0], 0.0);
    ASSERT_LT(d.gamma_power[0], 10.0);
    const double base = per_slot_objective(lp, q, d, {3}, {1.2});
    for (double delta : {-0.01, 0.01}) {
        Decision pb = d;
        pb.gamma_beta[0] += delta;
        Decision pp = d;
        pp.gamma_power[0] += delta;
        EXPECT_LE(std::abs(per_slot_objective(lp, q, pb, {3}, {1.2}) - base), 1e-3 * std::abs(base));
        EXPECT_LE(std::abs(per_slot_objective(lp, q, pp, {3}, {1.2}) - base), 1e-3 * std::abs(base));
    }
}

TEST(RoundRobin, Rotation) {
    EXPECT_EQ(round_robin(0, 3), (std::vector<int>{1, 0, 0}));
    EXPECT_EQ(round_robin(4, 3), (std::vector<int>{0, 1, 0}));
    const auto a = round_robin(29, 30);
    EXPECT_EQ(a[29], 1);
    EXPECT_EQ(std::accumulate(a.begin(), a.end(), 0), 1);
}

TEST(LyapunovScheduler, CommitAppliesRecursions) {
    LyapunovScheduler s(2, SchedulerKind::round_robin, {100.0, 1.0, 1.0}, 10.0);
    s.observe({2.0, 0.5}, {1.0, 1.0});
    const Decision d = s.decide(0, {0.7, 0.9});
    EXPECT_EQ(d.alpha, (std::vector<int>{1, 0}));
    EXPECT_EQ(d.power, (std::vector<double>{0.7, 0.0}));
    s.commit(d, {1, 0});
    EXPECT_EQ(s.betas(), (std::vector<std::int64_t>{1, 2}));
    EXPECT_EQ(s.queues().q_beta, (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(s.queues().q_power, (std::vector<double>{0.7, 0.0}));
    EXPECT_EQ(s.queues().q_stab, (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(s.m_bars(), (std::vector<double>{2.0, 0.0}));
}
