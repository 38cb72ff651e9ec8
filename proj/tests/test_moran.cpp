#include <gtest/gtest.h>

#include "twoloc/moran.hpp"

using namespace twoloc;

namespace {

MoranParams params(int N, double rho_beta, double theta = 0.0) {
    MoranParams p;
    p.N = N;
    p.beta = 0.5;
    p.rho_beta = rho_beta;
    p.thetaA = p.thetaB = theta;
    return p;
}

CountMatrix counts(int a, int b, int c, int d) {
    CountMatrix Z(2, 2);
    Z << a, b, c, d;
    return Z;
}

}  // namespace

TEST(Moran, MonomorphicIsAbsorbing) {
    const MoranParams p = params(2, 3.0);
    MoranState s{counts(2, 0, 0, 0), 2, 0.0};
    Rng rng = make_stream(1, 0);
    for (int k = 0; k < 1000; ++k) {
        step(s, p, rng);
        EXPECT_EQ(s.Z, counts(2, 0, 0, 0));
    }
    EXPECT_GT(s.clock, 0.0);
}

TEST(Moran, EventClassFrequencies) {
    const MoranParams p = params(50, 2.0, 1.5);
    Rng rng = make_stream(2, 0);
    const long n = 1000000;
    long rec = 0, mutA = 0;
    for (long k = 0; k < n; ++k) {
        const MoranEvent e = draw_event(p, rng);
        rec += e == MoranEvent::Recombination;
        mutA += e == MoranEvent::MutationA;
    }
    const double total = p.N + p.thetaA + p.thetaB + p.rho();
    for (auto [hits, w] : {std::pair<long, double>{rec, p.rho()}, {mutA, p.thetaA}}) {
        const double expect = w / total;
        EXPECT_NEAR(static_cast<double>(hits) / n, expect, 3 * std::sqrt(expect * (1 - expect) / n));
    }
    EXPECT_DOUBLE_EQ(p.total_rate(), 0.5 * p.N * total);
}

TEST(Moran, ConservationJumpBoundAndProjection) {
    const MoranParams p = params(40, 4.0, 2.0);
    MoranState s{counts(10, 10, 5, 15), 40, 0.0};
    Rng rng = make_stream(3, 0);
    MProjection prev = MProjection::of(s, 0.0);
    for (int k = 0; k < 100000; ++k) {
        step(s, p, rng);
        ASSERT_EQ(s.Z.sum(), 40);
        ASSERT_GE(s.Z.minCoeff(), 0);
        const MProjection m = MProjection::of(s, 0.0);
        EXPECT_LE((m.X - prev.X).cwiseAbs().maxCoeff(), 2.0 / 40 + 1e-15);
        EXPECT_LE((m.Y - prev.Y).cwiseAbs().maxCoeff(), 2.0 / 40 + 1e-15);
        EXPECT_LE((m.D - prev.D).cwiseAbs().maxCoeff(), 2.0 / 40 + 1e-15);
        EXPECT_LT(m.D.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT(m.D.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        prev = m;
    }
}

TEST(Moran, RunGridAndReproducibility) {
    const MoranParams p = params(100, 2.0);
    Rng a = make_stream(4, 0), b = make_stream(4, 0);
    const Trajectory ta = run(p, counts(50, 0, 0, 50), 1.0, 0.1, a);
    const Trajectory tb = run(p, counts(50, 0, 0, 50), 1.0, 0.1, b);
    ASSERT_EQ(ta.size(), 11u);
    for (std::size_t k = 0; k < ta.size(); ++k) {
        EXPECT_NEAR(ta[k].t, 0.1 * static_cast<double>(k), 1e-12);
        EXPECT_EQ(ta[k].D, tb[k].D);
        if (k) EXPECT_GT(ta[k].t, ta[k - 1].t);
    }
    EXPECT_THROW(run(p, counts(50, 0, 0, 49), 1.0, 0.1, a), Error);
}

TEST(Moran, DriftOfLinkageDisequilibrium) {
    // With theta = 0 the one-step drift of D is exactly -(1 + rho/2 + rho/(2N)) D per unit Moran time.
    const MoranParams p = params(100, 2.0);
    const CountMatrix Z = counts(40, 10, 10, 40);
    const double D0 = 0.4 - 0.25;
    const double dtau = 0.001;
    const double dt = dtau * p.time_scale();
    const long restarts = 100000;
    double s = 0, ss = 0;
    for (long r = 0; r < restarts; ++r) {
        Rng rng = make_stream(5, static_cast<std::uint64_t>(r));
        const Trajectory t = run(p, Z, dt, dt, rng);
        const double d = t.back().D(0, 0) - D0;
        s += d;
        ss += d * d;
    }
    const double mean = s / restarts, se = std::sqrt((ss / restarts - mean * mean) / restarts);
    const double expect = -(1.0 + p.rho() / 2.0 + p.rho() / (2.0 * p.N)) * D0 * dtau;
    EXPECT_NEAR(mean, expect, 3 * se);
}

TEST(Moran, EnsembleChecksNeedEnoughTrajectories) {
    const MoranParams p = params(100, 2.0);
    const auto ens = run_ensemble(p, counts(50, 0, 0, 50), 0.5, 0.1, 10, 6);
    try {
        check_lln(ens, p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientEnsemble);
    }
    EXPECT_THROW(check_fluctuations(ens, p), Error);
}

TEST(Moran, EnsembleIndependentOfThreads) {
    const MoranParams p = params(100, 2.0);
    const auto one = run_ensemble(p, counts(50, 0, 0, 50), 0.5, 0.1, 8, 7, 1);
    const auto four = run_ensemble(p, counts(50, 0, 0, 50), 0.5, 0.1, 8, 7, 4);
    for (std::size_t k = 0; k < one.size(); ++k) EXPECT_EQ(one[k].back().D, four[k].back().D);
}

TEST(Moran, NoInitialDisequilibriumStaysCentred) {
    const MoranParams p = params(400, 2.0);
    const auto ens = run_ensemble(p, counts(100, 100, 100, 100), 1.0, 0.25, 200, 8);
    const FluctuationReport f = check_fluctuations(ens, p);
    for (Eigen::Index k = 0; k < f.mean.size(); ++k) EXPECT_NEAR(f.mean[k], 0.0, 3 * f.mean_se[k]);
    EXPECT_LT(check_lln(ens, p).max_abs_deviation, 0.02);
}

TEST(Moran, DecayRateAndCovarianceSigns) {
    const MoranParams p = params(2500, 2.0);
    const auto lln_ens = run_ensemble(p, counts(1250, 0, 0, 1250), 1.5, 0.1, 200, 9);
    const LlnReport l = check_lln(lln_ens, p);
    EXPECT_NEAR(l.fitted_rate, l.expected_rate, 0.1 * l.expected_rate);

    const auto fl_ens = run_ensemble(p, counts(625, 625, 625, 625), 2.0, 0.5, 400, 10);
    const FluctuationReport f = check_fluctuations(fl_ens, p);
    EXPECT_GT(f.covariance(0, 0), 0.0);
    EXPECT_LT(f.covariance(0, 1), 0.0);
    EXPECT_LT(f.target(0, 1), 0.0);
    EXPECT_NEAR(f.target_u11, 0.03125, 1e-15);
}
