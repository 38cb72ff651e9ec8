#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "twoloc/asymptotics.hpp"
#include "twoloc/cli.hpp"
#include "twoloc/coalescent.hpp"
#include "twoloc/oracle.hpp"

using namespace twoloc;

namespace {

double total(const RateTable& r) {
    double s = 0.0;
    for (int k = 1; k <= 7; ++k) s += r[k];
    return s;
}

/// P(the ARG counting chain from (a,b,c,c) takes a type I step before absorbing, or
/// before first reaching c = 0 when stop_at_c0 is set), by first-step analysis.
double prob_type_I(int a0, int b0, int c0, double rho, bool stop_at_c0 = false) {
    const int nA = a0 + c0, nB = b0 + c0;
    std::map<std::array<int, 3>, int> index;
    std::vector<std::array<int, 3>> states;
    for (int c = 0; c <= std::min(nA, nB); ++c)
        for (int a = 0; a + c <= nA; ++a)
            for (int b = 0; b + c <= nB; ++b) {
                index[{a, b, c}] = static_cast<int>(states.size());
                states.push_back({a, b, c});
            }
    const int n = static_cast<int>(states.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n; ++k) {
        const AncState s{states[k][0], states[k][1], states[k][2], states[k][2]};
        if (s.absorbed() || (stop_at_c0 && s.c == 0)) continue;
        const RateTable r = rates_C(s, rho);
        const double R = total(r);
        rhs[k] = r[kTypeI] / R;
        for (int type = kTypeIV; type <= kTypeVII; ++type) {
            if (r[type] == 0.0) continue;
            const AncState t = apply_type(s, type);
            M(k, index.at({t.a, t.b, t.c})) -= r[type] / R;
        }
    }
    const Eigen::VectorXd h = M.partialPivLu().solve(rhs);
    return h[index.at({a0, b0, c0})];
}

}  // namespace

TEST(Rates, WorkedStates) {
    const RateTable r = rates_C({1, 1, 0, 0}, 50.0);
    EXPECT_DOUBLE_EQ(total(r), 1.0);
    EXPECT_DOUBLE_EQ(r[kTypeVI], 1.0);
    EXPECT_EQ(apply_type({1, 1, 0, 0}, kTypeVI), (AncState{0, 0, 1, 1}));

    const RateTable s = rates_C({0, 0, 2, 2}, 30.0);
    EXPECT_DOUBLE_EQ(s[kTypeI], 1.0);
    EXPECT_DOUBLE_EQ(s[kTypeVII], 30.0);
    EXPECT_DOUBLE_EQ(total(s), 31.0);

    const RateTable d = rates_D({0, 0, 3, 2}, 10.0);
    EXPECT_DOUBLE_EQ(d[kTypeI], 0.0);
    EXPECT_DOUBLE_EQ(d[kTypeII], 3.0);
    EXPECT_DOUBLE_EQ(d[kTypeIII], 1.0);
    EXPECT_DOUBLE_EQ(d[kTypeVII], 15.0);
    EXPECT_EQ(apply_type({0, 0, 3, 2}, kTypeVII), (AncState{1, 1, 2, 1}));
    EXPECT_EQ(apply_type({0, 0, 1, 0}, kTypeVII), (AncState{1, 0, 0, 0}));
}

TEST(Rates, FirstEventFrequencies) {
    const AncState init{2, 1, 2, 2};
    const double rho = 3.0;
    const RateTable r = rates_C(init, rho);
    const double R = total(r);
    const long reps = 200000;
    std::array<long, 8> hits{};
    Rng rng = make_stream(11, 0);
    for (long k = 0; k < reps; ++k) ++hits[static_cast<std::size_t>(sim_C_rho(init, rho, rng).front().type)];
    for (int type = 1; type <= 7; ++type) {
        const double p = r[type] / R;
        const double se = std::sqrt(p * (1 - p) / reps) + 1e-12;
        EXPECT_NEAR(static_cast<double>(hits[type]) / reps, p, 4 * se) << type_name(type);
    }
}

TEST(Rates, FirstEventFromFullPair) {
    const double rho = 4.0;
    const long reps = 100000;
    long first_I = 0;
    Rng rng = make_stream(12, 0);
    for (long k = 0; k < reps; ++k) first_I += sim_C_rho({0, 0, 2, 2}, rho, rng).front().type == kTypeI;
    const double p = 1.0 / (1.0 + rho);
    EXPECT_NEAR(static_cast<double>(first_I) / reps, p, 4 * std::sqrt(p * (1 - p) / reps));
}

TEST(Counting, PathsAbsorbAndStayConsistent) {
    Rng rng = make_stream(13, 0);
    for (int k = 0; k < 2000; ++k) {
        const EventLog c = sim_C_rho({1, 2, 3, 3}, 5.0, rng);
        ASSERT_FALSE(c.empty());
        EXPECT_TRUE(c.back().state.absorbed());
        AncState s{1, 2, 3, 3};
        double t = 0.0;
        for (const Event& e : c) {
            EXPECT_GE(e.time, t);
            t = e.time;
            EXPECT_EQ(e.state, apply_type(s, e.type));
            s = e.state;
            EXPECT_EQ(s.c, s.d);
        }
        const EventLog d = sim_D_inf({0, 0, 3, 3}, 5.0, rng);
        EXPECT_TRUE(d.back().state.absorbed());
        for (const Event& e : d) EXPECT_NE(e.type, kTypeI);
    }
    EXPECT_THROW(sim_C_rho({0, 0, 2, 1}, 5.0, rng), Error);
}

TEST(Counting, EventLogLine) {
    Event e;
    e.time = 0.5;
    e.type = kTypeVII;
    e.process = 'B';
    e.state = {1, 1, 1, 1};
    std::ostringstream os;
    write_event_jsonl(os, e, 3);
    EXPECT_EQ(os.str(), "{\"rep\":3,\"time\":0.5,\"type\":\"VII\",\"sub\":0,\"process\":\"B\",\"state\":[1,1,1,1]}\n");
}

TEST(Coupling, FailureOfKindOneMatchesFirstStepAnalysis) {
    for (auto [c, rho] : {std::pair{2, 20.0}, std::pair{3, 30.0}}) {
        const CouplingStats s = estimate_coupling({0, 0, c, c}, rho, 200000, 21);
        const double exact = prob_type_I(0, 0, c, rho);
        EXPECT_NEAR(s.prob(1), exact, 4 * s.se(1)) << c << " " << rho;
        const double early = prob_type_I(0, 0, c, rho, true);
        EXPECT_NEAR(s.prob_before_U(1), early, 4 * s.se_before_U(1)) << c << " " << rho;
        EXPECT_LT(early, exact);
        EXPECT_LE(s.double_prob(), s.prob(1));
    }
}

TEST(Coupling, MarginalsOfTheCoupledPairAreTheProcesses) {
    // While coupled the log carries shared events; after a failure each process
    // keeps its own law, so C's absorption time matches sim_C_rho in mean.
    const AncState init{0, 0, 2, 2};
    const double rho = 2.0;
    const long reps = 100000;
    Rng r1 = make_stream(22, 0), r2 = make_stream(23, 0);
    double m1 = 0, m2 = 0, v1 = 0;
    for (long k = 0; k < reps; ++k) {
        const double t1 = sim_coupled(init, rho, r1).absorb_C;
        const double t2 = sim_C_rho(init, rho, r2).back().time;
        m1 += t1;
        v1 += t1 * t1;
        m2 += t2;
    }
    m1 /= reps;
    m2 /= reps;
    const double sd = std::sqrt(v1 / reps - m1 * m1);
    EXPECT_NEAR(m1, m2, 4 * sd * std::sqrt(2.0 / reps));
}

TEST(Coupling, ThreadCountDoesNotChangeCounts) {
    const CouplingStats a = estimate_coupling({0, 0, 2, 2}, 10.0, 20000, 5, 1);
    const CouplingStats b = estimate_coupling({0, 0, 2, 2}, 10.0, 20000, 5, 3);
    EXPECT_EQ(a.failed, b.failed);
    EXPECT_EQ(a.double_failure, b.double_failure);
}

TEST(Loose, ChainsForFourFullFragments) {
    const auto chains = loose_chains(0, 0, 4);
    ASSERT_EQ(chains.size(), 3u);
    const std::vector<AncState> drawn{{0, 0, 4, 4}, {1, 1, 3, 3}, {1, 1, 2, 2}, {2, 2, 1, 1}, {3, 3, 0, 0}};
    EXPECT_EQ(chains[1], drawn);
    for (const auto& ch : chains) {
        EXPECT_EQ(ch.size(), 5u);
        EXPECT_EQ(ch.back(), (AncState{3, 3, 0, 0}));
    }
    EXPECT_TRUE(loose_chains(0, 0, 1).empty());
}

TEST(Loose, ChainsAreGenerated) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 60.0);
    Rng rng = make_stream(31, 0);
    const auto chains = loose_chains(0, 0, 4);
    std::vector<long> seen(chains.size());
    long branch1 = 0;
    const long reps = 100000;
    for (long k = 0; k < reps; ++k) {
        const Genealogy g = sim_loose(0, 0, 4, p.rho, rng);
        if (g.branch != 1) continue;
        ++branch1;
        for (std::size_t i = 0; i < chains.size(); ++i) seen[i] += g.chain == chains[i];
    }
    const double alpha = 6.0 / 60.0;
    EXPECT_NEAR(static_cast<double>(branch1) / reps, alpha, 4 * std::sqrt(alpha * (1 - alpha) / reps));
    long total_seen = 0;
    for (long s : seen) {
        EXPECT_GT(s, 0);
        total_seen += s;
    }
    EXPECT_EQ(total_seen, branch1);
}

TEST(Loose, AlphaOverflow) {
    Rng rng = make_stream(32, 0);
    try {
        sim_loose(0, 0, 4, 6.0, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AlphaOverflow);
    }
    EXPECT_NO_THROW(sim_loose(0, 0, 1, 0.1, rng));
}

TEST(Genealogy, TreesAreBinaryAndTimeOrdered) {
    Rng rng = make_stream(41, 0);
    for (GenealogyModel m : {GenealogyModel::Arg, GenealogyModel::Loose, GenealogyModel::Independent}) {
        for (int k = 0; k < 500; ++k) {
            const Genealogy g = simulate_genealogy(m, 1, 2, 3, 20.0, rng);
            for (const Tree* t : {&g.A, &g.B}) {
                EXPECT_EQ(t->size(), 2 * t->leaves - 1);
                std::vector<int> children(static_cast<std::size_t>(t->size()));
                for (int v = 0; v < t->root(); ++v) {
                    const int u = t->parent[static_cast<std::size_t>(v)];
                    ASSERT_GT(u, v);
                    ++children[static_cast<std::size_t>(u)];
                    EXPECT_GE(t->time[static_cast<std::size_t>(u)], t->time[static_cast<std::size_t>(v)]);
                }
                for (int v = t->leaves; v < t->size(); ++v) EXPECT_EQ(children[static_cast<std::size_t>(v)], 2);
            }
            EXPECT_EQ(g.A.leaves, 4);
            EXPECT_EQ(g.B.leaves, 5);
        }
    }
}

TEST(Mutation, NoMutationGivesMonomorphicSamples) {
    const ModelParams p = ModelParams::symmetric(3, 2, 0.0, 5.0);
    Rng rng = make_stream(51, 0);
    for (int k = 0; k < 1000; ++k) {
        const SampleConfig cfg = drop_mutations(sim_arg(2, 1, 3, 5.0, rng), p, rng);
        EXPECT_EQ((cfg.marginalA().array() > 0).count(), 1);
        EXPECT_EQ((cfg.marginalB().array() > 0).count(), 1);
    }
}

TEST(Mutation, SingleLeafFollowsTheWeights) {
    Eigen::Vector3d w(0.2, 0.5, 0.3);
    const ModelParams p = ModelParams::pim_model(w, Eigen::Vector2d(0.9, 0.1), 2.0, 2.0, 1.0);
    Rng rng = make_stream(52, 0);
    const long reps = 100000;
    Eigen::Vector3d freq = Eigen::Vector3d::Zero();
    for (long k = 0; k < reps; ++k) {
        const SampleConfig cfg = drop_mutations(sim_arg(1, 0, 0, 1.0, rng), p, rng);
        for (int i = 0; i < 3; ++i) freq[i] += cfg.a[i];
    }
    freq /= reps;
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(freq[i], w[i], 4 * std::sqrt(w[i] * (1 - w[i]) / reps));
}

TEST(Mutation, GeneralTransitionMatrixSingleLeafIsStationary) {
    ModelParams p = ModelParams::symmetric(2, 2, 1.5, 1.0);
    p.PA << 0.1, 0.9, 0.6, 0.4;
    p.pim = false;
    const Eigen::VectorXd pi = stationary_distribution(p.PA);
    Rng rng = make_stream(53, 0);
    const long reps = 100000;
    long first = 0;
    for (long k = 0; k < reps; ++k) first += drop_mutations(sim_arg(1, 0, 0, 1.0, rng), p, rng).a[0];
    EXPECT_NEAR(static_cast<double>(first) / reps, pi[0], 4 * std::sqrt(pi[0] * (1 - pi[0]) / reps));
}

TEST(Estimate, IndependentModelGivesTheZerothOrderTerm) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 10.0);
    const SampleConfig cfg(Counts::Zero(2), Counts::Zero(2), (CountMatrix(2, 2) << 1, 1, 0, 1).finished());
    const McEstimate e = estimate_q_mc(cfg, p, GenealogyModel::Independent, 200000, 61);
    EXPECT_NEAR(e.estimate, q0(cfg, p), 4 * e.se);
}

TEST(Estimate, ArgMatchesTheExactOracle) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 5.0);
    for (const auto& cfg : enumerate_configs(3, 2, 2)) {
        if (cfg.c_total() < 2) continue;
        const McEstimate e = estimate_q_mc(cfg, p, GenealogyModel::Arg, 40000, 62);
        EXPECT_NEAR(e.estimate, q_exact(cfg, p), 4 * e.se + 1e-12) << cfg.label();
    }
}

TEST(Estimate, TallyDoesNotDependOnThreads) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 30.0);
    const PatternTally a = tally_pattern(0, 1, 3, p, GenealogyModel::Loose, 10000, 7, 1);
    const PatternTally b = tally_pattern(0, 1, 3, p, GenealogyModel::Loose, 10000, 7, 4);
    EXPECT_EQ(a.counts, b.counts);
    long sum = 0;
    for (const auto& [key, n] : a.counts) sum += n;
    EXPECT_EQ(sum, a.reps);
}
