#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "twoloc/cli.hpp"
#include "twoloc/gaussian.hpp"

using namespace twoloc;

namespace {

long double_factorial(int k) {
    long out = 1;
    for (int j = k; j > 1; j -= 2) out *= j;
    return out;
}

/// Brute force: every permutation of [2 lambda] read as consecutive pairs.
std::set<std::vector<std::pair<int, int>>> brute_partitions(int lambda) {
    std::vector<int> perm(static_cast<std::size_t>(2 * lambda));
    std::iota(perm.begin(), perm.end(), 1);
    std::set<std::vector<std::pair<int, int>>> out;
    do {
        std::vector<std::pair<int, int>> pairs;
        for (int k = 0; k < lambda; ++k) {
            const int x = perm[static_cast<std::size_t>(2 * k)], y = perm[static_cast<std::size_t>(2 * k + 1)];
            pairs.emplace_back(std::min(x, y), std::max(x, y));
        }
        std::sort(pairs.begin(), pairs.end());
        out.insert(pairs);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

double z_bonferroni(std::size_t tests) {
    // two-sided family-wise level 0.0027 split across tests; Newton on the normal tail
    const double alpha = 0.0027 / static_cast<double>(std::max<std::size_t>(tests, 1));
    double z = 3.0;
    for (int it = 0; it < 50; ++it) {
        const double tail = std::erfc(z / std::sqrt(2.0)) - alpha;
        const double dens = 2.0 * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        z += tail / dens;
    }
    return z;
}

}  // namespace

TEST(PairPartitions, EmptyAndWorkedExample) {
    const auto p0 = enumerate_pair_partitions(0);
    ASSERT_EQ(p0.size(), 1u);
    EXPECT_TRUE(p0[0].mu.empty());

    const auto p2 = enumerate_pair_partitions(2);
    ASSERT_EQ(p2.size(), 3u);
    EXPECT_EQ(p2[0].mu, (std::vector<int>{1, 3}));
    EXPECT_EQ(p2[0].nu, (std::vector<int>{2, 4}));
    EXPECT_EQ(p2[1].mu, (std::vector<int>{1, 2}));
    EXPECT_EQ(p2[1].nu, (std::vector<int>{3, 4}));
    EXPECT_EQ(p2[2].mu, (std::vector<int>{1, 2}));
    EXPECT_EQ(p2[2].nu, (std::vector<int>{4, 3}));
}

TEST(PairPartitions, CountsAndBruteForce) {
    for (int lambda = 0; lambda <= 6; ++lambda)
        EXPECT_EQ(static_cast<long>(enumerate_pair_partitions(lambda).size()), double_factorial(2 * lambda - 1));
    for (int lambda = 1; lambda <= 4; ++lambda) {
        std::set<std::vector<std::pair<int, int>>> got;
        for (const auto& pp : enumerate_pair_partitions(lambda)) {
            std::vector<int> seen;
            std::vector<std::pair<int, int>> pairs;
            for (int k = 0; k < lambda; ++k) {
                const int m = pp.mu[static_cast<std::size_t>(k)], n = pp.nu[static_cast<std::size_t>(k)];
                EXPECT_LT(m, n);
                if (k) EXPECT_LT(pp.mu[static_cast<std::size_t>(k - 1)], m);
                pairs.emplace_back(m, n);
                seen.push_back(m);
                seen.push_back(n);
            }
            std::sort(seen.begin(), seen.end());
            std::vector<int> all(static_cast<std::size_t>(2 * lambda));
            std::iota(all.begin(), all.end(), 1);
            EXPECT_EQ(seen, all);
            std::sort(pairs.begin(), pairs.end());
            got.insert(pairs);
        }
        EXPECT_EQ(got, brute_partitions(lambda));
    }
}

TEST(PairPartitions, SizeLimit) {
    try {
        enumerate_pair_partitions(9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SizeLimit);
    }
}

TEST(EnumerateR, Examples) {
    CountMatrix c(2, 2);
    c << 1, 2, 0, 1;
    const auto r0 = enumerate_r(c, 0);
    ASSERT_EQ(r0.size(), 1u);
    EXPECT_EQ(r0[0], CountMatrix::Zero(2, 2));
    const auto r2 = enumerate_r(c, 2);
    EXPECT_NE(std::find(r2.begin(), r2.end(), c), r2.end());
    for (const auto& r : r2) {
        EXPECT_EQ(r.sum(), 4);
        EXPECT_TRUE((r.array() <= c.array()).all());
    }
    CountMatrix c2 = CountMatrix::Zero(2, 2);
    c2(0, 0) = 2;
    const auto r1 = enumerate_r(c2, 1);
    ASSERT_EQ(r1.size(), 1u);
    EXPECT_EQ(r1[0], c2);
}

TEST(HaplotypeList, RowMajorWithRepeatsAdjacent) {
    CountMatrix r(2, 2);
    r << 1, 2, 0, 1;
    const HaplotypeList h = HaplotypeList::from(r);
    const std::vector<std::pair<int, int>> expect{{0, 0}, {0, 1}, {0, 1}, {1, 1}};
    EXPECT_EQ(h.h, expect);
    EXPECT_EQ(h.alleles_A(), (std::vector<int>{0, 0, 0, 1}));
    EXPECT_EQ(h.alleles_B(), (std::vector<int>{0, 1, 1, 1}));
}

TEST(GaussSeries, TrivialForAtMostOneFull) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 10.0);
    for (const auto& cfg : enumerate_configs(3, 2, 2))
        if (cfg.c_total() <= 1) EXPECT_DOUBLE_EQ(q_gauss(cfg, p), q0(cfg, p));
}

TEST(GaussSeries, FirstOrderMatchesAsymptotics) {
    const ModelParams p = ModelParams::pim_model(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.55, 0.45), 0.7, 1.3, 1);
    for (int n = 1; n <= 6; ++n)
        for (const auto& cfg : enumerate_configs(n, 2, 2)) {
            const SeriesTable g = gauss_series(cfg, p, 1);
            EXPECT_NEAR(g.coeffs[0], q0(cfg, p), 1e-15);
            if (g.order() >= 1) EXPECT_NEAR(g.coeffs[1], q1(cfg, p), 1e-14) << cfg.label();
        }
}

TEST(GaussSeries, GroupedEqualsDirect) {
    const ModelParams p = ModelParams::pim_model(Eigen::Vector2d(0.3, 0.7), Eigen::Vector3d(0.2, 0.5, 0.3), 0.9, 1.6, 1);
    for (int n = 2; n <= 6; ++n)
        for (const auto& cfg : enumerate_configs(n, 2, 3)) {
            if (cfg.c_total() < 2 || cfg.c_total() < n - 1) continue;
            const SeriesTable g = gauss_series(cfg, p, kAllLambda, GaussMethod::Grouped);
            const SeriesTable d = gauss_series(cfg, p, kAllLambda, GaussMethod::Direct);
            ASSERT_EQ(g.order(), d.order());
            for (int k = 0; k <= g.order(); ++k)
                EXPECT_NEAR(g.coeffs[k], d.coeffs[k], 1e-13 * std::max(1.0, std::abs(d.coeffs[k]))) << cfg.label();
        }
}

TEST(GaussSeries, DirectEightFull) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 1);
    SampleConfig cfg = SampleConfig::zeros(2, 2);
    cfg.c << 3, 1, 2, 2;
    const SeriesTable g = gauss_series(cfg, p, kAllLambda, GaussMethod::Grouped);
    const SeriesTable d = gauss_series(cfg, p, kAllLambda, GaussMethod::Direct);
    ASSERT_EQ(g.order(), 4);
    for (int k = 0; k <= 4; ++k) EXPECT_NEAR(g.coeffs[k], d.coeffs[k], 1e-12 * std::abs(d.coeffs[k]));
}

TEST(Sampler, ZeroSumsAndHaplotypes) {
    const ModelParams p = ModelParams::pim_model(Eigen::Vector3d(0.2, 0.3, 0.5), Eigen::Vector2d(0.4, 0.6), 2, 1, 20);
    Rng rng = make_stream(11, 0);
    for (int k = 0; k < 2000; ++k) {
        const GaussianDraw d = sample_stationary(p, SampleMode::Raw, rng);
        EXPECT_LT(d.D.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(d.D.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(d.H.sum(), 1.0, 1e-10);
        EXPECT_TRUE(d.H.isApprox(d.D + d.X * d.Y.transpose()));
    }
}

TEST(Sampler, RejectModeAndCap) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 5.0);
    Rng rng = make_stream(12, 0);
    long rejected = 0;
    for (int k = 0; k < 500; ++k) {
        const GaussianDraw d = sample_stationary(p, SampleMode::Reject, rng);
        EXPECT_GE(d.H.minCoeff(), 0.0);
        EXPECT_LE(d.H.maxCoeff(), 1.0);
        rejected += d.rejections;
    }
    EXPECT_GT(rejected, 0);
    const ModelParams tiny = ModelParams::symmetric(2, 2, 1.0, 1e-6);
    try {
        sample_stationary(tiny, SampleMode::Reject, rng, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RejectionCap);
    }
}

TEST(Sampler, ConditionalCovariance) {
    const Eigen::Vector2d X(0.3, 0.7), Y(0.6, 0.4);
    const double rho = 100.0;
    const long n = 200000;
    Rng rng = make_stream(13, 0);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 4), sumsq = Eigen::MatrixXd::Zero(4, 4);
    for (long r = 0; r < n; ++r) {
        const Eigen::MatrixXd D = sample_conditional_ld(X, Y, rho, rng);
        const Eigen::Vector4d d(D(0, 0), D(0, 1), D(1, 0), D(1, 1));
        const Eigen::Matrix4d outer = d * d.transpose();
        sum += outer;
        sumsq += outer.cwiseProduct(outer);
    }
    for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 4; ++v) {
            const double mean = sum(u, v) / n;
            const double se = std::sqrt((sumsq(u, v) / n - mean * mean) / n);
            const double target = s_infinity(X, Y, u / 2, u % 2, v / 2, v % 2) / rho;
            EXPECT_NEAR(mean, target, 3 * se) << u << "," << v;
        }
    EXPECT_LT(s_infinity(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5), 0, 0, 0, 1), 0.0);
    EXPECT_DOUBLE_EQ(s_infinity(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5), 0, 0, 0, 0), 0.0625);
}

TEST(Sampler, MarginalMeans) {
    const ModelParams p = ModelParams::pim_model(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.6, 0.4), 1.0, 2.0, 50);
    Rng rng = make_stream(14, 0);
    const long n = 100000;
    Eigen::Vector2d sx = Eigen::Vector2d::Zero(), sxx = Eigen::Vector2d::Zero();
    double sd = 0, sdd = 0;
    for (long r = 0; r < n; ++r) {
        const GaussianDraw d = sample_stationary(p, SampleMode::Raw, rng);
        sx += d.X;
        sxx += d.X.cwiseProduct(d.X);
        sd += d.D(0, 0);
        sdd += d.D(0, 0) * d.D(0, 0);
    }
    for (int i = 0; i < 2; ++i) {
        const double m = sx[i] / n, se = std::sqrt((sxx[i] / n - m * m) / n);
        EXPECT_NEAR(m, p.PA(0, i), 3 * se);
    }
    const double md = sd / n, sed = std::sqrt((sdd / n - md * md) / n);
    EXPECT_NEAR(md, 0.0, 3 * sed);
}

TEST(GaussSeries, FullFormulaMatchesSamplerMoment) {
    const ModelParams p = ModelParams::symmetric(2, 2, 1.0, 10.0);
    SampleConfig cfg = SampleConfig::zeros(2, 2);
    cfg.c(0, 0) = 2;
    const long n = 1000000;
    Rng rng = make_stream(15, 0);
    double s = 0, ss = 0;
    for (long r = 0; r < n; ++r) {
        const double h = sample_stationary(p, SampleMode::Raw, rng).H(0, 0);
        s += h * h;
        ss += h * h * h * h;
    }
    const double m = s / n, se = std::sqrt((ss / n - m * m) / n);
    EXPECT_NEAR(q_gauss(cfg, p), m, 3 * se);
}

TEST(GaussSeries, MomentDualitySmallSamples) {
    const ModelParams p = ModelParams::pim_model(Eigen::Vector2d(0.4, 0.6), Eigen::Vector2d(0.5, 0.5), 1.0, 1.5, 20);
    std::vector<SampleConfig> configs;
    for (int n = 1; n <= 4; ++n)
        for (const auto& cfg : enumerate_configs(n, 2, 2)) configs.push_back(cfg);
    const long draws = 200000;
    std::vector<double> s(configs.size(), 0.0), ss(configs.size(), 0.0);
    Rng rng = make_stream(16, 0);
    for (long r = 0; r < draws; ++r) {
        const GaussianDraw d = sample_stationary(p, SampleMode::Raw, rng);
        for (std::size_t k = 0; k < configs.size(); ++k) {
            const SampleConfig& c = configs[k];
            double v = 1.0;
            for (int i = 0; i < 2; ++i) v *= std::pow(d.X[i], c.a[i]) * std::pow(d.Y[i], c.b[i]);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) v *= std::pow(d.H(i, j), c.c(i, j));
            s[k] += v;
            ss[k] += v * v;
        }
    }
    const double z = z_bonferroni(configs.size());
    for (std::size_t k = 0; k < configs.size(); ++k) {
        const double m = s[k] / draws, se = std::sqrt((ss[k] / draws - m * m) / draws);
        EXPECT_NEAR(q_gauss(configs[k], p), m, z * se) << configs[k].label();
    }
}
