#include "twoloc/gaussian.hpp"

#include <cmath>
#include <map>

namespace twoloc {

namespace {

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double out = 1.0;
    for (int t = 1; t <= k; ++t) out = out * (n - k + t) / t;
    return std::round(out);
}

double factorial(int n) { return std::tgamma(n + 1.0); }

void partitions_rec(std::vector<int>& partner, int lambda, std::vector<PairPartition>& out) {
    const int m = 2 * lambda;
    int first = -1;
    for (int k = 0; k < m; ++k) {
        if (partner[k] < 0) {
            first = k;
            break;
        }
    }
    if (first < 0) {
        PairPartition pp;
        pp.lambda = lambda;
        for (int k = 0; k < m; ++k) {
            if (partner[k] > k) {
                pp.mu.push_back(k + 1);
                pp.nu.push_back(partner[k] + 1);
            }
        }
        out.push_back(std::move(pp));
        return;
    }
    for (int k = first + 1; k < m; ++k) {
        if (partner[k] >= 0) continue;
        partner[first] = k;
        partner[k] = first;
        partitions_rec(partner, lambda, out);
        partner[first] = -1;
        partner[k] = -1;
    }
}

void r_rec(const CountMatrix& c, int pos, int remaining, CountMatrix& r, std::vector<CountMatrix>& out) {
    const int cells = static_cast<int>(c.size());
    if (pos == cells) {
        if (remaining == 0) out.push_back(r);
        return;
    }
    const int i = pos / static_cast<int>(c.cols());
    const int j = pos % static_cast<int>(c.cols());
    int tail = 0;
    for (int q = pos + 1; q < cells; ++q) tail += c(q / c.cols(), q % c.cols());
    for (int v = 0; v <= std::min(c(i, j), remaining); ++v) {
        if (remaining - v > tail) continue;
        r(i, j) = v;
        r_rec(c, pos + 1, remaining - v, r, out);
    }
    r(i, j) = 0;
}

/// Memoized one-locus probabilities keyed by count vector.
class OneLocusCache {
public:
    OneLocusCache(const ModelParams& p, Locus locus) : p_(p), locus_(locus) {}

    double operator()(const Counts& counts) {
        std::vector<int> key(counts.data(), counts.data() + counts.size());
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        const double v = one_locus_q(p_, locus_, counts);
        memo_.emplace(std::move(key), v);
        return v;
    }

private:
    const ModelParams& p_;
    Locus locus_;
    std::map<std::vector<int>, double> memo_;
};

/// Signed subset sum over I of one bracket, for one pair partition.
double direct_bracket(const std::vector<int>& alleles, const PairPartition& xi, const Counts& base,
                      OneLocusCache& q) {
    const int lambda = xi.lambda;
    unsigned matched = 0;
    for (int k = 0; k < lambda; ++k)
        if (alleles[xi.mu[k] - 1] == alleles[xi.nu[k] - 1]) matched |= 1u << k;
    double out = 0.0;
    // every subset I of the matched pairs, including the empty one
    for (unsigned I = matched;; I = (I - 1) & matched) {
        Counts x = base;
        int size = 0;
        for (int k = 0; k < lambda; ++k) {
            if (I & (1u << k)) {
                --x[alleles[xi.nu[k] - 1]];
                ++size;
            }
        }
        const double sign = ((lambda - size) % 2 == 0) ? 1.0 : -1.0;
        out += sign * q(x);
        if (I == 0) break;
    }
    return out;
}

double direct_coefficient(const SampleConfig& cfg, int lambda, const Counts& baseA, const Counts& baseB,
                          OneLocusCache& qA, OneLocusCache& qB) {
    const auto partitions = enumerate_pair_partitions(lambda);
    double total = 0.0;
    for (const CountMatrix& r : enumerate_r(cfg.c, lambda)) {
        double weight = 1.0;
        for (Eigen::Index k = 0; k < r.size(); ++k) weight *= binomial(cfg.c.data()[k], r.data()[k]);
        const HaplotypeList hl = HaplotypeList::from(r);
        const auto hA = hl.alleles_A();
        const auto hB = hl.alleles_B();
        double acc = 0.0;
        for (const auto& xi : partitions) {
            const double sa = direct_bracket(hA, xi, baseA, qA);
            if (sa == 0.0) continue;
            acc += sa * direct_bracket(hB, xi, baseB, qB);
        }
        total += weight * acc;
    }
    return total;
}

/// sum_t prod binom(e_i, t_i) (-1)^{|t|} q(base - t)
double grouped_bracket(const Counts& e, const Counts& base, OneLocusCache& q) {
    const int K = static_cast<int>(e.size());
    Counts t = Counts::Zero(K);
    double out = 0.0;
    while (true) {
        double w = 1.0;
        int total = 0;
        for (int i = 0; i < K; ++i) {
            w *= binomial(e[i], t[i]);
            total += t[i];
        }
        out += ((total % 2 == 0) ? w : -w) * q(base - t);
        int i = 0;
        while (i < K && t[i] == e[i]) t[i++] = 0;
        if (i == K) break;
        ++t[i];
    }
    return out;
}

struct GroupedContext {
    int T;
    int K;
    int L;
    std::vector<int> rcount;
    std::vector<std::pair<int, int>> pair_types;  // (u, v) with u <= v
    std::vector<int> m;
    const Counts* baseA;
    const Counts* baseB;
    OneLocusCache* qA;
    OneLocusCache* qB;
    std::map<std::vector<int>, double> bracketA;
    std::map<std::vector<int>, double> bracketB;

    double bracket(const Counts& e, bool locusA) {
        auto& memo = locusA ? bracketA : bracketB;
        std::vector<int> key(e.data(), e.data() + e.size());
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        const double v = grouped_bracket(e, locusA ? *baseA : *baseB, locusA ? *qA : *qB);
        memo.emplace(std::move(key), v);
        return v;
    }

    double evaluate() {
        double denom = 1.0;
        Counts eA = Counts::Zero(K);
        Counts eB = Counts::Zero(L);
        for (std::size_t k = 0; k < pair_types.size(); ++k) {
            const int mk = m[k];
            if (mk == 0) continue;
            const auto [u, v] = pair_types[k];
            denom *= factorial(mk);
            if (u == v) denom *= std::ldexp(1.0, mk);
            const int iu = u / L, ju = u % L, iv = v / L, jv = v % L;
            if (iu == iv) eA[iu] += mk;
            if (ju == jv) eB[ju] += mk;
        }
        double numer = 1.0;
        for (int u = 0; u < T; ++u) numer *= factorial(rcount[u]);
        const double sa = bracket(eA, true);
        if (sa == 0.0) return 0.0;
        return std::round(numer / denom) * sa * bracket(eB, false);
    }

    // Enumerate pair-type counts m consistent with the remaining multiplicities.
    double rec(std::size_t k, std::vector<int>& rem) {
        if (k == pair_types.size()) return evaluate();
        const auto [u, v] = pair_types[k];
        double out = 0.0;
        const int hi = (u == v) ? rem[u] / 2 : std::min(rem[u], rem[v]);
        for (int x = 0; x <= hi; ++x) {
            if (u == v) {
                rem[u] -= 2 * x;
            } else {
                rem[u] -= x;
                rem[v] -= x;
            }
            m[k] = x;
            // the last pair type involving u is (u, T-1); nothing may remain after it
            const bool closes_u = (v == T - 1);
            if (!closes_u || rem[u] == 0) out += rec(k + 1, rem);
            if (u == v) {
                rem[u] += 2 * x;
            } else {
                rem[u] += x;
                rem[v] += x;
            }
        }
        m[k] = 0;
        return out;
    }
};

double grouped_coefficient(const SampleConfig& cfg, int lambda, const Counts& baseA, const Counts& baseB,
                           OneLocusCache& qA, OneLocusCache& qB) {
    const int K = cfg.K();
    const int L = cfg.L();
    GroupedContext ctx;
    ctx.T = K * L;
    ctx.K = K;
    ctx.L = L;
    for (int u = 0; u < ctx.T; ++u)
        for (int v = u; v < ctx.T; ++v) ctx.pair_types.emplace_back(u, v);
    ctx.m.assign(ctx.pair_types.size(), 0);
    ctx.baseA = &baseA;
    ctx.baseB = &baseB;
    ctx.qA = &qA;
    ctx.qB = &qB;

    double total = 0.0;
    for (const CountMatrix& r : enumerate_r(cfg.c, lambda)) {
        double weight = 1.0;
        ctx.rcount.assign(ctx.T, 0);
        for (int i = 0; i < K; ++i) {
            for (int j = 0; j < L; ++j) {
                weight *= binomial(cfg.c(i, j), r(i, j));
                ctx.rcount[i * L + j] = r(i, j);
            }
        }
        std::vector<int> rem = ctx.rcount;
        total += weight * ctx.rec(0, rem);
    }
    return total;
}

}  // namespace

std::vector<PairPartition> enumerate_pair_partitions(int lambda, int cap) {
    if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (lambda > cap)
        throw Error(ErrorCode::SizeLimit, "lambda " + std::to_string(lambda) + " exceeds cap " + std::to_string(cap));
    std::vector<PairPartition> out;
    std::vector<int> partner(2 * lambda, -1);
    partitions_rec(partner, lambda, out);
    return out;
}

std::vector<CountMatrix> enumerate_r(const CountMatrix& c, int lambda) {
    std::vector<CountMatrix> out;
    if (lambda < 0) return out;
    CountMatrix r = CountMatrix::Zero(c.rows(), c.cols());
    r_rec(c, 0, 2 * lambda, r, out);
    return out;
}

HaplotypeList HaplotypeList::from(const CountMatrix& r) {
    HaplotypeList hl;
    for (int i = 0; i < r.rows(); ++i)
        for (int j = 0; j < r.cols(); ++j)
            for (int k = 0; k < r(i, j); ++k) hl.h.emplace_back(i, j);
    return hl;
}

std::vector<int> HaplotypeList::alleles_A() const {
    std::vector<int> out;
    out.reserve(h.size());
    for (const auto& [i, j] : h) out.push_back(i);
    return out;
}

std::vector<int> HaplotypeList::alleles_B() const {
    std::vector<int> out;
    out.reserve(h.size());
    for (const auto& [i, j] : h) out.push_back(j);
    return out;
}

SeriesTable gauss_series(const SampleConfig& cfg, const ModelParams& p, int lambda_max, GaussMethod method) {
    validate_config(cfg, p);
    if (!p.pim) throw Error(ErrorCode::UnsupportedMutationModel, "the Gaussian formula needs PIM marginals");
    const int top = cfg.c_total() / 2;
    const int Lambda = lambda_max < 0 ? top : std::min(lambda_max, top);
    if (method == GaussMethod::Direct && Lambda > kDefaultLambdaCap)
        throw Error(ErrorCode::SizeLimit, "direct enumeration limited to lambda <= 8");

    const Counts baseA = cfg.marginalA();
    const Counts baseB = cfg.marginalB();
    OneLocusCache qA(p, Locus::A);
    OneLocusCache qB(p, Locus::B);
    Eigen::VectorXd s(Lambda + 1);
    for (int lambda = 0; lambda <= Lambda; ++lambda) {
        s[lambda] = method == GaussMethod::Direct ? direct_coefficient(cfg, lambda, baseA, baseB, qA, qB)
                                                  : grouped_coefficient(cfg, lambda, baseA, baseB, qA, qB);
    }
    return {s, SeriesOrigin::GaussianModel};
}

double q_gauss(const SampleConfig& cfg, const ModelParams& p, int lambda_max, GaussMethod method) {
    validate_params(p);
    return series_partial_sum(gauss_series(cfg, p, lambda_max, method), p.rho);
}

Eigen::VectorXd sample_dirichlet(double theta, const Eigen::VectorXd& weights, Rng& rng) {
    const auto K = weights.size();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(K);
    if (theta == 0.0) {
        std::discrete_distribution<int> pick(weights.data(), weights.data() + K);
        x[pick(rng)] = 1.0;
        return x;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < K; ++i) {
        const double alpha = theta * weights[i];
        if (alpha <= 0.0) continue;
        x[i] = std::gamma_distribution<double>(alpha, 1.0)(rng);
        total += x[i];
    }
    if (total <= 0.0) {
        // every gamma underflowed; fall back to the limiting one-hot law
        std::discrete_distribution<int> pick(weights.data(), weights.data() + K);
        x.setZero();
        x[pick(rng)] = 1.0;
        return x;
    }
    return x / total;
}

double s_infinity(const Eigen::VectorXd& X, const Eigen::VectorXd& Y, int i, int j, int k, int l) {
    return X[i] * Y[j] * ((i == k ? 1.0 : 0.0) - X[k]) * ((j == l ? 1.0 : 0.0) - Y[l]);
}

Eigen::MatrixXd sample_conditional_ld(const Eigen::VectorXd& X, const Eigen::VectorXd& Y, double rho, Rng& rng) {
    const Eigen::MatrixXd FA = multinomial_covariance_factor<double>(X);
    const Eigen::MatrixXd FB = multinomial_covariance_factor<double>(Y);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd Z(X.size(), Y.size());
    for (Eigen::Index k = 0; k < Z.size(); ++k) Z.data()[k] = normal(rng);
    return FA * Z * FB.transpose() / std::sqrt(rho);
}

GaussianDraw sample_stationary(const ModelParams& p, SampleMode mode, Rng& rng, long max_redraws) {
    if (!p.pim) throw Error(ErrorCode::UnsupportedMutationModel, "stationary sampler needs PIM marginals");
    if (!(p.rho > 0)) throw Error(ErrorCode::NegativeRate, "rho must be positive");
    GaussianDraw g;
    for (long attempt = 0;; ++attempt) {
        g.X = sample_dirichlet(p.thetaA, p.weights(Locus::A), rng);
        g.Y = sample_dirichlet(p.thetaB, p.weights(Locus::B), rng);
        g.D = sample_conditional_ld(g.X, g.Y, p.rho, rng);
        g.H = g.D + g.X * g.Y.transpose();
        g.rejections = attempt;
        if (mode == SampleMode::Raw) return g;
        if ((g.H.array() >= 0.0).all() && (g.H.array() <= 1.0).all()) return g;
        if (attempt + 1 >= max_redraws)
            throw Error(ErrorCode::RejectionCap, "reject mode exceeded " + std::to_string(max_redraws) + " redraws");
    }
}

}  // namespace twoloc
