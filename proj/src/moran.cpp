#include "twoloc/moran.hpp"

#include <cmath>

#include "twoloc/gaussian.hpp"
#include "twoloc/parallel.hpp"

namespace twoloc {

namespace {

/// Uniform integer in [0, n) by multiply-shift.
inline int fast_index(Rng& rng, int n) {
    return static_cast<int>((static_cast<unsigned __int128>(rng()) * static_cast<unsigned>(n)) >> 64);
}

/// Linear (column-major) cell of a uniformly chosen individual.
inline int pick_cell(const CountMatrix& Z, int N, Rng& rng) {
    int r = fast_index(rng, N);
    const int cells = static_cast<int>(Z.size());
    const int* z = Z.data();
    for (int k = 0; k < cells; ++k) {
        if (r < z[k]) return k;
        r -= z[k];
    }
    return cells - 1;
}

inline int pick_row(const Eigen::MatrixXd& P, int from, Rng& rng) {
    double u = uniform01(rng);
    const auto n = P.cols();
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        u -= P(from, k);
        if (u < 0) return static_cast<int>(k);
    }
    return static_cast<int>(n - 1);
}

}  // namespace

double MoranParams::rho() const { return rho_beta * std::pow(static_cast<double>(N), 1.0 - beta); }

double MoranParams::time_scale() const { return std::pow(static_cast<double>(N), 1.0 - beta); }

double MoranParams::total_rate() const { return 0.5 * N * (N + thetaA + thetaB + rho()); }

void validate_moran(const MoranParams& p) {
    if (p.N < 2) throw Error(ErrorCode::InvalidArgument, "N must be >= 2");
    if (!(p.beta > 0.0 && p.beta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "beta must lie in (0, 1]");
    if (p.rho_beta < 0 || p.thetaA < 0 || p.thetaB < 0) throw Error(ErrorCode::NegativeRate, "rates must be >= 0");
    ModelParams m;
    m.K = static_cast<int>(p.PA.rows());
    m.L = static_cast<int>(p.PB.rows());
    m.PA = p.PA;
    m.PB = p.PB;
    m.pim = false;
    m.rho = 1.0;
    validate_params(m);
}

MProjection MProjection::of(const MoranState& s, double t) {
    MProjection m;
    m.t = t;
    const Eigen::MatrixXd H = s.Z.cast<double>() / static_cast<double>(s.N);
    m.X = H.rowwise().sum();
    m.Y = H.colwise().sum().transpose();
    m.D = H - m.X * m.Y.transpose();
    return m;
}

const char* event_name(MoranEvent e) {
    switch (e) {
        case MoranEvent::Reproduction: return "reproduction";
        case MoranEvent::MutationA: return "mutationA";
        case MoranEvent::MutationB: return "mutationB";
        case MoranEvent::Recombination: return "recombination";
    }
    return "unknown";
}

MoranEvent draw_event(const MoranParams& p, Rng& rng) {
    // class weights after dropping the common factor N/2
    const double wR = p.N, wA = p.thetaA, wB = p.thetaB, wX = p.rho();
    double u = uniform01(rng) * (wR + wA + wB + wX);
    if ((u -= wR) < 0) return MoranEvent::Reproduction;
    if ((u -= wA) < 0) return MoranEvent::MutationA;
    if ((u -= wB) < 0) return MoranEvent::MutationB;
    return MoranEvent::Recombination;
}

void apply_event(MoranState& s, MoranEvent e, const MoranParams& p, Rng& rng) {
    const int K = static_cast<int>(s.Z.rows());
    int* z = s.Z.data();
    const int victim = pick_cell(s.Z, s.N, rng);
    const int vi = victim % K;
    const int vj = victim / K;
    int target = victim;
    switch (e) {
        case MoranEvent::Reproduction:
            target = pick_cell(s.Z, s.N, rng);
            break;
        case MoranEvent::MutationA:
            target = pick_row(p.PA, vi, rng) + vj * K;
            break;
        case MoranEvent::MutationB:
            target = vi + pick_row(p.PB, vj, rng) * K;
            break;
        case MoranEvent::Recombination: {
            const int k = pick_cell(s.Z, s.N, rng) % K;
            const int l = pick_cell(s.Z, s.N, rng) / K;
            target = k + l * K;
            break;
        }
    }
    --z[victim];
    ++z[target];
}

StepResult step(MoranState& s, const MoranParams& p, Rng& rng) {
    const double wait = exponential(rng, p.total_rate());
    const MoranEvent e = draw_event(p, rng);
    apply_event(s, e, p, rng);
    s.clock += wait;
    return {e, wait};
}

Trajectory run(const MoranParams& p, const CountMatrix& init, double horizon, double dt, Rng& rng) {
    if (!(horizon > 0) || !(dt > 0)) throw Error(ErrorCode::InvalidArgument, "horizon and dt must be positive");
    validate_moran(p);
    if (init.sum() != p.N || (init.array() < 0).any())
        throw Error(ErrorCode::InvalidConfig, "initial counts must be nonnegative and sum to N");
    MoranState s{init, p.N, 0.0};
    const double scale = p.time_scale();
    const double per_interval = p.total_rate() * dt / scale;
    const auto steps = static_cast<long>(std::floor(horizon / dt + 1e-9));
    Trajectory out;
    out.reserve(static_cast<std::size_t>(steps + 1));
    out.push_back(MProjection::of(s, 0.0));
    std::poisson_distribution<long> events(per_interval);
    for (long k = 1; k <= steps; ++k) {
        const long count = events(rng);
        for (long e = 0; e < count; ++e) apply_event(s, draw_event(p, rng), p, rng);
        s.clock = k * dt / scale;
        out.push_back(MProjection::of(s, k * dt));
    }
    return out;
}

std::vector<Trajectory> run_ensemble(const MoranParams& p, const CountMatrix& init, double horizon, double dt,
                                     std::size_t count, std::uint64_t seed, int threads) {
    std::vector<Trajectory> out(count);
    parallel_for(count, threads, [&](std::size_t k) {
        Rng rng = make_stream(seed, k);
        out[k] = run(p, init, horizon, dt, rng);
    });
    return out;
}

LlnReport check_lln(const std::vector<Trajectory>& ensemble, const MoranParams& p) {
    if (ensemble.size() < kMinEnsemble)
        throw Error(ErrorCode::InsufficientEnsemble, "need at least " + std::to_string(kMinEnsemble) + " trajectories");
    LlnReport rep;
    rep.trajectories = ensemble.size();
    rep.expected_rate = p.rho_beta / 2.0;
    const MProjection& m0 = ensemble.front().front();
    const auto K = m0.D.rows(), L = m0.D.cols();
    Eigen::Index bi = 0, bj = 0;
    m0.D.cwiseAbs().maxCoeff(&bi, &bj);
    rep.cell_i = static_cast<int>(bi);
    rep.cell_j = static_cast<int>(bj);

    const std::size_t T = ensemble.front().size();
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(K, L);
        for (const auto& tr : ensemble) mean += tr[k].D;
        mean /= static_cast<double>(ensemble.size());
        const double t = ensemble.front()[k].t;
        const Eigen::MatrixXd M = m0.D * std::exp(-p.rho_beta * t / 2.0);
        rep.max_abs_deviation = std::max(rep.max_abs_deviation, (mean - M).cwiseAbs().maxCoeff());
        const double d0 = m0.D(bi, bj);
        if (k > 0 && d0 != 0.0) {
            const double ratio = mean(bi, bj) / d0;
            if (ratio > 0.05) {
                num += t * std::log(ratio);
                den += t * t;
            }
        }
    }
    rep.fitted_rate = den > 0 ? -num / den : 0.0;

    double sup_total = 0.0;
    for (const auto& tr : ensemble) {
        double sup = 0.0;
        for (const auto& m : tr) {
            const Eigen::MatrixXd M = m0.D * std::exp(-p.rho_beta * m.t / 2.0);
            sup = std::max({sup, (m.X - m0.X).cwiseAbs().maxCoeff(), (m.Y - m0.Y).cwiseAbs().maxCoeff(),
                            (m.D - M).cwiseAbs().maxCoeff()});
        }
        sup_total += sup;
    }
    rep.mean_sup_deviation = sup_total / static_cast<double>(ensemble.size());
    return rep;
}

FluctuationReport check_fluctuations(const std::vector<Trajectory>& ensemble, const MoranParams& p) {
    if (ensemble.size() < kMinEnsemble)
        throw Error(ErrorCode::InsufficientEnsemble, "need at least " + std::to_string(kMinEnsemble) + " trajectories");
    FluctuationReport rep;
    const std::size_t M = ensemble.size();
    rep.trajectories = M;
    const MProjection& m0 = ensemble.front().front();
    const auto K = m0.D.rows(), L = m0.D.cols();
    const auto cells = K * L;
    rep.time = ensemble.front().back().t;
    const double rN = std::pow(static_cast<double>(p.N), (1.0 - p.beta) / 2.0);
    const Eigen::MatrixXd centre = m0.D * std::exp(-p.rho_beta * rep.time / 2.0);

    Eigen::MatrixXd U(static_cast<Eigen::Index>(M), cells);
    for (std::size_t r = 0; r < M; ++r) {
        const Eigen::MatrixXd u = rN * (ensemble[r].back().D - centre);
        for (Eigen::Index i = 0; i < K; ++i)
            for (Eigen::Index j = 0; j < L; ++j) U(static_cast<Eigen::Index>(r), i * L + j) = u(i, j);
    }
    rep.mean = U.colwise().mean().transpose();
    const Eigen::MatrixXd C = U.rowwise() - rep.mean.transpose();
    rep.covariance = C.transpose() * C / static_cast<double>(M - 1);
    rep.mean_se = (rep.covariance.diagonal() / static_cast<double>(M)).cwiseSqrt();

    rep.target.resize(cells, cells);
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < L; ++j)
            for (Eigen::Index k = 0; k < K; ++k)
                for (Eigen::Index l = 0; l < L; ++l)
                    rep.target(i * L + j, k * L + l) =
                        s_infinity(m0.X, m0.Y, static_cast<int>(i), static_cast<int>(j), static_cast<int>(k),
                                   static_cast<int>(l)) /
                        p.rho_beta;

    const Eigen::VectorXd u11 = C.col(0);
    const double m2 = u11.squaredNorm() / static_cast<double>(M);
    const double m3 = u11.array().cube().sum() / static_cast<double>(M);
    const double m4 = u11.array().square().square().sum() / static_cast<double>(M);
    rep.var_u11 = rep.covariance(0, 0);
    rep.target_u11 = rep.target(0, 0);
    rep.var_u11_se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / static_cast<double>(M));
    const double skew = m3 / std::pow(m2, 1.5);
    const double kurt = m4 / (m2 * m2);
    rep.jarque_bera = static_cast<double>(M) / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
    rep.jarque_bera_p = std::exp(-rep.jarque_bera / 2.0);
    return rep;
}

}  // namespace twoloc
