#include "twoloc/model.hpp"

#include <cmath>
#include <sstream>

namespace twoloc {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_transition(const Eigen::MatrixXd& P, int size, bool pim, const char* name) {
    if (P.rows() != size || P.cols() != size)
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " has wrong shape");
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        if ((P.row(i).array() < 0.0).any() || (P.row(i).array() > 1.0).any())
            throw Error(ErrorCode::NonStochasticRow, std::string(name) + " has an entry outside [0,1]");
        if (std::abs(P.row(i).sum() - 1.0) > kRowTolerance)
            throw Error(ErrorCode::NonStochasticRow, std::string(name) + " row " + std::to_string(i) + " does not sum to 1");
    }
    if (pim) {
        for (Eigen::Index i = 1; i < P.rows(); ++i)
            if ((P.row(i) - P.row(0)).cwiseAbs().maxCoeff() > kRowTolerance)
                throw Error(ErrorCode::PimFlagMismatch, std::string(name) + " rows differ but pim is set");
    }
}

}  // namespace

ModelParams ModelParams::pim_model(const Eigen::VectorXd& weightsA, const Eigen::VectorXd& weightsB, double thetaA,
                                   double thetaB, double rho) {
    ModelParams p;
    p.K = static_cast<int>(weightsA.size());
    p.L = static_cast<int>(weightsB.size());
    p.thetaA = thetaA;
    p.thetaB = thetaB;
    p.rho = rho;
    p.PA = Eigen::VectorXd::Ones(p.K) * weightsA.transpose();
    p.PB = Eigen::VectorXd::Ones(p.L) * weightsB.transpose();
    p.pim = true;
    return p;
}

ModelParams ModelParams::symmetric(int K, int L, double theta, double rho) {
    return pim_model(Eigen::VectorXd::Constant(K, 1.0 / K), Eigen::VectorXd::Constant(L, 1.0 / L), theta, theta, rho);
}

SampleConfig SampleConfig::zeros(int K, int L) {
    return SampleConfig(Counts::Zero(K), Counts::Zero(L), CountMatrix::Zero(K, L));
}

std::string SampleConfig::label() const {
    std::ostringstream os;
    os << "a=";
    for (Eigen::Index i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
    os << ";b=";
    for (Eigen::Index j = 0; j < b.size(); ++j) os << (j ? "," : "") << b[j];
    os << ";c=";
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        if (i) os << "|";
        for (Eigen::Index j = 0; j < c.cols(); ++j) os << (j ? "," : "") << c(i, j);
    }
    return os.str();
}

void validate_params(const ModelParams& p) {
    if (p.K < 1 || p.L < 1) throw Error(ErrorCode::InvalidArgument, "allele counts K, L must be >= 1");
    if (p.thetaA < 0 || p.thetaB < 0) throw Error(ErrorCode::NegativeRate, "mutation rates must be nonnegative");
    if (!(p.rho > 0)) throw Error(ErrorCode::NegativeRate, "recombination rate must be positive");
    check_transition(p.PA, p.K, p.pim, "PA");
    check_transition(p.PB, p.L, p.pim, "PB");
}

void validate_config(const SampleConfig& cfg, const ModelParams& p) {
    if (cfg.a.size() != p.K || cfg.b.size() != p.L || cfg.c.rows() != p.K || cfg.c.cols() != p.L)
        throw Error(ErrorCode::InvalidConfig, "sample configuration shape does not match K x L");
    if ((cfg.a.array() < 0).any() || (cfg.b.array() < 0).any() || (cfg.c.array() < 0).any())
        throw Error(ErrorCode::InvalidConfig, "negative count in sample configuration");
}

double one_locus_q(const ModelParams& p, Locus locus, const Eigen::Ref<const Counts>& counts) {
    if (!p.pim) throw Error(ErrorCode::UnsupportedMutationModel, "only parent-independent mutation has a closed form");
    if (counts.size() != p.alleles(locus)) throw Error(ErrorCode::InvalidConfig, "count vector has wrong length");
    if ((counts.array() < 0).any()) throw Error(ErrorCode::InvalidConfig, "negative allele count");
    return one_locus_q_pim(p.theta(locus), p.weights(locus), counts);
}

double multinomial(const Eigen::Ref<const Counts>& counts) {
    double logm = std::lgamma(counts.sum() + 1.0);
    for (Eigen::Index i = 0; i < counts.size(); ++i) logm -= std::lgamma(counts[i] + 1.0);
    return std::round(std::exp(logm));
}

double orderings(const SampleConfig& cfg) {
    const Eigen::Map<const Counts> cflat(cfg.c.data(), cfg.c.size());
    return multinomial(cfg.a) * multinomial(cfg.b) * multinomial(cflat);
}

}  // namespace twoloc
