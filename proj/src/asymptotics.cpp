#include "twoloc/asymptotics.hpp"

namespace twoloc {

double q0(const SampleConfig& cfg, const ModelParams& p) {
    return one_locus_q(p, Locus::A, cfg.marginalA()) * one_locus_q(p, Locus::B, cfg.marginalB());
}

double q1(const SampleConfig& cfg, const ModelParams& p) {
    const Counts xa = cfg.marginalA();
    const Counts yb = cfg.marginalB();
    const Counts cA = cfg.cA();
    const Counts cB = cfg.cB();
    const double qA = one_locus_q(p, Locus::A, xa);
    const double qB = one_locus_q(p, Locus::B, yb);

    // q^A and q^B with one allele removed, one entry per allele
    Eigen::VectorXd qA_minus = Eigen::VectorXd::Zero(cfg.K());
    Eigen::VectorXd qB_minus = Eigen::VectorXd::Zero(cfg.L());
    for (int i = 0; i < cfg.K(); ++i) {
        if (cA[i] < 2) continue;
        Counts x = xa;
        --x[i];
        qA_minus[i] = one_locus_q(p, Locus::A, x);
    }
    for (int j = 0; j < cfg.L(); ++j) {
        if (cB[j] < 2) continue;
        Counts y = yb;
        --y[j];
        qB_minus[j] = one_locus_q(p, Locus::B, y);
    }

    double out = binom2(cfg.c_total()) * qA * qB;
    for (int i = 0; i < cfg.K(); ++i) out -= qB * binom2(cA[i]) * qA_minus[i];
    for (int j = 0; j < cfg.L(); ++j) out -= qA * binom2(cB[j]) * qB_minus[j];
    for (int i = 0; i < cfg.K(); ++i)
        for (int j = 0; j < cfg.L(); ++j)
            if (cfg.c(i, j) >= 2) out += binom2(cfg.c(i, j)) * qA_minus[i] * qB_minus[j];
    return out;
}

SeriesTable first_order_series(const SampleConfig& cfg, const ModelParams& p) {
    Eigen::VectorXd s(2);
    s << q0(cfg, p), q1(cfg, p);
    return {s, SeriesOrigin::TrueModel};
}

double series_partial_sum(const SeriesTable& t, double rho) {
    if (!(rho > 0)) throw Error(ErrorCode::NegativeRate, "rho must be positive");
    return polynomial_at<double>(t.coeffs, 1.0 / rho);
}

double pade_staircase(const SeriesTable& t, double rho, PadeOrder order) {
    if (!(rho > 0)) throw Error(ErrorCode::NegativeRate, "rho must be positive");
    if (t.order() == 0 || (t.order() == 1 && order == PadeOrder::NumeratorFirst)) return series_partial_sum(t, rho);
    const auto pa = staircase_pade<double>(t.coeffs, order);
    const double x = 1.0 / rho;
    // den(0) = 1, so a nonpositive value means a pole was crossed on the way to x
    if (!(polynomial_at<double>(pa.den, x) > 0))
        throw Error(ErrorCode::SingularPade, "Pade denominator has a root in (0, 1/rho]");
    return pa(x);
}

}  // namespace twoloc
