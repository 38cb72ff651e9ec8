#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "twoloc/error.hpp"

namespace twoloc {

using Counts = Eigen::VectorXi;
using CountMatrix = Eigen::MatrixXi;

enum class Locus { A, B };

/// Two-locus finite-alleles model. Rows of PA / PB are mutation transition
/// probabilities; with `pim` set every row is the same weight vector.
struct ModelParams {
    int K = 2;
    int L = 2;
    double thetaA = 1.0;
    double thetaB = 1.0;
    double rho = 1.0;
    Eigen::MatrixXd PA;
    Eigen::MatrixXd PB;
    bool pim = true;

    double theta(Locus locus) const { return locus == Locus::A ? thetaA : thetaB; }
    const Eigen::MatrixXd& transition(Locus locus) const { return locus == Locus::A ? PA : PB; }
    int alleles(Locus locus) const { return locus == Locus::A ? K : L; }

    /// Common row of the transition matrix (only meaningful when pim is set).
    Eigen::VectorXd weights(Locus locus) const { return transition(locus).row(0).transpose(); }

    /// PIM model with the given weight vectors at each locus.
    static ModelParams pim_model(const Eigen::VectorXd& weightsA, const Eigen::VectorXd& weightsB,
                                 double thetaA, double thetaB, double rho);
    /// PIM with uniform weights, the usual symmetric test model.
    static ModelParams symmetric(int K, int L, double theta, double rho);
};

/// Observed sample: a (locus A only), b (locus B only), c (both loci).
struct SampleConfig {
    Counts a;
    Counts b;
    CountMatrix c;

    SampleConfig() = default;
    SampleConfig(Counts a_, Counts b_, CountMatrix c_) : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)) {}
    static SampleConfig zeros(int K, int L);

    int K() const { return static_cast<int>(a.size()); }
    int L() const { return static_cast<int>(b.size()); }
    int a_total() const { return a.sum(); }
    int b_total() const { return b.sum(); }
    int c_total() const { return c.sum(); }
    int n() const { return a_total() + b_total() + c_total(); }

    Counts cA() const { return c.rowwise().sum(); }
    Counts cB() const { return c.colwise().sum().transpose(); }
    /// Marginal configurations a + c_A and b + c_B.
    Counts marginalA() const { return a + cA(); }
    Counts marginalB() const { return b + cB(); }

    bool operator==(const SampleConfig& o) const { return a == o.a && b == o.b && c == o.c; }

    /// Compact label, e.g. "a=0,1;b=0,0;c=1,0|0,2".
    std::string label() const;
};

void validate_params(const ModelParams& p);
void validate_config(const SampleConfig& cfg, const ModelParams& p);

/// (z)_n = z (z+1) ... (z+n-1); exact product up to n = 30, log-gamma beyond.
template <typename Scalar>
Scalar ascending_factorial(Scalar z, int n) {
    if (n <= 0) return Scalar(1);
    if (z == Scalar(0)) return Scalar(0);
    if (n <= 30) {
        Scalar out(1);
        for (int k = 0; k < n; ++k) out *= z + Scalar(k);
        return out;
    }
    using std::exp;
    using std::lgamma;
    return exp(lgamma(z + Scalar(n)) - lgamma(z));
}

/// Ordered one-locus sampling probability under parent-independent mutation,
/// i.e. the Dirichlet(theta * weights) moment E[prod X_i^{counts_i}].
template <typename Derived>
typename Derived::Scalar one_locus_q_pim(typename Derived::Scalar theta, const Eigen::MatrixBase<Derived>& weights,
                                         const Eigen::Ref<const Counts>& counts) {
    using Scalar = typename Derived::Scalar;
    if (theta < Scalar(0)) throw Error(ErrorCode::NegativeRate, "one_locus_q_pim: theta < 0");
    const int m = counts.sum();
    if (m == 0) return Scalar(1);

    if (theta == Scalar(0)) {
        // theta -> 0 limit: monomorphic samples keep the weight of their allele
        int observed = 0;
        Scalar w(0);
        for (Eigen::Index i = 0; i < counts.size(); ++i) {
            if (counts[i] > 0) {
                ++observed;
                w = weights[i];
            }
        }
        return observed == 1 ? w : Scalar(0);
    }

    for (Eigen::Index i = 0; i < counts.size(); ++i)
        if (counts[i] > 0 && weights[i] == Scalar(0)) return Scalar(0);

    if (m <= 30) {
        Scalar num(1);
        for (Eigen::Index i = 0; i < counts.size(); ++i) num *= ascending_factorial(theta * weights[i], counts[i]);
        return num / ascending_factorial(theta, m);
    }
    using std::exp;
    using std::lgamma;
    Scalar logq = -(lgamma(theta + Scalar(m)) - lgamma(theta));
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        const Scalar z = theta * weights[i];
        logq += lgamma(z + Scalar(counts[i])) - lgamma(z);
    }
    return exp(logq);
}

/// Dispatching one-locus sampling probability; only PIM is supported.
double one_locus_q(const ModelParams& p, Locus locus, const Eigen::Ref<const Counts>& counts);

/// Number of orderings of a sample with these multiplicities.
double multinomial(const Eigen::Ref<const Counts>& counts);

/// Number of distinct orderings of a two-locus sample for a fixed observation pattern.
double orderings(const SampleConfig& cfg);

inline double binom2(int k) { return 0.5 * k * (k - 1); }

}  // namespace twoloc
