#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "twoloc/asymptotics.hpp"
#include "twoloc/model.hpp"
#include "twoloc/rng.hpp"

namespace twoloc {

/// Perfect matching of [2 lambda] as pairs {mu_k, nu_k}, 1-based,
/// normalized so mu_k < nu_k and mu_1 < mu_2 < ...
struct PairPartition {
    int lambda = 0;
    std::vector<int> mu;
    std::vector<int> nu;

    bool operator==(const PairPartition& o) const { return mu == o.mu && nu == o.nu; }
};

constexpr int kDefaultLambdaCap = 8;
constexpr int kAllLambda = -1;

/// All (2 lambda - 1)!! pair partitions in lexicographic order.
std::vector<PairPartition> enumerate_pair_partitions(int lambda, int cap = kDefaultLambdaCap);

/// All r with sum 2 lambda and r <= c componentwise, row-major lexicographic.
std::vector<CountMatrix> enumerate_r(const CountMatrix& c, int lambda);

/// Haplotypes realizing r in row-major order with repeats adjacent (0-based alleles).
struct HaplotypeList {
    std::vector<std::pair<int, int>> h;

    static HaplotypeList from(const CountMatrix& r);
    std::vector<int> alleles_A() const;
    std::vector<int> alleles_B() const;
};

enum class GaussMethod {
    /// Literal triple sum over r, pair partitions and subsets.
    Direct,
    /// Matchings grouped by pair-type counts; same value, far fewer terms.
    Grouped
};

/// Coefficients s_0..s_Lambda of q_G in powers of 1/rho, Lambda = min(lambda_max, floor(c/2)).
/// They do not depend on rho, so one table serves every rho.
SeriesTable gauss_series(const SampleConfig& cfg, const ModelParams& p, int lambda_max = kAllLambda,
                         GaussMethod method = GaussMethod::Grouped);

/// Gaussian-model sampling probability truncated at lambda_max (kAllLambda = exact).
double q_gauss(const SampleConfig& cfg, const ModelParams& p, int lambda_max = kAllLambda,
               GaussMethod method = GaussMethod::Grouped);

struct GaussianDraw {
    Eigen::VectorXd X;
    Eigen::VectorXd Y;
    Eigen::MatrixXd D;
    Eigen::MatrixXd H;
    long rejections = 0;
};

enum class SampleMode { Raw, Reject };

constexpr long kDefaultRejectionCap = 100000;

Eigen::VectorXd sample_dirichlet(double theta, const Eigen::VectorXd& weights, Rng& rng);

/// F with F F' = diag(x) - x x', via a symmetric eigendecomposition with
/// eigenvalues below 1e-14 set to zero.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> multinomial_covariance_factor(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Mat sigma = Mat(x.asDiagonal()) - x * x.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    auto ev = es.eigenvalues().eval();
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        using std::sqrt;
        ev[k] = ev[k] < Scalar(1e-14) ? Scalar(0) : sqrt(ev[k]);
    }
    return es.eigenvectors() * ev.asDiagonal();
}

/// [s_inf]_{ij,kl} = X_i Y_j (d_ik - X_k)(d_jl - Y_l).
double s_infinity(const Eigen::VectorXd& X, const Eigen::VectorXd& Y, int i, int j, int k, int l);

/// D | X, Y ~ Normal(0, s_inf / rho).
Eigen::MatrixXd sample_conditional_ld(const Eigen::VectorXd& X, const Eigen::VectorXd& Y, double rho, Rng& rng);

GaussianDraw sample_stationary(const ModelParams& p, SampleMode mode, Rng& rng,
                               long max_redraws = kDefaultRejectionCap);

}  // namespace twoloc
