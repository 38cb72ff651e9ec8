#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "twoloc/model.hpp"

namespace twoloc {

enum class SeriesOrigin { TrueModel, GaussianModel };

/// Coefficients s_0..s_lambda of sum_k s_k x^k with x = 1/rho.
struct SeriesTable {
    Eigen::VectorXd coeffs;
    SeriesOrigin origin = SeriesOrigin::TrueModel;

    int order() const { return static_cast<int>(coeffs.size()) - 1; }
    /// Leading (lambda + 1) coefficients.
    SeriesTable truncated(int lambda) const { return {coeffs.head(lambda + 1), origin}; }
};

double q0(const SampleConfig& cfg, const ModelParams& p);
double q1(const SampleConfig& cfg, const ModelParams& p);

/// The table [q0, q1] of the true model.
SeriesTable first_order_series(const SampleConfig& cfg, const ModelParams& p);

template <typename Scalar>
Scalar polynomial_at(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& coeffs, Scalar x) {
    Scalar acc(0);
    for (Eigen::Index k = coeffs.size() - 1; k >= 0; --k) acc = acc * x + coeffs[k];
    return acc;
}

double series_partial_sum(const SeriesTable& t, double rho);

/// Rational approximant num(x)/den(x) with den(0) = 1.
template <typename Scalar>
struct PadeApproximant {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> num;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> den;

    Scalar operator()(Scalar x) const;
    /// Maclaurin coefficients of num/den through order `order`.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> expand(int order) const;
};

/// Which degree steps first along the staircase: [0/0], [1/0], [1/1], ... or [0/0], [0/1], [1/1], ...
enum class PadeOrder { NumeratorFirst, DenominatorFirst };

/// Staircase approximant of a series of order l: [ceil(l/2) / floor(l/2)] numerator first,
/// [floor(l/2) / ceil(l/2)] denominator first.
/// Throws SingularPade when the denominator system has condition above 1e12.
template <typename Scalar>
PadeApproximant<Scalar> staircase_pade(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& s,
                                       PadeOrder order = PadeOrder::NumeratorFirst);

/// Evaluates the staircase approximant at x = 1/rho. Throws SingularPade when the
/// denominator is singular or has a root in (0, 1/rho].
double pade_staircase(const SeriesTable& t, double rho, PadeOrder order = PadeOrder::NumeratorFirst);

constexpr double kPadeConditionLimit = 1e12;

template <typename Scalar>
PadeApproximant<Scalar> staircase_pade(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& s, PadeOrder order) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (s.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty series");
    const int lambda = static_cast<int>(s.size()) - 1;
    const bool num_first = order == PadeOrder::NumeratorFirst;
    const int m = num_first ? (lambda + 1) / 2 : lambda / 2;
    const int n = lambda - m;
    auto coeff = [&](int k) { return k < 0 ? Scalar(0) : s[k]; };

    Vec b = Vec::Zero(n + 1);
    b[0] = Scalar(1);
    if (n > 0) {
        Mat A(n, n);
        Vec rhs(n);
        for (int r = 0; r < n; ++r) {
            const int k = m + 1 + r;
            for (int j = 1; j <= n; ++j) A(r, j - 1) = coeff(k - j);
            rhs[r] = -coeff(k);
        }
        Eigen::PartialPivLU<Mat> lu(A);
        const Scalar rcond = lu.rcond();
        using std::isfinite;
        if (!(rcond > Scalar(1) / Scalar(kPadeConditionLimit)) || !isfinite(rcond))
            throw Error(ErrorCode::SingularPade, "Pade denominator system is singular");
        b.tail(n) = lu.solve(rhs);
    }
    Vec a(m + 1);
    for (int k = 0; k <= m; ++k) {
        Scalar acc(0);
        for (int j = 0; j <= std::min(k, n); ++j) acc += b[j] * coeff(k - j);
        a[k] = acc;
    }
    return {a, b};
}

template <typename Scalar>
Scalar PadeApproximant<Scalar>::operator()(Scalar x) const {
    using std::abs;
    const Scalar q = polynomial_at(den, x);
    Scalar scale(1);
    Scalar xk(1);
    for (Eigen::Index j = 1; j < den.size(); ++j) {
        xk *= x;
        scale += abs(den[j] * xk);
    }
    if (abs(q) <= Scalar(1e-14) * scale)
        throw Error(ErrorCode::SingularPade, "Pade denominator vanishes at the evaluation point");
    return polynomial_at(num, x) / q;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> PadeApproximant<Scalar>::expand(int order) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(order + 1);
    for (int k = 0; k <= order; ++k) {
        Scalar acc = k < num.size() ? num[k] : Scalar(0);
        for (int j = 1; j < den.size() && j <= k; ++j) acc -= den[j] * c[k - j];
        c[k] = acc;
    }
    return c;
}

}  // namespace twoloc
