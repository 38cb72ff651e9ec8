#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "twoloc/model.hpp"
#include "twoloc/rng.hpp"

namespace twoloc {

struct MoranParams {
    int N = 1000;
    double beta = 0.5;
    double rho_beta = 2.0;
    double thetaA = 0.0;
    double thetaB = 0.0;
    Eigen::MatrixXd PA = Eigen::MatrixXd::Constant(2, 2, 0.5);
    Eigen::MatrixXd PB = Eigen::MatrixXd::Constant(2, 2, 0.5);

    /// Recombination rate of the finite population, rho_beta N^(1-beta).
    double rho() const;
    /// Rescaled time per unit of Moran time, N^(1-beta).
    double time_scale() const;
    /// (N/2)(N + thetaA + thetaB + rho).
    double total_rate() const;
};

void validate_moran(const MoranParams& p);

struct MoranState {
    CountMatrix Z;
    int N = 0;
    /// Moran time tau.
    double clock = 0.0;
};

/// Marginal frequencies and LD coefficients at rescaled time t.
struct MProjection {
    double t = 0.0;
    Eigen::VectorXd X;
    Eigen::VectorXd Y;
    Eigen::MatrixXd D;

    static MProjection of(const MoranState& s, double t);
};

enum class MoranEvent { Reproduction, MutationA, MutationB, Recombination };

const char* event_name(MoranEvent e);

struct StepResult {
    MoranEvent event;
    double wait;
};

/// Applies one event chosen by competing exponentials over the four classes.
StepResult step(MoranState& state, const MoranParams& p, Rng& rng);

/// Applies one event of a given class without advancing the clock.
void apply_event(MoranState& state, MoranEvent e, const MoranParams& p, Rng& rng);

/// Draws the class of the next event.
MoranEvent draw_event(const MoranParams& p, Rng& rng);

using Trajectory = std::vector<MProjection>;

/// Trajectory on the grid 0, dt, 2 dt, ... <= horizon (rescaled time). The event
/// total rate is constant, so each grid interval receives a Poisson number of
/// events; this is the same law as stepping through exponential waits.
Trajectory run(const MoranParams& p, const CountMatrix& init, double horizon, double dt, Rng& rng);

/// Independent trajectories on streams (seed, k).
std::vector<Trajectory> run_ensemble(const MoranParams& p, const CountMatrix& init, double horizon, double dt,
                                     std::size_t count, std::uint64_t seed, int threads = 1);

constexpr std::size_t kMinEnsemble = 200;

struct LlnReport {
    std::size_t trajectories = 0;
    int cell_i = 0;
    int cell_j = 0;
    double fitted_rate = 0.0;
    double expected_rate = 0.0;
    /// max over grid times and cells of |mean D(t) - D(0) exp(-rho_beta t / 2)|
    double max_abs_deviation = 0.0;
    /// ensemble mean of sup_{s <= t} max |M^N(s) - M(s)|
    double mean_sup_deviation = 0.0;
};

/// Fits the decay of the mean LD of the cell with the largest |D(0)|.
LlnReport check_lln(const std::vector<Trajectory>& ensemble, const MoranParams& p);

struct FluctuationReport {
    std::size_t trajectories = 0;
    double time = 0.0;
    /// U = N^{(1-beta)/2}(D - D(0) exp(-rho_beta t / 2)) at the last grid time
    Eigen::MatrixXd covariance;  // KL x KL, row-major cell order
    Eigen::MatrixXd target;      // s_inf / rho_beta at X(0), Y(0)
    Eigen::VectorXd mean;
    Eigen::VectorXd mean_se;
    double var_u11 = 0.0;
    double target_u11 = 0.0;
    double var_u11_se = 0.0;
    double jarque_bera = 0.0;
    double jarque_bera_p = 0.0;
};

FluctuationReport check_fluctuations(const std::vector<Trajectory>& ensemble, const MoranParams& p);

}  // namespace twoloc
