#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "twoloc/asymptotics.hpp"
#include "twoloc/coalescent.hpp"
#include "twoloc/gaussian.hpp"
#include "twoloc/io.hpp"
#include "twoloc/model.hpp"
#include "twoloc/moran.hpp"
#include "twoloc/oracle.hpp"

namespace twoloc {

/// All configurations of total size n (a, b and c together) over K x L alleles.
std::vector<SampleConfig> enumerate_configs(int n, int K, int L);
/// a = b = 0, |c| = n, K = L = 2, both alleles present at both loci.
std::vector<SampleConfig> enumerate_dimorphic(int n);

/// "%.17g"; round-trips every double.
std::string format_double(double x);

/// Staircase Pade value of the table at rho, with the partial sum as fallback.
struct Approximant {
    double value = 0.0;
    bool fallback = false;
};
Approximant approximant(const SeriesTable& t, double rho, PadeOrder order = PadeOrder::NumeratorFirst);

/// Exact values with an optional on-disk cache.
class ExactSource {
public:
    ExactSource(ExactOptions opt, std::string cache_dir);
    double q(const SampleConfig& cfg, const ModelParams& p);
    std::size_t states() const { return states_; }

private:
    ExactOptions opt_;
    std::optional<ExactCache> cache_;
    std::uint64_t hash_ = 0;
    std::optional<ExactSolver> solver_;
    std::size_t states_ = 0;
};

struct QOptions {
    std::vector<double> rhos;
    std::vector<int> lambdas;
    bool clamp = true;
    bool exact = false;
    PadeOrder order = PadeOrder::NumeratorFirst;
};

/// CSV with one row per (config, rho); see FORMATS.md.
void write_q_csv(std::ostream& os, const std::vector<SampleConfig>& configs, const ModelParams& p,
                 const QOptions& opt, ExactSource& exact);

struct Table1Row {
    double rho = 0.0;
    int lambda = 0;
    std::string method;
    std::size_t configs = 0;
    /// Phi weighted by the exact probability of each sample (orderings * q).
    double phi1 = 0.0;
    double phi10 = 0.0;
    double phi100 = 0.0;
    /// Unweighted numbers of configurations below each threshold.
    std::size_t count1 = 0;
    std::size_t count10 = 0;
    std::size_t count100 = 0;
    std::size_t fallbacks = 0;
};

struct Table1Error {
    std::string config;
    double rho = 0.0;
    int lambda = 0;
    std::string method;
    double approx = 0.0;
    double exact = 0.0;
    double error = 0.0;
    bool fallback = false;
};

struct Table1Report {
    std::vector<Table1Row> rows;
    std::vector<Table1Error> errors;
    std::size_t states = 0;

    const Table1Row* find(double rho, int lambda, const std::string& method) const;
};

/// Relative errors of the truncated approximants over all dimorphic samples of
/// size n. The true series is available for lambda <= 1 only.
Table1Report run_table1(const ModelParams& p, int n, const std::vector<double>& rhos,
                        const std::vector<int>& lambdas, const ExactOptions& opt, const std::string& cache_dir = {},
                        PadeOrder order = PadeOrder::DenominatorFirst);

void write_table1_csv(std::ostream& os, const Table1Report& r);
void write_table1_errors_csv(std::ostream& os, const Table1Report& r);

/// Gaussian draws as CSV rows X.., Y.., D.., H.., accepted_after.
void write_gaussian_csv(std::ostream& os, const ModelParams& p, SampleMode mode, long draws, std::uint64_t seed,
                        int threads);

/// Moran trajectories as CSV rows traj, t, X.., Y.., D...
void write_moran_csv(std::ostream& os, const MoranParams& p, const CountMatrix& init, double horizon, double dt,
                     long count, std::uint64_t seed, int threads);

Json moran_report_json(const MoranParams& p, const CountMatrix& init, double horizon, double dt, long count,
                       std::uint64_t seed, int threads);

Json coupling_report_json(const AncState& init, double rho, long reps, std::uint64_t seed, int threads);

/// Event logs of `reps` replicates of process 'C', 'D' or coupled ('B').
void write_event_log(std::ostream& os, const AncState& init, double rho, char process, long reps, std::uint64_t seed);

/// CSV row: config, model, rho, reps, estimate, se.
void write_estimate_csv(std::ostream& os, const std::vector<SampleConfig>& configs, const ModelParams& p,
                        GenealogyModel m, long reps, std::uint64_t seed, int threads);

/// Single-line JSON error record.
std::string error_json(const std::string& name, const std::string& family, const std::string& message);
std::string family_name(ErrorFamily f);

}  // namespace twoloc
