#pragma once

#include <Eigen/Sparse>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "twoloc/model.hpp"

namespace twoloc {

struct ExactOptions {
    std::size_t state_cap = 5'000'000;
    /// Blocks up to this many states are solved by dense LU.
    int dense_limit = 64;
    /// Per-state relative change that ends a Gauss-Seidel solve.
    double tolerance = 1e-15;
    int max_sweeps = 20000;
    /// Largest admissible relative row residual.
    double residual_limit = 1e-9;
};

/// Exact ordered sampling probabilities of the two-locus model with
/// parent-independent mutation.
///
/// Under PIM a mutation makes the mutated allele a fresh draw from the weight
/// vector, so the lineage's type at that locus is integrated out and the
/// lineage stops carrying the locus. States therefore only lose material,
/// except through recombination and A/B cross coalescence, which preserve
/// the marginal counts x = a + c_A and y = b + c_B. The solver keeps one block
/// of states per (x, y), solves blocks bottom-up and memoizes them, so many
/// roots under the same parameters share work.
class ExactSolver {
public:
    explicit ExactSolver(ModelParams p, ExactOptions opt = {});

    double q(const SampleConfig& cfg);

    const ModelParams& params() const { return p_; }
    std::size_t state_count() const { return states_; }
    std::size_t block_count() const { return blocks_.size(); }
    /// Largest relative row residual seen over all solved blocks.
    double max_residual() const { return max_residual_; }
    long total_sweeps() const { return sweeps_; }

private:
    struct Block {
        std::vector<std::uint64_t> keys;
        std::vector<double> values;
    };

    const Block& block(const Counts& x, const Counts& y);
    Block solve_block(const Counts& x, const Counts& y);
    double lookup(const Counts& x, const Counts& y, const CountMatrix& c);

    std::uint64_t block_key(const Counts& x, const Counts& y) const;
    std::uint64_t state_key(const CountMatrix& c) const;

    ModelParams p_;
    ExactOptions opt_;
    std::unordered_map<std::uint64_t, Block> blocks_;
    std::size_t states_ = 0;
    double max_residual_ = 0.0;
    long sweeps_ = 0;
};

double q_exact(const SampleConfig& cfg, const ModelParams& p, const ExactOptions& opt = {});

/// Closure of root under the full recursion's transitions: coalescence,
/// mutation relabelling, recombination and A/B cross coalescence.
std::vector<SampleConfig> reachable_states(const SampleConfig& root, const ModelParams& p,
                                           std::size_t cap = 5'000'000);

/// The recursion written with explicit allele relabelling on mutation, one
/// equation per reachable state. Valid for any mutation matrices; single
/// lineage states take the stationary law of the mutation chain.
struct RecursionSystem {
    std::vector<SampleConfig> states;
    std::map<std::vector<int>, int> index;
    Eigen::SparseMatrix<double, Eigen::RowMajor> A;
    Eigen::VectorXd rhs;
    double residual = 0.0;
    int iterations = 0;

    static RecursionSystem build(const SampleConfig& root, const ModelParams& p, std::size_t cap = 5'000'000);
    /// Gauss-Seidel, with SparseLU when it stalls.
    Eigen::VectorXd solve(double tolerance = 1e-14, int max_sweeps = 100000);
    double value(const Eigen::VectorXd& q, const SampleConfig& cfg) const;
};

std::vector<int> flatten(const SampleConfig& cfg);

/// Stationary distribution of a row-stochastic matrix.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

/// |approx - exact| / exact * 100.
double relative_error(double approx, double exact);

/// Flat binary cache of solved roots, keyed by (params hash, counts).
class ExactCache {
public:
    explicit ExactCache(std::string path);

    std::optional<double> find(std::uint64_t params_hash, const SampleConfig& cfg) const;
    void store(std::uint64_t params_hash, const SampleConfig& cfg, double q);
    std::size_t size() const { return entries_.size(); }

    static std::uint64_t hash_params(const ModelParams& p);

private:
    std::string path_;
    std::map<std::pair<std::uint64_t, std::vector<std::uint16_t>>, double> entries_;
};

}  // namespace twoloc
