#include "twoloc/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "twoloc/io.hpp"

namespace twoloc {

namespace {

constexpr int kBits = 6;
constexpr int kMaxCount = (1 << kBits) - 1;

void enumerate_block(const Counts& x, const Counts& y, int pos, Counts& rowrem, Counts& colrem, CountMatrix& c,
                     std::vector<CountMatrix>& out) {
    const int K = static_cast<int>(x.size());
    const int L = static_cast<int>(y.size());
    if (pos == K * L) {
        out.push_back(c);
        return;
    }
    const int i = pos / L;
    const int j = pos % L;
    const int hi = std::min(rowrem[i], colrem[j]);
    for (int v = 0; v <= hi; ++v) {
        c(i, j) = v;
        rowrem[i] -= v;
        colrem[j] -= v;
        enumerate_block(x, y, pos + 1, rowrem, colrem, c, out);
        rowrem[i] += v;
        colrem[j] += v;
    }
    c(i, j) = 0;
}

Counts unit(int size, int k) {
    Counts e = Counts::Zero(size);
    e[k] = 1;
    return e;
}

}  // namespace

ExactSolver::ExactSolver(ModelParams p, ExactOptions opt) : p_(std::move(p)), opt_(opt) {
    validate_params(p_);
    if (!p_.pim) throw Error(ErrorCode::UnsupportedMutationModel, "the exact solver needs PIM mutation");
    if ((p_.K + p_.L) * kBits > 64 || p_.K * p_.L * kBits > 64)
        throw Error(ErrorCode::StateCap, "too many alleles for the packed state index");
}

std::uint64_t ExactSolver::block_key(const Counts& x, const Counts& y) const {
    std::uint64_t key = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) key = (key << kBits) | static_cast<std::uint64_t>(x[i]);
    for (Eigen::Index j = 0; j < y.size(); ++j) key = (key << kBits) | static_cast<std::uint64_t>(y[j]);
    return key;
}

std::uint64_t ExactSolver::state_key(const CountMatrix& c) const {
    std::uint64_t key = 0;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = 0; j < c.cols(); ++j) key = (key << kBits) | static_cast<std::uint64_t>(c(i, j));
    return key;
}

double ExactSolver::q(const SampleConfig& cfg) {
    validate_config(cfg, p_);
    if (cfg.a.maxCoeff() > kMaxCount || cfg.b.maxCoeff() > kMaxCount || cfg.marginalA().maxCoeff() > kMaxCount ||
        cfg.marginalB().maxCoeff() > kMaxCount)
        throw Error(ErrorCode::StateCap, "allele counts above 63 are not supported");
    return lookup(cfg.marginalA(), cfg.marginalB(), cfg.c);
}

double ExactSolver::lookup(const Counts& x, const Counts& y, const CountMatrix& c) {
    const Block& blk = block(x, y);
    const auto key = state_key(c);
    const auto it = std::lower_bound(blk.keys.begin(), blk.keys.end(), key);
    if (it == blk.keys.end() || *it != key) throw Error(ErrorCode::InvalidConfig, "state outside its block");
    return blk.values[static_cast<std::size_t>(it - blk.keys.begin())];
}

const ExactSolver::Block& ExactSolver::block(const Counts& x, const Counts& y) {
    const auto key = block_key(x, y);
    auto it = blocks_.find(key);
    if (it != blocks_.end()) return it->second;
    Block solved = solve_block(x, y);
    return blocks_.emplace(key, std::move(solved)).first->second;
}

ExactSolver::Block ExactSolver::solve_block(const Counts& x, const Counts& y) {
    const int K = p_.K;
    const int L = p_.L;
    std::vector<CountMatrix> cs;
    {
        Counts rowrem = x;
        Counts colrem = y;
        CountMatrix c = CountMatrix::Zero(K, L);
        enumerate_block(x, y, 0, rowrem, colrem, c, cs);
    }
    const std::size_t n = cs.size();
    if (states_ + n > opt_.state_cap)
        throw Error(ErrorCode::StateCap, "exact solver state cap of " + std::to_string(opt_.state_cap) +
                                             " exceeded; use a smaller sample or raise the cap");

    std::vector<std::size_t> by_key(n);
    std::iota(by_key.begin(), by_key.end(), 0);
    std::vector<std::uint64_t> raw_keys(n);
    for (std::size_t s = 0; s < n; ++s) raw_keys[s] = state_key(cs[s]);
    std::sort(by_key.begin(), by_key.end(), [&](std::size_t u, std::size_t v) { return raw_keys[u] < raw_keys[v]; });

    Block out;
    out.keys.resize(n);
    out.values.assign(n, 0.0);
    std::vector<CountMatrix> sorted(n);
    for (std::size_t s = 0; s < n; ++s) {
        out.keys[s] = raw_keys[by_key[s]];
        sorted[s] = cs[by_key[s]];
    }
    states_ += n;

    const int nA = x.sum();
    const int nB = y.sum();
    const Eigen::VectorXd wA = p_.weights(Locus::A);
    const Eigen::VectorXd wB = p_.weights(Locus::B);

    if (nA <= 1 && nB <= 1) {
        double v = 1.0;
        for (int i = 0; i < K; ++i)
            if (x[i] == 1) v *= wA[i];
        for (int j = 0; j < L; ++j)
            if (y[j] == 1) v *= wB[j];
        std::fill(out.values.begin(), out.values.end(), v);
        return out;
    }

    // Blocks one step below; fetching them may recurse and solve further blocks.
    std::vector<const Block*> downA(K, nullptr), downB(L, nullptr), downAB(K * L, nullptr);
    std::vector<Counts> xA(K), yB(L);
    for (int i = 0; i < K; ++i) {
        xA[i] = x - unit(K, i);
        if (x[i] > 0) downA[i] = &block(xA[i], y);
    }
    for (int j = 0; j < L; ++j) {
        yB[j] = y - unit(L, j);
        if (y[j] > 0) downB[j] = &block(x, yB[j]);
    }
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < L; ++j)
            if (x[i] > 0 && y[j] > 0) downAB[i * L + j] = &block(xA[i], yB[j]);

    auto find_in = [&](const Block& blk, const CountMatrix& c) {
        const auto key = state_key(c);
        const auto it = std::lower_bound(blk.keys.begin(), blk.keys.end(), key);
        if (it == blk.keys.end() || *it != key) throw Error(ErrorCode::InvalidConfig, "state outside its block");
        return static_cast<std::size_t>(it - blk.keys.begin());
    };

    const double rho = p_.rho;
    const double hA = 0.5 * p_.thetaA;
    const double hB = 0.5 * p_.thetaB;

    std::vector<double> diag(n), rhs(n);
    std::vector<std::size_t> row_start(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> coefs;
    cols.reserve(n * static_cast<std::size_t>(2 * K * L));
    coefs.reserve(n * static_cast<std::size_t>(2 * K * L));

    for (std::size_t s = 0; s < n; ++s) {
        CountMatrix c = sorted[s];
        const Counts cA = c.rowwise().sum();
        const Counts cB = c.colwise().sum().transpose();
        const Counts a = x - cA;
        const Counts b = y - cB;
        const int at = a.sum(), bt = b.sum(), ct = c.sum();
        const int m = at + bt + ct;
        diag[s] = binom2(m) + 0.5 * rho * ct + hA * nA + hB * nB;

        double acc = 0.0;
        for (int i = 0; i < K; ++i) {
            if (a[i] == 0) continue;
            const double w = binom2(a[i]) + a[i] * cA[i] + hA * a[i] * wA[i];
            if (w != 0.0) acc += w * downA[i]->values[find_in(*downA[i], c)];
        }
        for (int j = 0; j < L; ++j) {
            if (b[j] == 0) continue;
            const double w = binom2(b[j]) + b[j] * cB[j] + hB * b[j] * wB[j];
            if (w != 0.0) acc += w * downB[j]->values[find_in(*downB[j], c)];
        }
        for (int i = 0; i < K; ++i) {
            for (int j = 0; j < L; ++j) {
                if (c(i, j) == 0) continue;
                --c(i, j);
                if (c(i, j) >= 1)
                    acc += binom2(c(i, j) + 1) * downAB[i * L + j]->values[find_in(*downAB[i * L + j], c)];
                if (wA[i] != 0.0 && hA != 0.0) acc += hA * (c(i, j) + 1) * wA[i] * downA[i]->values[find_in(*downA[i], c)];
                if (wB[j] != 0.0 && hB != 0.0) acc += hB * (c(i, j) + 1) * wB[j] * downB[j]->values[find_in(*downB[j], c)];
                ++c(i, j);
            }
        }
        rhs[s] = acc;

        // within-block couplings: A/B cross coalescence and recombination
        for (int i = 0; i < K; ++i) {
            for (int j = 0; j < L; ++j) {
                if (a[i] > 0 && b[j] > 0) {
                    ++c(i, j);
                    cols.push_back(find_in(out, c));
                    coefs.push_back(static_cast<double>(a[i]) * b[j]);
                    --c(i, j);
                }
                if (c(i, j) > 0) {
                    --c(i, j);
                    cols.push_back(find_in(out, c));
                    coefs.push_back(0.5 * rho * (c(i, j) + 1));
                    ++c(i, j);
                }
            }
        }
        row_start[s + 1] = cols.size();
    }

    std::vector<double>& q = out.values;
    bool solved = false;
    if (static_cast<int>(n) <= opt_.dense_limit) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        Eigen::VectorXd r(static_cast<Eigen::Index>(n));
        for (std::size_t s = 0; s < n; ++s) {
            M(s, s) += diag[s];
            r[s] = rhs[s];
            for (std::size_t k = row_start[s]; k < row_start[s + 1]; ++k) M(s, cols[k]) -= coefs[k];
        }
        const Eigen::VectorXd sol = M.partialPivLu().solve(r);
        for (std::size_t s = 0; s < n; ++s) q[s] = sol[s];
        solved = true;
    } else {
        // Gauss-Seidel swept in increasing total of c: recombination couplings
        // point to smaller totals and are already current within a sweep.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::vector<int> tot(n);
        for (std::size_t s = 0; s < n; ++s) tot[s] = sorted[s].sum();
        std::stable_sort(order.begin(), order.end(), [&](std::size_t u, std::size_t v) { return tot[u] < tot[v]; });
        for (std::size_t s = 0; s < n; ++s) q[s] = rhs[s] / diag[s];
        for (int sweep = 0; sweep < opt_.max_sweeps; ++sweep) {
            double change = 0.0;
            for (std::size_t s : order) {
                double acc = rhs[s];
                for (std::size_t k = row_start[s]; k < row_start[s + 1]; ++k) acc += coefs[k] * q[cols[k]];
                const double v = acc / diag[s];
                const double scale = std::max(std::abs(v), 1e-300);
                change = std::max(change, std::abs(v - q[s]) / scale);
                q[s] = v;
            }
            ++sweeps_;
            if (change <= opt_.tolerance) {
                solved = true;
                break;
            }
        }
        if (!solved) {
            using SpMat = Eigen::SparseMatrix<double>;
            std::vector<Eigen::Triplet<double>> trips;
            Eigen::VectorXd r(static_cast<Eigen::Index>(n));
            for (std::size_t s = 0; s < n; ++s) {
                trips.emplace_back(s, s, diag[s]);
                r[s] = rhs[s];
                for (std::size_t k = row_start[s]; k < row_start[s + 1]; ++k) trips.emplace_back(s, cols[k], -coefs[k]);
            }
            SpMat M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            M.setFromTriplets(trips.begin(), trips.end());
            Eigen::SparseLU<SpMat> lu;
            lu.compute(M);
            if (lu.info() == Eigen::Success) {
                const Eigen::VectorXd sol = lu.solve(r);
                for (std::size_t s = 0; s < n; ++s) q[s] = sol[s];
                solved = true;
            }
        }
    }

    double worst = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double acc = rhs[s];
        for (std::size_t k = row_start[s]; k < row_start[s + 1]; ++k) acc += coefs[k] * q[cols[k]];
        const double res = std::abs(diag[s] * q[s] - acc) / std::max(diag[s] * std::abs(q[s]), 1e-300);
        worst = std::max(worst, res);
    }
    max_residual_ = std::max(max_residual_, worst);
    if (!solved || !(worst <= opt_.residual_limit))
        throw Error(ErrorCode::SolverDivergence, "block solve residual " + std::to_string(worst));
    return out;
}

double q_exact(const SampleConfig& cfg, const ModelParams& p, const ExactOptions& opt) {
    ExactSolver solver(p, opt);
    return solver.q(cfg);
}

std::vector<int> flatten(const SampleConfig& cfg) {
    std::vector<int> key;
    key.reserve(static_cast<std::size_t>(cfg.a.size() + cfg.b.size() + cfg.c.size()));
    for (Eigen::Index i = 0; i < cfg.a.size(); ++i) key.push_back(cfg.a[i]);
    for (Eigen::Index j = 0; j < cfg.b.size(); ++j) key.push_back(cfg.b[j]);
    for (Eigen::Index i = 0; i < cfg.c.rows(); ++i)
        for (Eigen::Index j = 0; j < cfg.c.cols(); ++j) key.push_back(cfg.c(i, j));
    return key;
}

namespace {

struct Transition {
    SampleConfig to;
    double rate;
};

/// Backward events out of a state in relabelling form.
std::vector<Transition> transitions(const SampleConfig& s, const ModelParams& p) {
    std::vector<Transition> out;
    const int K = s.K(), L = s.L();
    const Counts cA = s.cA(), cB = s.cB();
    const double hA = 0.5 * p.thetaA, hB = 0.5 * p.thetaB;
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < L; ++j) {
            const int cij = s.c(i, j);
            if (cij >= 2) {
                SampleConfig t = s;
                --t.c(i, j);
                out.push_back({t, binom2(cij)});
            }
            if (cij >= 1) {
                SampleConfig t = s;
                --t.c(i, j);
                ++t.a[i];
                ++t.b[j];
                out.push_back({t, 0.5 * p.rho * cij});
                for (int k = 0; k < K; ++k) {
                    if (p.PA(k, i) == 0.0 || hA == 0.0) continue;
                    SampleConfig u = s;
                    --u.c(i, j);
                    ++u.c(k, j);
                    out.push_back({u, hA * cij * p.PA(k, i)});
                }
                for (int l = 0; l < L; ++l) {
                    if (p.PB(l, j) == 0.0 || hB == 0.0) continue;
                    SampleConfig u = s;
                    --u.c(i, j);
                    ++u.c(i, l);
                    out.push_back({u, hB * cij * p.PB(l, j)});
                }
            }
            if (s.a[i] >= 1 && s.b[j] >= 1) {
                SampleConfig t = s;
                --t.a[i];
                --t.b[j];
                ++t.c(i, j);
                out.push_back({t, static_cast<double>(s.a[i]) * s.b[j]});
            }
        }
    }
    for (int i = 0; i < K; ++i) {
        if (s.a[i] == 0) continue;
        const double w = binom2(s.a[i]) + s.a[i] * cA[i];
        if (w > 0) {
            SampleConfig t = s;
            --t.a[i];
            out.push_back({t, w});
        }
        for (int k = 0; k < K; ++k) {
            if (p.PA(k, i) == 0.0 || hA == 0.0) continue;
            SampleConfig u = s;
            --u.a[i];
            ++u.a[k];
            out.push_back({u, hA * s.a[i] * p.PA(k, i)});
        }
    }
    for (int j = 0; j < L; ++j) {
        if (s.b[j] == 0) continue;
        const double w = binom2(s.b[j]) + s.b[j] * cB[j];
        if (w > 0) {
            SampleConfig t = s;
            --t.b[j];
            out.push_back({t, w});
        }
        for (int l = 0; l < L; ++l) {
            if (p.PB(l, j) == 0.0 || hB == 0.0) continue;
            SampleConfig u = s;
            --u.b[j];
            ++u.b[l];
            out.push_back({u, hB * s.b[j] * p.PB(l, j)});
        }
    }
    return out;
}

bool single_lineage(const SampleConfig& s) {
    return s.a_total() + s.c_total() <= 1 && s.b_total() + s.c_total() <= 1;
}

}  // namespace

std::vector<SampleConfig> reachable_states(const SampleConfig& root, const ModelParams& p, std::size_t cap) {
    validate_config(root, p);
    std::map<std::vector<int>, SampleConfig> seen;
    std::vector<SampleConfig> stack{root};
    seen.emplace(flatten(root), root);
    while (!stack.empty()) {
        const SampleConfig s = stack.back();
        stack.pop_back();
        for (const auto& tr : transitions(s, p)) {
            auto key = flatten(tr.to);
            if (seen.count(key)) continue;
            if (seen.size() >= cap)
                throw Error(ErrorCode::StateCap, "reachable state cap of " + std::to_string(cap) + " exceeded");
            seen.emplace(std::move(key), tr.to);
            stack.push_back(tr.to);
        }
    }
    std::vector<SampleConfig> out;
    out.reserve(seen.size());
    for (auto& [key, cfg] : seen) out.push_back(cfg);
    return out;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
    const auto K = P.rows();
    Eigen::MatrixXd M = P.transpose() - Eigen::MatrixXd::Identity(K, K);
    M.row(K - 1).setOnes();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(K);
    e[K - 1] = 1.0;
    return M.fullPivLu().solve(e);
}

RecursionSystem RecursionSystem::build(const SampleConfig& root, const ModelParams& p, std::size_t cap) {
    validate_params(p);
    RecursionSystem sys;
    sys.states = reachable_states(root, p, cap);
    for (std::size_t s = 0; s < sys.states.size(); ++s) sys.index.emplace(flatten(sys.states[s]), static_cast<int>(s));

    const Eigen::VectorXd piA = stationary_distribution(p.PA);
    const Eigen::VectorXd piB = stationary_distribution(p.PB);
    const auto n = static_cast<Eigen::Index>(sys.states.size());
    std::vector<Eigen::Triplet<double>> trips;
    sys.rhs = Eigen::VectorXd::Zero(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const SampleConfig& st = sys.states[static_cast<std::size_t>(s)];
        if (single_lineage(st)) {
            double v = 1.0;
            for (int i = 0; i < st.K(); ++i)
                if (st.a[i] + st.cA()[i] == 1) v *= piA[i];
            for (int j = 0; j < st.L(); ++j)
                if (st.b[j] + st.cB()[j] == 1) v *= piB[j];
            trips.emplace_back(s, s, 1.0);
            sys.rhs[s] = v;
            continue;
        }
        const int nA = st.a_total() + st.c_total();
        const int nB = st.b_total() + st.c_total();
        const double R = binom2(st.n()) + 0.5 * p.rho * st.c_total() + 0.5 * p.thetaA * nA + 0.5 * p.thetaB * nB;
        trips.emplace_back(s, s, R);
        for (const auto& tr : transitions(st, p)) trips.emplace_back(s, sys.index.at(flatten(tr.to)), -tr.rate);
    }
    sys.A.resize(n, n);
    sys.A.setFromTriplets(trips.begin(), trips.end());
    sys.A.makeCompressed();
    return sys;
}

Eigen::VectorXd RecursionSystem::solve(double tolerance, int max_sweeps) {
    const auto n = A.rows();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    bool converged = false;
    for (iterations = 0; iterations < max_sweeps; ++iterations) {
        double change = 0.0;
        for (Eigen::Index s = 0; s < n; ++s) {
            double acc = rhs[s];
            double d = 0.0;
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, s); it; ++it) {
                if (it.col() == s)
                    d += it.value();
                else
                    acc -= it.value() * q[it.col()];
            }
            const double v = acc / d;
            change = std::max(change, std::abs(v - q[s]) / std::max(std::abs(v), 1e-300));
            q[s] = v;
        }
        if (change <= tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        Eigen::SparseMatrix<double> M = A;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(M);
        if (lu.info() != Eigen::Success) throw Error(ErrorCode::SolverDivergence, "SparseLU failed");
        q = lu.solve(rhs);
    }
    const Eigen::VectorXd r = A * q - rhs;
    residual = r.cwiseAbs().maxCoeff();
    if (!(residual <= 1e-9)) throw Error(ErrorCode::SolverDivergence, "recursion residual " + std::to_string(residual));
    return q;
}

double RecursionSystem::value(const Eigen::VectorXd& q, const SampleConfig& cfg) const {
    const auto it = index.find(flatten(cfg));
    if (it == index.end()) throw Error(ErrorCode::InvalidConfig, "configuration not in the system");
    return q[it->second];
}

double relative_error(double approx, double exact) {
    if (exact == 0.0) throw Error(ErrorCode::ZeroExact, "relative error against an exact value of zero");
    return std::abs(approx - exact) / std::abs(exact) * 100.0;
}

ExactCache::ExactCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    while (true) {
        std::uint64_t h = 0;
        std::uint16_t count = 0;
        if (!in.read(reinterpret_cast<char*>(&h), sizeof h)) break;
        if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) break;
        std::vector<std::uint16_t> counts(count);
        double q = 0.0;
        if (!in.read(reinterpret_cast<char*>(counts.data()), static_cast<std::streamsize>(count * sizeof(std::uint16_t))))
            break;
        if (!in.read(reinterpret_cast<char*>(&q), sizeof q)) break;
        entries_[{h, std::move(counts)}] = q;
    }
}

std::optional<double> ExactCache::find(std::uint64_t params_hash, const SampleConfig& cfg) const {
    const auto flat = flatten(cfg);
    std::vector<std::uint16_t> counts(flat.begin(), flat.end());
    const auto it = entries_.find({params_hash, counts});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ExactCache::store(std::uint64_t params_hash, const SampleConfig& cfg, double q) {
    const auto flat = flatten(cfg);
    std::vector<std::uint16_t> counts(flat.begin(), flat.end());
    if (!entries_.emplace(std::make_pair(params_hash, counts), q).second) return;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot write cache " + path_);
    const auto count = static_cast<std::uint16_t>(counts.size());
    out.write(reinterpret_cast<const char*>(&params_hash), sizeof params_hash);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(counts.data()), static_cast<std::streamsize>(count * sizeof(std::uint16_t)));
    out.write(reinterpret_cast<const char*>(&q), sizeof q);
}

std::uint64_t ExactCache::hash_params(const ModelParams& p) { return fnv1a(params_to_json(p).dump()); }

}  // namespace twoloc
