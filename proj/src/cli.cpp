#include "twoloc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "twoloc/asymptotics.hpp"
#include "twoloc/gaussian.hpp"
#include "twoloc/parallel.hpp"

namespace twoloc {

namespace {

/// Compositions of n into `parts` nonnegative integers, in lexicographic order.
void compositions(int n, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == parts - 1) {
        cur.push_back(n);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int k = 0; k <= n; ++k) {
        cur.push_back(k);
        compositions(n - k, parts, cur, out);
        cur.pop_back();
    }
}

std::vector<std::vector<int>> compositions(int n, int parts) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    if (parts == 0) {
        if (n == 0) out.emplace_back();
        return out;
    }
    compositions(n, parts, cur, out);
    return out;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

double clamp01(double x, bool on) { return on ? std::clamp(x, 0.0, 1.0) : x; }

}  // namespace

std::vector<SampleConfig> enumerate_configs(int n, int K, int L) {
    if (n < 0 || K < 1 || L < 1) throw Error(ErrorCode::InvalidArgument, "enumerate_configs: bad size");
    std::vector<SampleConfig> out;
    for (int na = 0; na <= n; ++na)
        for (int nb = 0; na + nb <= n; ++nb) {
            const int nc = n - na - nb;
            for (const auto& va : compositions(na, K))
                for (const auto& vb : compositions(nb, L))
                    for (const auto& vc : compositions(nc, K * L)) {
                        SampleConfig cfg = SampleConfig::zeros(K, L);
                        for (int i = 0; i < K; ++i) cfg.a[i] = va[static_cast<std::size_t>(i)];
                        for (int j = 0; j < L; ++j) cfg.b[j] = vb[static_cast<std::size_t>(j)];
                        for (int i = 0; i < K; ++i)
                            for (int j = 0; j < L; ++j) cfg.c(i, j) = vc[static_cast<std::size_t>(i * L + j)];
                        out.push_back(std::move(cfg));
                    }
        }
    return out;
}

std::vector<SampleConfig> enumerate_dimorphic(int n) {
    std::vector<SampleConfig> out;
    for (const auto& vc : compositions(n, 4)) {
        SampleConfig cfg = SampleConfig::zeros(2, 2);
        cfg.c << vc[0], vc[1], vc[2], vc[3];
        if ((cfg.cA().array() > 0).all() && (cfg.cB().array() > 0).all()) out.push_back(std::move(cfg));
    }
    return out;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Approximant approximant(const SeriesTable& t, double rho, PadeOrder order) {
    try {
        return {pade_staircase(t, rho, order), false};
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularPade) throw;
        return {series_partial_sum(t, rho), true};
    }
}

ExactSource::ExactSource(ExactOptions opt, std::string cache_dir) : opt_(opt) {
    if (!cache_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cache_dir, ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create cache directory " + cache_dir);
        cache_.emplace((std::filesystem::path(cache_dir) / "exact.bin").string());
    }
}

double ExactSource::q(const SampleConfig& cfg, const ModelParams& p) {
    const std::uint64_t h = ExactCache::hash_params(p);
    if (cache_) {
        if (auto hit = cache_->find(h, cfg)) return *hit;
    }
    if (!solver_ || h != hash_) {
        solver_.emplace(p, opt_);
        hash_ = h;
    }
    const double q = solver_->q(cfg);
    states_ = std::max(states_, solver_->state_count());
    if (cache_) cache_->store(h, cfg, q);
    return q;
}

void write_q_csv(std::ostream& os, const std::vector<SampleConfig>& configs, const ModelParams& p,
                 const QOptions& opt, ExactSource& exact) {
    validate_params(p);
    os << "config,rho,q0,q1,true_1";
    for (int l : opt.lambdas) os << ",gauss_partial_" << l << ",gauss_pade_" << l << ",pade_fallback_" << l;
    if (opt.exact) os << ",q_exact";
    os << '\n';
    int lmax = 0;
    for (int l : opt.lambdas) lmax = std::max(lmax, l);
    for (const auto& cfg : configs) {
        validate_config(cfg, p);
        const SeriesTable first = first_order_series(cfg, p);
        const SeriesTable gs = opt.lambdas.empty() ? SeriesTable{} : gauss_series(cfg, p, lmax);
        for (double rho : opt.rhos) {
            ModelParams pr = p;
            pr.rho = rho;
            validate_params(pr);
            os << quoted(cfg.label()) << ',' << format_double(rho) << ',' << format_double(first.coeffs[0]) << ','
               << format_double(first.coeffs[1]) << ',' << format_double(clamp01(series_partial_sum(first, rho), opt.clamp));
            for (int l : opt.lambdas) {
                const SeriesTable t = gs.truncated(std::min(l, gs.order()));
                const Approximant a = approximant(t, rho, opt.order);
                os << ',' << format_double(clamp01(series_partial_sum(t, rho), opt.clamp)) << ','
                   << format_double(clamp01(a.value, opt.clamp)) << ',' << (a.fallback ? 1 : 0);
            }
            if (opt.exact) os << ',' << format_double(exact.q(cfg, pr));
            os << '\n';
        }
    }
}

const Table1Row* Table1Report::find(double rho, int lambda, const std::string& method) const {
    for (const auto& r : rows)
        if (r.rho == rho && r.lambda == lambda && r.method == method) return &r;
    return nullptr;
}

Table1Report run_table1(const ModelParams& p, int n, const std::vector<double>& rhos, const std::vector<int>& lambdas,
                        const ExactOptions& opt, const std::string& cache_dir, PadeOrder order) {
    if (p.K != 2 || p.L != 2) throw Error(ErrorCode::InvalidArgument, "table1 needs K = L = 2");
    validate_params(p);
    const std::vector<SampleConfig> configs = enumerate_dimorphic(n);
    if (configs.empty()) throw Error(ErrorCode::InvalidArgument, "no dimorphic samples of this size");
    int lmax = 0;
    for (int l : lambdas) {
        if (l < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
        lmax = std::max(lmax, l);
    }

    std::vector<SeriesTable> gauss, truth;
    for (const auto& cfg : configs) {
        gauss.push_back(gauss_series(cfg, p, lmax));
        truth.push_back(first_order_series(cfg, p));
    }

    Table1Report report;
    ExactSource exact(opt, cache_dir);
    for (double rho : rhos) {
        ModelParams pr = p;
        pr.rho = rho;
        validate_params(pr);
        std::vector<double> q(configs.size()), weight(configs.size());
        double total = 0.0;
        for (std::size_t k = 0; k < configs.size(); ++k) {
            q[k] = exact.q(configs[k], pr);
            weight[k] = orderings(configs[k]) * q[k];
            total += weight[k];
        }

        for (int l : lambdas) {
            for (const char* method : {"true", "gaussian"}) {
                const bool is_true = std::string(method) == "true";
                if (is_true && l > 1) continue;
                Table1Row row;
                row.rho = rho;
                row.lambda = l;
                row.method = method;
                row.configs = configs.size();
                for (std::size_t k = 0; k < configs.size(); ++k) {
                    const SeriesTable& s = is_true ? truth[k] : gauss[k];
                    const Approximant a = approximant(s.truncated(std::min(l, s.order())), rho, order);
                    const double e = relative_error(a.value, q[k]);
                    const double w = weight[k] / total;
                    if (e < 1.0) row.phi1 += w, ++row.count1;
                    if (e < 10.0) row.phi10 += w, ++row.count10;
                    if (e < 100.0) row.phi100 += w, ++row.count100;
                    row.fallbacks += a.fallback;
                    report.errors.push_back({configs[k].label(), rho, l, method, a.value, q[k], e, a.fallback});
                }
                report.rows.push_back(row);
            }
        }
    }
    report.states = exact.states();
    return report;
}

void write_table1_csv(std::ostream& os, const Table1Report& r) {
    os << "rho,lambda,method,configs,phi_1,phi_10,phi_100,count_1,count_10,count_100,pade_fallbacks\n";
    for (const auto& row : r.rows) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "%s,%d,%s,%zu,%.4f,%.4f,%.4f,%zu,%zu,%zu,%zu\n", format_double(row.rho).c_str(),
                      row.lambda, row.method.c_str(), row.configs, row.phi1, row.phi10, row.phi100, row.count1,
                      row.count10, row.count100, row.fallbacks);
        os << buf;
    }
}

void write_table1_errors_csv(std::ostream& os, const Table1Report& r) {
    os << "config,rho,lambda,method,approx,exact,rel_error_pct,pade_fallback\n";
    for (const auto& e : r.errors)
        os << quoted(e.config) << ',' << format_double(e.rho) << ',' << e.lambda << ',' << e.method << ','
           << format_double(e.approx) << ',' << format_double(e.exact) << ',' << format_double(e.error) << ','
           << (e.fallback ? 1 : 0) << '\n';
}

void write_gaussian_csv(std::ostream& os, const ModelParams& p, SampleMode mode, long draws, std::uint64_t seed,
                        int threads) {
    validate_params(p);
    std::ostringstream head;
    for (int i = 0; i < p.K; ++i) head << "X" << i + 1 << ',';
    for (int j = 0; j < p.L; ++j) head << "Y" << j + 1 << ',';
    for (int i = 0; i < p.K; ++i)
        for (int j = 0; j < p.L; ++j) head << "D" << i + 1 << j + 1 << ',';
    for (int i = 0; i < p.K; ++i)
        for (int j = 0; j < p.L; ++j) head << "H" << i + 1 << j + 1 << ',';
    os << head.str() << "accepted_after\n";

    const std::size_t chunks = static_cast<std::size_t>((draws + kChunk - 1) / kChunk);
    std::vector<std::string> text(chunks);
    parallel_for(chunks, threads, [&](std::size_t k) {
        Rng rng = make_stream(seed, k);
        std::ostringstream out;
        const long end = std::min(draws, static_cast<long>(k + 1) * kChunk);
        for (long r = static_cast<long>(k) * kChunk; r < end; ++r) {
            const GaussianDraw d = sample_stationary(p, mode, rng);
            for (Eigen::Index i = 0; i < d.X.size(); ++i) out << format_double(d.X[i]) << ',';
            for (Eigen::Index j = 0; j < d.Y.size(); ++j) out << format_double(d.Y[j]) << ',';
            for (Eigen::Index i = 0; i < d.D.rows(); ++i)
                for (Eigen::Index j = 0; j < d.D.cols(); ++j) out << format_double(d.D(i, j)) << ',';
            for (Eigen::Index i = 0; i < d.H.rows(); ++i)
                for (Eigen::Index j = 0; j < d.H.cols(); ++j) out << format_double(d.H(i, j)) << ',';
            out << d.rejections << '\n';
        }
        text[k] = out.str();
    });
    for (const auto& t : text) os << t;
}

void write_moran_csv(std::ostream& os, const MoranParams& p, const CountMatrix& init, double horizon, double dt,
                     long count, std::uint64_t seed, int threads) {
    const auto ens = run_ensemble(p, init, horizon, dt, static_cast<std::size_t>(count), seed, threads);
    const auto K = init.rows();
    const auto L = init.cols();
    os << "traj,t";
    for (Eigen::Index i = 0; i < K; ++i) os << ",X" << i + 1;
    for (Eigen::Index j = 0; j < L; ++j) os << ",Y" << j + 1;
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < L; ++j) os << ",D" << i + 1 << j + 1;
    os << '\n';
    for (std::size_t k = 0; k < ens.size(); ++k)
        for (const auto& m : ens[k]) {
            os << k << ',' << format_double(m.t);
            for (Eigen::Index i = 0; i < K; ++i) os << ',' << format_double(m.X[i]);
            for (Eigen::Index j = 0; j < L; ++j) os << ',' << format_double(m.Y[j]);
            for (Eigen::Index i = 0; i < K; ++i)
                for (Eigen::Index j = 0; j < L; ++j) os << ',' << format_double(m.D(i, j));
            os << '\n';
        }
}

Json moran_report_json(const MoranParams& p, const CountMatrix& init, double horizon, double dt, long count,
                       std::uint64_t seed, int threads) {
    const auto ens = run_ensemble(p, init, horizon, dt, static_cast<std::size_t>(count), seed, threads);
    const LlnReport lln = check_lln(ens, p);
    const FluctuationReport fl = check_fluctuations(ens, p);
    Json cov = Json::array(), target = Json::array();
    for (Eigen::Index i = 0; i < fl.covariance.rows(); ++i) {
        Json a = Json::array(), b = Json::array();
        for (Eigen::Index j = 0; j < fl.covariance.cols(); ++j) {
            a.push_back(fl.covariance(i, j));
            b.push_back(fl.target(i, j));
        }
        cov.push_back(a);
        target.push_back(b);
    }
    return Json{{"N", p.N},
                {"beta", p.beta},
                {"rho_beta", p.rho_beta},
                {"trajectories", lln.trajectories},
                {"seed", seed},
                {"lln",
                 {{"cell", {lln.cell_i, lln.cell_j}},
                  {"fitted_rate", lln.fitted_rate},
                  {"expected_rate", lln.expected_rate},
                  {"max_abs_deviation", lln.max_abs_deviation},
                  {"mean_sup_deviation", lln.mean_sup_deviation}}},
                {"fluctuations",
                 {{"time", fl.time},
                  {"covariance", cov},
                  {"target", target},
                  {"var_u11", fl.var_u11},
                  {"var_u11_se", fl.var_u11_se},
                  {"target_u11", fl.target_u11},
                  {"jarque_bera", fl.jarque_bera},
                  {"jarque_bera_p", fl.jarque_bera_p}}}};
}

Json coupling_report_json(const AncState& init, double rho, long reps, std::uint64_t seed, int threads) {
    const CouplingStats s = estimate_coupling(init, rho, reps, seed, threads);
    Json kinds = Json::array();
    for (int k = 1; k <= 3; ++k) {
        kinds.push_back({{"kind", k},
                         {"prob", s.prob(k)},
                         {"se", s.se(k)},
                         {"prob_before_U", s.prob_before_U(k)},
                         {"se_before_U", s.se_before_U(k)},
                         {"expected", binom2(init.c) / rho},
                         {"chain_in_S", s.failed[k] ? static_cast<double>(s.chain_in_S[k]) / s.failed[k] : 1.0}});
    }
    return Json{{"init", {init.a, init.b, init.c, init.d}},
                {"rho", rho},
                {"reps", s.reps},
                {"seed", seed},
                {"failures", kinds},
                {"any_failure", static_cast<double>(s.any_failure) / s.reps},
                {"double_failure", s.double_prob()}};
}

void write_event_log(std::ostream& os, const AncState& init, double rho, char process, long reps, std::uint64_t seed) {
    for (long r = 0; r < reps; ++r) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(r));
        EventLog log;
        if (process == 'C') log = sim_C_rho(init, rho, rng);
        else if (process == 'D') log = sim_D_inf(init, rho, rng);
        else log = sim_coupled(init, rho, rng, true).log;
        for (const auto& e : log) write_event_jsonl(os, e, r);
    }
}

void write_estimate_csv(std::ostream& os, const std::vector<SampleConfig>& configs, const ModelParams& p,
                        GenealogyModel m, long reps, std::uint64_t seed, int threads) {
    os << "config,model,rho,reps,estimate,se\n";
    std::map<std::array<int, 3>, PatternTally> tallies;
    for (const auto& cfg : configs) {
        validate_config(cfg, p);
        const std::array<int, 3> key{cfg.a_total(), cfg.b_total(), cfg.c_total()};
        auto it = tallies.find(key);
        if (it == tallies.end()) {
            const std::uint64_t s = seed ^ fnv1a(std::to_string(key[0]) + "," + std::to_string(key[1]) + "," +
                                                 std::to_string(key[2]));
            it = tallies.emplace(key, tally_pattern(key[0], key[1], key[2], p, m, reps, s, threads)).first;
        }
        const McEstimate e = estimate_from_tally(it->second, cfg);
        os << quoted(cfg.label()) << ',' << model_name(m) << ',' << format_double(p.rho) << ',' << reps << ','
           << format_double(e.estimate) << ',' << format_double(e.se) << '\n';
    }
}

std::string family_name(ErrorFamily f) {
    switch (f) {
        case ErrorFamily::Usage: return "usage";
        case ErrorFamily::Model: return "model";
        case ErrorFamily::Numeric: return "numeric";
        case ErrorFamily::Capacity: return "capacity";
        case ErrorFamily::Validity: return "validity";
        case ErrorFamily::Io: return "io";
    }
    return "usage";
}

std::string error_json(const std::string& name, const std::string& family, const std::string& message) {
    return Json{{"error", name}, {"family", family}, {"message", message}}.dump();
}

}  // namespace twoloc
