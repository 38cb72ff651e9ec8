#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "twoloc/cli.hpp"
#include "twoloc/gaussian.hpp"

using namespace twoloc;

namespace {

struct Common {
    std::string params_path;
    std::string config_path;
    int enumerate = -1;
    std::vector<double> rhos;
    std::vector<int> lambdas;
    long reps = 0;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out;
    std::string cache;
};

ModelParams load_params(const Common& c, double default_theta) {
    ModelParams p = ModelParams::symmetric(2, 2, default_theta, 1.0);
    if (!c.params_path.empty()) p = params_from_json(read_json_file(c.params_path));
    validate_params(p);
    return p;
}

std::vector<SampleConfig> load_configs(const Common& c, const ModelParams& p) {
    if (!c.config_path.empty() && c.enumerate >= 0)
        throw Error(ErrorCode::InvalidArgument, "--config and --enumerate are exclusive");
    if (c.enumerate >= 0) return enumerate_configs(c.enumerate, p.K, p.L);
    if (c.config_path.empty()) throw Error(ErrorCode::InvalidArgument, "need --config or --enumerate");
    const Json j = read_json_file(c.config_path);
    std::vector<SampleConfig> out;
    if (j.is_array())
        for (const auto& e : j) out.push_back(config_from_json(e));
    else
        out.push_back(config_from_json(j));
    for (const auto& cfg : out) validate_config(cfg, p);
    return out;
}

std::uint64_t resolve_seed(const Common& c) {
    if (c.seed) return *c.seed;
    const std::uint64_t s = fresh_seed();
    std::cerr << Json{{"seed", s}}.dump() << '\n';
    return s;
}

/// Output is buffered so a failing command writes nothing.
template <typename F>
void with_output(const std::string& path, F&& f) {
    std::ostringstream buf;
    f(buf);
    if (path.empty()) {
        std::cout << buf.str();
        return;
    }
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
    os << buf.str();
    if (!os) throw Error(ErrorCode::Io, "write to " + path + " failed");
}

AncState parse_init(const std::vector<int>& v) {
    if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "--init needs a,b,c,d");
    return {v[0], v[1], v[2], v[3]};
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    app->add_option("--out", c.out, "output path (default stdout)");
}

void add_seed(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "random seed; printed to stderr when generated");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-locus sampling distributions: exact, asymptotic, Gaussian and loose-linkage"};
    app.require_subcommand(1);
    Common c;

    auto* q = app.add_subcommand("q", "sampling probabilities per config and rho");
    bool no_clamp = false, exact = false;
    const std::map<std::string, PadeOrder> pade_orders{{"num", PadeOrder::NumeratorFirst},
                                                       {"den", PadeOrder::DenominatorFirst}};
    PadeOrder q_order = PadeOrder::NumeratorFirst, t1_order = PadeOrder::DenominatorFirst;
    std::size_t state_cap = ExactOptions{}.state_cap;
    q->add_option("--params", c.params_path, "model parameters (JSON)");
    q->add_option("--config", c.config_path, "sample configuration(s) (JSON)");
    q->add_option("--enumerate", c.enumerate, "all configurations of this total size");
    q->add_option("--rho", c.rhos, "recombination rates")->delimiter(',');
    q->add_option("--lambda", c.lambdas, "Gaussian truncation orders")->delimiter(',');
    q->add_flag("--no-clamp", no_clamp, "do not clamp approximants to [0,1]");
    q->add_flag("--exact", exact, "add the exact value");
    q->add_option("--pade-order", q_order, "staircase step taken first: num or den (default num)")
        ->transform(CLI::CheckedTransformer(pade_orders));
    q->add_option("--state-cap", state_cap, "exact solver state cap");
    q->add_option("--cache", c.cache, "directory for cached exact values");
    add_common(q, c);

    auto* t1 = app.add_subcommand("table1", "accuracy of truncated approximants over dimorphic samples");
    int n_table = 8;
    std::string errors_path;
    t1->add_option("--params", c.params_path, "model parameters (JSON, K = L = 2); default theta 0.01, uniform PIM");
    t1->add_option("--enumerate", n_table, "sample size n");
    t1->add_option("--rho", c.rhos, "recombination rates")->delimiter(',');
    t1->add_option("--lambda", c.lambdas, "truncation orders")->delimiter(',');
    t1->add_option("--state-cap", state_cap, "exact solver state cap");
    t1->add_option("--cache", c.cache, "directory for cached exact values");
    t1->add_option("--errors", errors_path, "write per-config errors here");
    t1->add_option("--pade-order", t1_order, "staircase step taken first: num or den (default den)")
        ->transform(CLI::CheckedTransformer(pade_orders));
    add_common(t1, c);

    auto* sim = app.add_subcommand("sim", "simulators");
    sim->require_subcommand(1);

    MoranParams mp;
    std::vector<int> moran_init{250, 250, 250, 250};
    double horizon = 2.0, dt = 0.05, mtheta = 0.0;
    auto moran_opts = [&](CLI::App* s) {
        s->add_option("--N", mp.N, "population size");
        s->add_option("--beta", mp.beta, "recombination scaling exponent");
        s->add_option("--rho-beta", mp.rho_beta, "scaled recombination rate");
        s->add_option("--theta", mtheta, "mutation rate at each locus (uniform PIM)");
        s->add_option("--init", moran_init, "initial haplotype counts, row-major 2x2")->delimiter(',');
        s->add_option("--horizon", horizon, "rescaled time horizon");
        s->add_option("--dt", dt, "grid step (rescaled time)");
        s->add_option("--reps", c.reps, "number of trajectories");
        add_seed(s, c);
        add_common(s, c);
    };
    auto* s_moran = sim->add_subcommand("moran", "Moran trajectories (CSV)");
    moran_opts(s_moran);
    auto* s_report = sim->add_subcommand("moran-report", "LLN and fluctuation checks (JSON)");
    moran_opts(s_report);

    auto* s_gauss = sim->add_subcommand("gaussian", "stationary Gaussian-model draws (CSV)");
    std::string mode = "raw";
    s_gauss->add_option("--params", c.params_path, "model parameters (JSON)");
    s_gauss->add_option("--rho", c.rhos, "recombination rate")->delimiter(',');
    s_gauss->add_option("--mode", mode, "raw or reject")->check(CLI::IsMember({"raw", "reject"}));
    s_gauss->add_option("--reps", c.reps, "number of draws");
    add_seed(s_gauss, c);
    add_common(s_gauss, c);

    std::vector<int> anc_init{0, 0, 2, 2};
    double crho = 100.0;
    std::string process = "C";
    auto* s_coal = sim->add_subcommand("coalescent", "counting-process event logs (JSON lines)");
    s_coal->add_option("--init", anc_init, "a,b,c,d")->delimiter(',');
    s_coal->add_option("--rho", crho, "recombination rate");
    s_coal->add_option("--process", process, "C, D or coupled")->check(CLI::IsMember({"C", "D", "coupled"}));
    s_coal->add_option("--reps", c.reps, "replicates");
    add_seed(s_coal, c);
    add_common(s_coal, c);

    auto* s_coup = sim->add_subcommand("coupling", "coupling failure rates (JSON)");
    s_coup->add_option("--init", anc_init, "a,b,c,d")->delimiter(',');
    s_coup->add_option("--rho", crho, "recombination rate");
    s_coup->add_option("--reps", c.reps, "replicates");
    add_seed(s_coup, c);
    add_common(s_coup, c);

    auto* s_est = sim->add_subcommand("estimate", "Monte Carlo sampling probabilities (CSV)");
    std::string model = "arg";
    s_est->add_option("--params", c.params_path, "model parameters (JSON)");
    s_est->add_option("--config", c.config_path, "sample configuration(s) (JSON)");
    s_est->add_option("--enumerate", c.enumerate, "all configurations of this total size");
    s_est->add_option("--rho", c.rhos, "recombination rate")->delimiter(',');
    s_est->add_option("--model", model, "arg, loose or independent")
        ->check(CLI::IsMember({"arg", "loose", "independent"}));
    s_est->add_option("--reps", c.reps, "replicates per observation pattern");
    add_seed(s_est, c);
    add_common(s_est, c);

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            throw Error(ErrorCode::InvalidArgument, e.what());
        }

        auto single_rho = [&](ModelParams& p) {
            if (c.rhos.size() > 1) throw Error(ErrorCode::InvalidArgument, "give a single --rho");
            if (!c.rhos.empty()) p.rho = c.rhos[0];
            validate_params(p);
        };

        if (*q) {
            ModelParams p = load_params(c, 1.0);
            const auto configs = load_configs(c, p);
            QOptions opt;
            opt.rhos = c.rhos.empty() ? std::vector<double>{p.rho} : c.rhos;
            opt.lambdas = c.lambdas;
            opt.clamp = !no_clamp;
            opt.exact = exact;
            opt.order = q_order;
            ExactOptions eo;
            eo.state_cap = state_cap;
            ExactSource src(eo, c.cache);
            with_output(c.out, [&](std::ostream& os) { write_q_csv(os, configs, p, opt, src); });
        } else if (*t1) {
            const ModelParams p = load_params(c, 0.01);
            if (c.rhos.empty()) c.rhos = {25, 50, 100, 200};
            if (c.lambdas.empty()) c.lambdas = {0, 1, 2, 4, 6};
            ExactOptions eo;
            eo.state_cap = state_cap;
            Table1Report r;
            try {
                r = run_table1(p, n_table, c.rhos, c.lambdas, eo, c.cache, t1_order);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::StateCap) throw;
                throw Error(ErrorCode::StateCap, std::string(e.what()) + "; try a smaller --enumerate or raise --state-cap");
            }
            with_output(c.out, [&](std::ostream& os) { write_table1_csv(os, r); });
            if (!errors_path.empty()) with_output(errors_path, [&](std::ostream& os) { write_table1_errors_csv(os, r); });
        } else if (*s_moran || *s_report) {
            if (moran_init.size() != 4) throw Error(ErrorCode::InvalidArgument, "--init needs four counts");
            CountMatrix Z(2, 2);
            Z << moran_init[0], moran_init[1], moran_init[2], moran_init[3];
            mp.thetaA = mp.thetaB = mtheta;
            const std::uint64_t seed = resolve_seed(c);
            const long count = c.reps > 0 ? c.reps : (*s_report ? static_cast<long>(kMinEnsemble) : 1);
            if (*s_moran)
                with_output(c.out, [&](std::ostream& os) { write_moran_csv(os, mp, Z, horizon, dt, count, seed, c.threads); });
            else
                with_output(c.out, [&](std::ostream& os) {
                    os << moran_report_json(mp, Z, horizon, dt, count, seed, c.threads).dump() << '\n';
                });
        } else if (*s_gauss) {
            ModelParams p = load_params(c, 1.0);
            single_rho(p);
            const std::uint64_t seed = resolve_seed(c);
            const SampleMode m = mode == "reject" ? SampleMode::Reject : SampleMode::Raw;
            with_output(c.out, [&](std::ostream& os) {
                write_gaussian_csv(os, p, m, c.reps > 0 ? c.reps : 1, seed, c.threads);
            });
        } else if (*s_coal) {
            const std::uint64_t seed = resolve_seed(c);
            const char pc = process == "coupled" ? 'B' : process[0];
            with_output(c.out, [&](std::ostream& os) {
                write_event_log(os, parse_init(anc_init), crho, pc, c.reps > 0 ? c.reps : 1, seed);
            });
        } else if (*s_coup) {
            const std::uint64_t seed = resolve_seed(c);
            with_output(c.out, [&](std::ostream& os) {
                os << coupling_report_json(parse_init(anc_init), crho, c.reps > 0 ? c.reps : 100000, seed, c.threads)
                          .dump()
                   << '\n';
            });
        } else if (*s_est) {
            ModelParams p = load_params(c, 1.0);
            single_rho(p);
            const auto configs = load_configs(c, p);
            const std::uint64_t seed = resolve_seed(c);
            with_output(c.out, [&](std::ostream& os) {
                write_estimate_csv(os, configs, p, parse_model(model), c.reps > 0 ? c.reps : 100000, seed, c.threads);
            });
        }
    } catch (const Error& e) {
        std::cerr << error_json(std::string(e.name()), family_name(e.family()), e.what()) << '\n';
        return static_cast<int>(e.family());
    } catch (const std::exception& e) {
        std::cerr << error_json("Internal", "internal", e.what()) << '\n';
        return 1;
    }
    return 0;
}
