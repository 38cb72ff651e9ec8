#include "twoloc/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>

#include "twoloc/oracle.hpp"
#include "twoloc/parallel.hpp"

namespace twoloc {

namespace {

inline double choose2(int k) { return 0.5 * k * (k - 1); }

int draw_type(const RateTable& r, double total, Rng& rng) {
    double u = uniform01(rng) * total;
    int last = 0;
    for (int k = 1; k <= 7; ++k) {
        if (r[k] <= 0) continue;
        last = k;
        if ((u -= r[k]) < 0) return k;
    }
    return last;
}

double total_of(const RateTable& r) {
    double s = 0.0;
    for (int k = 1; k <= 7; ++k) s += r[k];
    return s;
}

template <typename T>
void swap_remove(std::vector<T>& v, std::size_t i) {
    v[i] = v.back();
    v.pop_back();
}

/// Two distinct indices drawn uniformly from [0, n).
std::pair<int, int> distinct_pair(int n, Rng& rng) {
    const int i = uniform_index(rng, n);
    int j = uniform_index(rng, n - 1);
    if (j >= i) ++j;
    return {i, j};
}

/// Kingman coalescent on the given lineages, continuing from time t.
void kingman(std::vector<int>& lineages, Tree& tree, double t, Rng& rng) {
    while (lineages.size() > 1) {
        const int k = static_cast<int>(lineages.size());
        t += exponential(rng, choose2(k));
        auto [i, j] = distinct_pair(k, rng);
        lineages[i] = tree.merge(lineages[i], lineages[j], t);
        swap_remove(lineages, static_cast<std::size_t>(j));
    }
}

struct FullLineage {
    int A;
    int B;
};

/// Lineage sets shared by the ancestral simulators.
struct Lineages {
    std::vector<int> onlyA;
    std::vector<int> onlyB;
    std::vector<FullLineage> full;

    void init(int a, int b, int c) {
        onlyA.clear();
        onlyB.clear();
        full.clear();
        for (int k = 0; k < a; ++k) onlyA.push_back(k);
        for (int k = 0; k < b; ++k) onlyB.push_back(k);
        for (int k = 0; k < c; ++k) full.push_back({a + k, b + k});
    }
    AncState state() const {
        const int c = static_cast<int>(full.size());
        return {static_cast<int>(onlyA.size()), static_cast<int>(onlyB.size()), c, c};
    }

    void coalesce_full(int i, int j, Tree& tA, Tree& tB, double t) {
        full[i] = {tA.merge(full[i].A, full[j].A, t), tB.merge(full[i].B, full[j].B, t)};
        swap_remove(full, static_cast<std::size_t>(j));
    }
    void recombine(int i) {
        onlyA.push_back(full[i].A);
        onlyB.push_back(full[i].B);
        swap_remove(full, static_cast<std::size_t>(i));
    }
    /// Type IV: a pair of left halves, or a left half with a full fragment.
    void coalesce_left(Tree& tA, double t, Rng& rng) {
        const int a = static_cast<int>(onlyA.size());
        const int c = static_cast<int>(full.size());
        const double pairs = choose2(a);
        if (uniform01(rng) * (pairs + static_cast<double>(a) * c) < pairs) {
            auto [i, j] = distinct_pair(a, rng);
            onlyA[i] = tA.merge(onlyA[i], onlyA[j], t);
            swap_remove(onlyA, static_cast<std::size_t>(j));
        } else {
            const int i = uniform_index(rng, a);
            const int j = uniform_index(rng, c);
            full[j].A = tA.merge(onlyA[i], full[j].A, t);
            swap_remove(onlyA, static_cast<std::size_t>(i));
        }
    }
    void coalesce_right(Tree& tB, double t, Rng& rng) {
        const int b = static_cast<int>(onlyB.size());
        const int c = static_cast<int>(full.size());
        const double pairs = choose2(b);
        if (uniform01(rng) * (pairs + static_cast<double>(b) * c) < pairs) {
            auto [i, j] = distinct_pair(b, rng);
            onlyB[i] = tB.merge(onlyB[i], onlyB[j], t);
            swap_remove(onlyB, static_cast<std::size_t>(j));
        } else {
            const int i = uniform_index(rng, b);
            const int j = uniform_index(rng, c);
            full[j].B = tB.merge(onlyB[i], full[j].B, t);
            swap_remove(onlyB, static_cast<std::size_t>(i));
        }
    }
    void join(Rng& rng) {
        const int i = uniform_index(rng, static_cast<int>(onlyA.size()));
        const int j = uniform_index(rng, static_cast<int>(onlyB.size()));
        full.push_back({onlyA[i], onlyB[j]});
        swap_remove(onlyA, static_cast<std::size_t>(i));
        swap_remove(onlyB, static_cast<std::size_t>(j));
    }
};

int sub_kind_left(const AncState& s, Rng& rng) {
    const double pairs = choose2(s.a);
    return uniform01(rng) * (pairs + static_cast<double>(s.a) * s.c) < pairs ? 0 : 1;
}

int sub_kind_right(const AncState& s, Rng& rng) {
    const double pairs = choose2(s.b);
    return uniform01(rng) * (pairs + static_cast<double>(s.b) * s.d) < pairs ? 0 : 1;
}

int sub_kind(const AncState& s, int type, Rng& rng) {
    if (type == kTypeIV) return sub_kind_left(s, rng);
    if (type == kTypeV) return sub_kind_right(s, rng);
    return 0;
}

EventLog run_counting(const AncState& init, double rho, Rng& rng, bool artificial) {
    EventLog log;
    AncState s = init;
    double t = 0.0;
    while (!s.absorbed()) {
        const RateTable r = artificial ? rates_D(s, rho) : rates_C(s, rho);
        const double total = total_of(r);
        if (total <= 0) break;
        t += exponential(rng, total);
        const int type = draw_type(r, total, rng);
        const int sub = sub_kind(s, type, rng);
        s = apply_type(s, type);
        log.push_back({t, type, sub, artificial ? 'D' : 'C', s});
    }
    return log;
}

Eigen::VectorXd root_law(const ModelParams& p, Locus locus) {
    return p.pim ? p.weights(locus) : stationary_distribution(p.transition(locus));
}

int draw_from(const Eigen::VectorXd& w, Rng& rng) {
    double u = uniform01(rng);
    const auto n = w.size();
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        u -= w[k];
        if (u < 0) return static_cast<int>(k);
    }
    return static_cast<int>(n - 1);
}

std::vector<int> mutate_tree(const Tree& tree, const ModelParams& p, Locus locus, Rng& rng) {
    std::vector<int> allele(static_cast<std::size_t>(tree.size()), 0);
    if (tree.size() == 0) return allele;
    const Eigen::VectorXd pi = root_law(p, locus);
    const Eigen::MatrixXd& P = p.transition(locus);
    const double half_theta = 0.5 * p.theta(locus);
    const int root = tree.root();
    allele[static_cast<std::size_t>(root)] = draw_from(pi, rng);
    for (int node = root - 1; node >= 0; --node) {
        const int par = tree.parent[static_cast<std::size_t>(node)];
        const double len = tree.time[static_cast<std::size_t>(par)] - tree.time[static_cast<std::size_t>(node)];
        int x = allele[static_cast<std::size_t>(par)];
        if (half_theta > 0 && len > 0) {
            if (p.pim) {
                if (uniform01(rng) < -std::expm1(-half_theta * len)) x = draw_from(pi, rng);
            } else {
                std::poisson_distribution<int> hits(half_theta * len);
                for (int m = hits(rng); m > 0; --m) x = draw_from(P.row(x).transpose(), rng);
            }
        }
        allele[static_cast<std::size_t>(node)] = x;
    }
    return allele;
}

}  // namespace

std::ostream& operator<<(std::ostream& os, const AncState& s) {
    return os << '(' << s.a << ',' << s.b << ',' << s.c << ',' << s.d << ')';
}

const char* type_name(int type) {
    static const char* names[] = {"?", "I", "II", "III", "IV", "V", "VI", "VII"};
    return (type >= 1 && type <= 7) ? names[type] : names[0];
}

RateTable rates_C(const AncState& s, double rho) {
    RateTable r{};
    r[kTypeI] = choose2(s.c);
    r[kTypeIV] = 0.5 * s.a * (s.a + 2 * s.c - 1);
    r[kTypeV] = 0.5 * s.b * (s.b + 2 * s.d - 1);
    r[kTypeVI] = static_cast<double>(s.a) * s.b;
    r[kTypeVII] = 0.5 * rho * s.c;
    return r;
}

RateTable rates_D(const AncState& s, double rho) {
    RateTable r{};
    r[kTypeII] = choose2(s.c);
    r[kTypeIII] = choose2(s.d);
    r[kTypeIV] = 0.5 * s.a * (s.a + 2 * s.c - 1);
    r[kTypeV] = 0.5 * s.b * (s.b + 2 * s.d - 1);
    r[kTypeVI] = static_cast<double>(s.a) * s.b;
    r[kTypeVII] = 0.5 * rho * std::max(s.c, s.d);
    return r;
}

AncState apply_type(const AncState& s, int type) {
    AncState t = s;
    switch (type) {
        case kTypeI: --t.c; --t.d; break;
        case kTypeII: --t.c; break;
        case kTypeIII: --t.d; break;
        case kTypeIV: --t.a; break;
        case kTypeV: --t.b; break;
        case kTypeVI: --t.a; --t.b; ++t.c; ++t.d; break;
        case kTypeVII:
            if (s.c > 0) { ++t.a; --t.c; }
            if (s.d > 0) { ++t.b; --t.d; }
            break;
        default: throw Error(ErrorCode::InvalidArgument, "unknown event type");
    }
    return t;
}

void write_event_jsonl(std::ostream& os, const Event& e, long rep) {
    char time[32];
    std::snprintf(time, sizeof time, "%.17g", e.time);
    os << "{\"rep\":" << rep << ",\"time\":" << time << ",\"type\":\"" << type_name(e.type) << "\",\"sub\":" << e.sub
       << ",\"process\":\"" << e.process << "\",\"state\":[" << e.state.a << ',' << e.state.b << ',' << e.state.c
       << ',' << e.state.d << "]}\n";
}

EventLog sim_C_rho(const AncState& init, double rho, Rng& rng) {
    if (init.c != init.d) throw Error(ErrorCode::InvalidArgument, "the ARG starts with c = d");
    return run_counting(init, rho, rng, false);
}

EventLog sim_D_inf(const AncState& init, double rho, Rng& rng) { return run_counting(init, rho, rng, true); }

CouplingOutcome sim_coupled(const AncState& init, double rho, Rng& rng, bool keep_log) {
    if (init.c != init.d) throw Error(ErrorCode::InvalidArgument, "coupling starts with c = d");
    CouplingOutcome out;
    const double inf = std::numeric_limits<double>::infinity();
    out.T.fill(inf);
    out.U.fill(inf);

    AncState C = init, D = init;
    double t = 0.0;
    double UC = C.c == 0 ? 0.0 : inf;
    double UD = (D.c == 0 && D.d == 0) ? 0.0 : inf;
    int nonrec_C = 0, nonrec_D = 0;

    auto after_C = [&](int type) {
        if (UC == inf && type != kTypeVII) ++nonrec_C;
        if (UC == inf && C.c == 0) UC = t;
    };
    auto after_D = [&](int type) {
        if (UD == inf && type != kTypeVII) ++nonrec_D;
        if (UD == inf && D.c == 0 && D.d == 0) UD = t;
    };

    bool coupled = true;
    while (coupled && !C.absorbed()) {
        RateTable r = rates_C(C, rho);
        r[kTypeII] = choose2(D.c);
        r[kTypeIII] = choose2(D.d);
        const double total = total_of(r);
        t += exponential(rng, total);
        const int type = draw_type(r, total, rng);
        const int sub = sub_kind(C, type, rng);
        if (type == kTypeI) {
            C = apply_type(C, type);
            after_C(type);
        } else if (type == kTypeII || type == kTypeIII) {
            D = apply_type(D, type);
            after_D(type);
        } else {
            C = apply_type(C, type);
            D = apply_type(D, type);
            after_C(type);
            after_D(type);
        }
        const int kind = type <= kTypeIII ? type : 0;
        if (keep_log) out.log.push_back({t, type, sub, kind == 0 ? 'B' : (kind == 1 ? 'C' : 'D'), kind == 1 ? C : D});
        if (kind) {
            coupled = false;
            out.first_kind = kind;
            out.failed[kind] = true;
            out.T[kind] = t;
        }
    }
    if (coupled) {
        out.success = true;
        out.t_mrca = t;
        out.absorb_C = out.absorb_D = t;
    } else {
        const double t_fail = t;
        while (!C.absorbed()) {
            const RateTable r = rates_C(C, rho);
            const double total = total_of(r);
            t += exponential(rng, total);
            const int type = draw_type(r, total, rng);
            const int sub = sub_kind(C, type, rng);
            C = apply_type(C, type);
            after_C(type);
            if (type == kTypeI && !out.failed[1]) {
                out.failed[1] = true;
                out.T[1] = t;
            }
            if (keep_log) out.log.push_back({t, type, sub, 'C', C});
        }
        out.absorb_C = t;
        t = t_fail;
        while (!D.absorbed()) {
            const RateTable r = rates_D(D, rho);
            const double total = total_of(r);
            t += exponential(rng, total);
            const int type = draw_type(r, total, rng);
            const int sub = sub_kind(D, type, rng);
            D = apply_type(D, type);
            after_D(type);
            if ((type == kTypeII || type == kTypeIII) && !out.failed[type]) {
                out.failed[type] = true;
                out.T[type] = t;
            }
            if (keep_log) out.log.push_back({t, type, sub, 'D', D});
        }
        out.absorb_D = t;
        if (keep_log)
            std::stable_sort(out.log.begin(), out.log.end(), [](const Event& x, const Event& y) { return x.time < y.time; });
    }
    out.U[1] = UC;
    out.U[2] = out.U[3] = UD;
    out.chain_in_S[1] = nonrec_C <= 1;
    out.chain_in_S[2] = out.chain_in_S[3] = nonrec_D <= 1;
    return out;
}

double CouplingStats::se(int k) const {
    const double p = prob(k);
    return std::sqrt(p * (1 - p) / reps);
}

double CouplingStats::se_before_U(int k) const {
    const double p = prob_before_U(k);
    return std::sqrt(p * (1 - p) / reps);
}

CouplingStats estimate_coupling(const AncState& init, double rho, long reps, std::uint64_t seed, int threads) {
    const std::size_t chunks = static_cast<std::size_t>((reps + kChunk - 1) / kChunk);
    std::vector<CouplingStats> part(chunks);
    parallel_for(chunks, threads, [&](std::size_t k) {
        Rng rng = make_stream(seed, k);
        const long begin = static_cast<long>(k) * kChunk;
        const long end = std::min(reps, begin + kChunk);
        CouplingStats& s = part[k];
        for (long r = begin; r < end; ++r) {
            const CouplingOutcome o = sim_coupled(init, rho, rng);
            ++s.reps;
            for (int q = 1; q <= 3; ++q) {
                if (!o.failed[q]) continue;
                ++s.failed[q];
                if (o.chain_in_S[q]) ++s.chain_in_S[q];
                if (o.T[q] < o.U[q]) ++s.before_U[q];
            }
            if (!o.success) ++s.any_failure;
            if (o.distinct_kinds() >= 2) ++s.double_failure;
        }
    });
    CouplingStats total;
    for (const auto& s : part) {
        total.reps += s.reps;
        total.any_failure += s.any_failure;
        total.double_failure += s.double_failure;
        for (int q = 1; q <= 3; ++q) {
            total.failed[q] += s.failed[q];
            total.chain_in_S[q] += s.chain_in_S[q];
            total.before_U[q] += s.before_U[q];
        }
    }
    return total;
}

void Tree::reset(int n) {
    parent.assign(static_cast<std::size_t>(n), -1);
    time.assign(static_cast<std::size_t>(n), 0.0);
    leaves = n;
}

int Tree::merge(int u, int v, double t) {
    const int id = size();
    parent.push_back(-1);
    time.push_back(t);
    parent[static_cast<std::size_t>(u)] = id;
    parent[static_cast<std::size_t>(v)] = id;
    return id;
}

Genealogy sim_arg(int a, int b, int c, double rho, Rng& rng) {
    Genealogy g;
    g.a = a;
    g.b = b;
    g.c = c;
    g.A.reset(a + c);
    g.B.reset(b + c);
    Lineages lin;
    lin.init(a, b, c);
    double t = 0.0;
    AncState s = lin.state();
    while (!s.absorbed()) {
        const RateTable r = rates_C(s, rho);
        const double total = total_of(r);
        t += exponential(rng, total);
        switch (draw_type(r, total, rng)) {
            case kTypeI: {
                auto [i, j] = distinct_pair(s.c, rng);
                lin.coalesce_full(i, j, g.A, g.B, t);
                break;
            }
            case kTypeIV: lin.coalesce_left(g.A, t, rng); break;
            case kTypeV: lin.coalesce_right(g.B, t, rng); break;
            case kTypeVI: lin.join(rng); break;
            case kTypeVII: lin.recombine(uniform_index(rng, s.c)); break;
            default: break;
        }
        s = lin.state();
    }
    return g;
}

Genealogy sim_independent(int a, int b, int c, Rng& rng) {
    Genealogy g;
    g.a = a;
    g.b = b;
    g.c = c;
    g.A.reset(a + c);
    g.B.reset(b + c);
    std::vector<int> la(static_cast<std::size_t>(a + c)), lb(static_cast<std::size_t>(b + c));
    for (int k = 0; k < a + c; ++k) la[static_cast<std::size_t>(k)] = k;
    for (int k = 0; k < b + c; ++k) lb[static_cast<std::size_t>(k)] = k;
    kingman(la, g.A, 0.0, rng);
    kingman(lb, g.B, 0.0, rng);
    return g;
}

std::vector<std::vector<AncState>> loose_chains(int a, int b, int c) {
    std::vector<std::vector<AncState>> out;
    for (int before = 0; before + 2 <= c; ++before) {
        std::vector<AncState> chain{{a, b, c, c}};
        AncState s{a, b, c, c};
        for (int k = 0; k < before; ++k) chain.push_back(s = apply_type(s, kTypeVII));
        chain.push_back(s = apply_type(s, kTypeI));
        while (s.c > 0) chain.push_back(s = apply_type(s, kTypeVII));
        out.push_back(std::move(chain));
    }
    return out;
}

Genealogy sim_loose(int a, int b, int c, double rho, Rng& rng) {
    const double alpha = choose2(c) / rho;
    if (!(alpha < 1.0))
        throw Error(ErrorCode::AlphaOverflow, "binom(c,2)/rho = " + std::to_string(alpha) + " must be below 1");
    Genealogy g;
    g.a = a;
    g.b = b;
    g.c = c;
    g.A.reset(a + c);
    g.B.reset(b + c);
    Lineages lin;
    lin.init(a, b, c);
    double t = 0.0;
    g.chain.push_back(lin.state());

    auto wait_C = [&] {
        const AncState s = lin.state();
        t += exponential(rng, total_of(rates_C(s, rho)));
    };

    if (c >= 2 && uniform01(rng) < alpha) {
        g.branch = 1;
        // The coalescing pair is fixed up front; before it coalesces, only the
        // other full fragments may recombine.
        auto [i, j] = distinct_pair(c, rng);
        int keep1 = i, keep2 = j;
        const int before = uniform_index(rng, c - 1);
        for (int k = 0; k < before; ++k) {
            wait_C();
            const int n = static_cast<int>(lin.full.size());
            int pick = uniform_index(rng, n - 2);
            for (int s : {std::min(keep1, keep2), std::max(keep1, keep2)})
                if (pick >= s) ++pick;
            lin.recombine(pick);
            // swap_remove moved the last element into slot `pick`
            const int moved = n - 1;
            if (keep1 == moved) keep1 = pick;
            if (keep2 == moved) keep2 = pick;
            g.chain.push_back(lin.state());
        }
        wait_C();
        lin.coalesce_full(std::min(keep1, keep2), std::max(keep1, keep2), g.A, g.B, t);
        g.chain.push_back(lin.state());
        while (!lin.full.empty()) {
            wait_C();
            lin.recombine(uniform_index(rng, static_cast<int>(lin.full.size())));
            g.chain.push_back(lin.state());
        }
    } else {
        g.branch = 2;
        // Artificial-recombination process with II and III banned. Left halves
        // are kept as two classes (a: onlyA, c: fullA) and right halves as (b, d).
        std::vector<int>& la = lin.onlyA;
        std::vector<int>& lb = lin.onlyB;
        std::vector<int> lc, ld;
        for (const auto& f : lin.full) {
            lc.push_back(f.A);
            ld.push_back(f.B);
        }
        lin.full.clear();
        auto state = [&] {
            return AncState{static_cast<int>(la.size()), static_cast<int>(lb.size()), static_cast<int>(lc.size()),
                            static_cast<int>(ld.size())};
        };
        AncState s = state();
        while (s.c > 0 || s.d > 0) {
            RateTable r = rates_D(s, rho);
            t += exponential(rng, total_of(r));
            r[kTypeII] = 0.0;
            r[kTypeIII] = 0.0;
            switch (draw_type(r, total_of(r), rng)) {
                case kTypeIV:
                    if (sub_kind_left(s, rng) == 0) {
                        auto [i, j] = distinct_pair(s.a, rng);
                        la[i] = g.A.merge(la[i], la[j], t);
                        swap_remove(la, static_cast<std::size_t>(j));
                    } else {
                        const int i = uniform_index(rng, s.a);
                        const int j = uniform_index(rng, s.c);
                        lc[j] = g.A.merge(la[i], lc[j], t);
                        swap_remove(la, static_cast<std::size_t>(i));
                    }
                    break;
                case kTypeV:
                    if (sub_kind_right(s, rng) == 0) {
                        auto [i, j] = distinct_pair(s.b, rng);
                        lb[i] = g.B.merge(lb[i], lb[j], t);
                        swap_remove(lb, static_cast<std::size_t>(j));
                    } else {
                        const int i = uniform_index(rng, s.b);
                        const int j = uniform_index(rng, s.d);
                        ld[j] = g.B.merge(lb[i], ld[j], t);
                        swap_remove(lb, static_cast<std::size_t>(i));
                    }
                    break;
                case kTypeVI: {
                    const int i = uniform_index(rng, s.a);
                    const int j = uniform_index(rng, s.b);
                    lc.push_back(la[i]);
                    ld.push_back(lb[j]);
                    swap_remove(la, static_cast<std::size_t>(i));
                    swap_remove(lb, static_cast<std::size_t>(j));
                    break;
                }
                case kTypeVII:
                    if (s.c > 0) {
                        const int i = uniform_index(rng, s.c);
                        la.push_back(lc[i]);
                        swap_remove(lc, static_cast<std::size_t>(i));
                    }
                    if (s.d > 0) {
                        const int j = uniform_index(rng, s.d);
                        lb.push_back(ld[j]);
                        swap_remove(ld, static_cast<std::size_t>(j));
                    }
                    break;
                default: break;
            }
            s = state();
            g.chain.push_back(s);
        }
    }
    kingman(lin.onlyA, g.A, t, rng);
    kingman(lin.onlyB, g.B, t, rng);
    return g;
}

SampleConfig drop_mutations(const Genealogy& g, const ModelParams& p, Rng& rng) {
    const std::vector<int> xA = mutate_tree(g.A, p, Locus::A, rng);
    const std::vector<int> xB = mutate_tree(g.B, p, Locus::B, rng);
    SampleConfig cfg = SampleConfig::zeros(p.K, p.L);
    for (int k = 0; k < g.a; ++k) ++cfg.a[xA[static_cast<std::size_t>(k)]];
    for (int k = 0; k < g.b; ++k) ++cfg.b[xB[static_cast<std::size_t>(k)]];
    for (int m = 0; m < g.c; ++m) ++cfg.c(xA[static_cast<std::size_t>(g.a + m)], xB[static_cast<std::size_t>(g.b + m)]);
    return cfg;
}

const char* model_name(GenealogyModel m) {
    switch (m) {
        case GenealogyModel::Arg: return "arg";
        case GenealogyModel::Loose: return "loose";
        case GenealogyModel::Independent: return "independent";
    }
    return "?";
}

GenealogyModel parse_model(const std::string& name) {
    if (name == "arg") return GenealogyModel::Arg;
    if (name == "loose") return GenealogyModel::Loose;
    if (name == "independent") return GenealogyModel::Independent;
    throw Error(ErrorCode::InvalidArgument, "unknown genealogy model '" + name + "'");
}

Genealogy simulate_genealogy(GenealogyModel m, int a, int b, int c, double rho, Rng& rng) {
    switch (m) {
        case GenealogyModel::Arg: return sim_arg(a, b, c, rho, rng);
        case GenealogyModel::Loose: return sim_loose(a, b, c, rho, rng);
        case GenealogyModel::Independent: return sim_independent(a, b, c, rng);
    }
    return {};
}

PatternTally tally_pattern(int a, int b, int c, const ModelParams& p, GenealogyModel m, long reps,
                           std::uint64_t seed, int threads) {
    validate_params(p);
    if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be >= 1");
    if (m == GenealogyModel::Loose && !(choose2(c) / p.rho < 1.0))
        throw Error(ErrorCode::AlphaOverflow, "binom(c,2)/rho must be below 1");
    const std::size_t chunks = static_cast<std::size_t>((reps + kChunk - 1) / kChunk);
    std::vector<std::map<std::vector<int>, long>> part(chunks);
    parallel_for(chunks, threads, [&](std::size_t k) {
        Rng rng = make_stream(seed, k);
        const long begin = static_cast<long>(k) * kChunk;
        const long end = std::min(reps, begin + kChunk);
        for (long r = begin; r < end; ++r) {
            const Genealogy g = simulate_genealogy(m, a, b, c, p.rho, rng);
            ++part[k][flatten(drop_mutations(g, p, rng))];
        }
    });
    PatternTally t;
    t.a = a;
    t.b = b;
    t.c = c;
    t.reps = reps;
    for (const auto& mp : part)
        for (const auto& [key, n] : mp) t.counts[key] += n;
    return t;
}

McEstimate estimate_from_tally(const PatternTally& t, const SampleConfig& cfg) {
    if (cfg.a_total() != t.a || cfg.b_total() != t.b || cfg.c_total() != t.c)
        throw Error(ErrorCode::InvalidConfig, "configuration does not match the simulated pattern");
    McEstimate e;
    e.reps = t.reps;
    const auto it = t.counts.find(flatten(cfg));
    e.hits = it == t.counts.end() ? 0 : it->second;
    const double f = static_cast<double>(e.hits) / static_cast<double>(t.reps);
    const double ord = orderings(cfg);
    e.estimate = f / ord;
    e.se = std::sqrt(f * (1 - f) / static_cast<double>(t.reps)) / ord;
    return e;
}

McEstimate estimate_q_mc(const SampleConfig& cfg, const ModelParams& p, GenealogyModel m, long reps,
                         std::uint64_t seed, int threads) {
    validate_config(cfg, p);
    const PatternTally t = tally_pattern(cfg.a_total(), cfg.b_total(), cfg.c_total(), p, m, reps, seed, threads);
    return estimate_from_tally(t, cfg);
}

}  // namespace twoloc
