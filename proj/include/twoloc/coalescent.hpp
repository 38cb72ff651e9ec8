#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <vector>

#include "twoloc/model.hpp"
#include "twoloc/rng.hpp"

namespace twoloc {

/// Counting state: left-only, right-only, left halves and right halves of full fragments.
struct AncState {
    int a = 0;
    int b = 0;
    int c = 0;
    int d = 0;

    int nA() const { return a + c; }
    int nB() const { return b + d; }
    /// Both loci have found their most recent common ancestor.
    bool absorbed() const { return nA() <= 1 && nB() <= 1; }
    bool operator==(const AncState& o) const { return a == o.a && b == o.b && c == o.c && d == o.d; }
};

std::ostream& operator<<(std::ostream& os, const AncState& s);

/// Event types I..VII, stored as 1..7.
enum EventType : int { kTypeI = 1, kTypeII, kTypeIII, kTypeIV, kTypeV, kTypeVI, kTypeVII };

const char* type_name(int type);

/// Rates indexed by event type (entry 0 unused).
using RateTable = std::array<double, 8>;

RateTable rates_C(const AncState& s, double rho);
RateTable rates_D(const AncState& s, double rho);
AncState apply_type(const AncState& s, int type);

struct Event {
    double time = 0.0;
    int type = 0;
    /// IV and V: 0 for a pair of half fragments, 1 for a half with a full fragment.
    int sub = 0;
    /// 'C', 'D' or 'B' (both, while coupled).
    char process = 'C';
    AncState state;
};

using EventLog = std::vector<Event>;

void write_event_jsonl(std::ostream& os, const Event& e, long rep = 0);

/// Counting-level ARG until both loci have a single ancestor.
EventLog sim_C_rho(const AncState& init, double rho, Rng& rng);
/// Counting-level artificial-recombination process.
EventLog sim_D_inf(const AncState& init, double rho, Rng& rng);

struct CouplingOutcome {
    bool success = false;
    int first_kind = 0;
    /// kinds 1..3: did the failure event happen before the process absorbed
    std::array<bool, 4> failed{};
    std::array<double, 4> T{};
    /// time the failing process first reaches c = 0 (k = 1) or c = d = 0 (k = 2, 3)
    std::array<double, 4> U{};
    double t_mrca = std::numeric_limits<double>::infinity();
    /// jump chain up to U^(k) has at most one non-recombination step
    std::array<bool, 4> chain_in_S{};
    double absorb_C = 0.0;
    double absorb_D = 0.0;
    int distinct_kinds() const { return int(failed[1]) + int(failed[2]) + int(failed[3]); }
    EventLog log;
};

/// Coupled pair: shared clocks for IV-VII, separate clocks for I (C only),
/// II and III (D only). After a failure both run on independently until
/// each absorbs, so later failures of other kinds are still recorded.
CouplingOutcome sim_coupled(const AncState& init, double rho, Rng& rng, bool keep_log = false);

struct CouplingStats {
    long reps = 0;
    std::array<long, 4> failed{};
    long any_failure = 0;
    long double_failure = 0;
    std::array<long, 4> chain_in_S{};
    /// failure of kind k before the failing process first reaches c = 0
    std::array<long, 4> before_U{};
    double prob(int k) const { return static_cast<double>(failed[k]) / reps; }
    double se(int k) const;
    double prob_before_U(int k) const { return static_cast<double>(before_U[k]) / reps; }
    double se_before_U(int k) const;
    double double_prob() const { return static_cast<double>(double_failure) / reps; }
};

CouplingStats estimate_coupling(const AncState& init, double rho, long reps, std::uint64_t seed, int threads = 1);

/// Per-locus genealogy: node parents and times, leaves first.
struct Tree {
    std::vector<int> parent;
    std::vector<double> time;
    int leaves = 0;

    void reset(int n);
    int merge(int u, int v, double t);
    int root() const { return static_cast<int>(parent.size()) - 1; }
    int size() const { return static_cast<int>(parent.size()); }
};

/// Marginal trees for the observation pattern (a, b, c). Locus A leaves are
/// the a left-only individuals then the c full ones; likewise at locus B.
struct Genealogy {
    int a = 0;
    int b = 0;
    int c = 0;
    Tree A;
    Tree B;
    /// counting chain of the ancestral phase (loose model: up to U^(k))
    std::vector<AncState> chain;
    /// loose model: 1 when the single early coalescence was used, 2 otherwise
    int branch = 0;
};

Genealogy sim_arg(int a, int b, int c, double rho, Rng& rng);
Genealogy sim_independent(int a, int b, int c, Rng& rng);
/// Loose-linkage process. Throws AlphaOverflow when binom(c,2)/rho >= 1.
Genealogy sim_loose(int a, int b, int c, double rho, Rng& rng);

/// Jump chains of the early-coalescence branch: one per number of
/// recombinations preceding the coalescence, c - 1 in total.
std::vector<std::vector<AncState>> loose_chains(int a, int b, int c);

/// Alleles per leaf and the resulting configuration.
SampleConfig drop_mutations(const Genealogy& g, const ModelParams& p, Rng& rng);

enum class GenealogyModel { Arg, Loose, Independent };

const char* model_name(GenealogyModel m);
GenealogyModel parse_model(const std::string& name);

Genealogy simulate_genealogy(GenealogyModel m, int a, int b, int c, double rho, Rng& rng);

/// Outcome counts for one observation pattern.
struct PatternTally {
    int a = 0;
    int b = 0;
    int c = 0;
    long reps = 0;
    std::map<std::vector<int>, long> counts;
};

constexpr long kChunk = 4096;

/// Simulates reps genealogies on chunked streams (seed, chunk), so the tally
/// does not depend on the thread count.
PatternTally tally_pattern(int a, int b, int c, const ModelParams& p, GenealogyModel m, long reps,
                           std::uint64_t seed, int threads = 1);

struct McEstimate {
    double estimate = 0.0;
    double se = 0.0;
    long hits = 0;
    long reps = 0;
};

/// Ordered-sample probability: unordered hit frequency over the number of orderings.
McEstimate estimate_from_tally(const PatternTally& t, const SampleConfig& cfg);

McEstimate estimate_q_mc(const SampleConfig& cfg, const ModelParams& p, GenealogyModel m, long reps,
                         std::uint64_t seed, int threads = 1);

}  // namespace twoloc
