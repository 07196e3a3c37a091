#pragma once

#include <gmpxx.h>

#include <array>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "wb/construction.hpp"
#include "wb/diophantine.hpp"
#include "wb/real.hpp"
#include "wb/report.hpp"

namespace wb {

// Directions on S^{d-1}: M uniform angles for d = 2, {+1, -1} for d = 1.
struct DirectionGrid {
    int d = 2;
    std::vector<std::array<double, 2>> beta;   // second entry unused when d = 1
    std::vector<double> angle;                 // pi for beta = -1 when d = 1
    double spacing = 0;                        // chord distance between neighbours

    static DirectionGrid circle(int M);
    static DirectionGrid two_point();
    size_t size() const { return beta.size(); }
    double chord(size_t i, size_t j) const;
    double dot(size_t i, const Lattice& l) const;
};

struct WeightSequence {
    std::vector<double> c;     // c_0 .. c_{n_max}
    double C = 1;
    long N = 0;                // delta stays at gothic_d for n <= N
    double gothic_d = 1;
    std::string recipe;

    double sum() const;
    double at(long n) const;   // 0 beyond the stored range
};

// Sup-norm ball of lattice points (half of it: l and -l give identical
// constraints) with log ||alpha.l|| evaluated in MPFR, sorted by sup norm.
struct DivisorTable {
    int d = 0;
    long radius = 0;
    std::vector<Lattice> l;
    std::vector<long> norm;
    std::vector<double> log_dist;   // log ||alpha.l|| (negative)

    static DivisorTable build(const RealVec& alpha, long radius);
    // entries with norm <= r are the prefix [0, upto(r))
    size_t upto(long r) const;
    // log(1/Omega(N)) = -min log_dist over norm <= N
    double log_inv_omega(long N) const;
};

enum class ScheduleVariant { Definition14, Scoglio };
const char* variant_name(ScheduleVariant v);

struct ScheduleOptions {
    ScheduleVariant variant = ScheduleVariant::Definition14;
    bool inner_zero = false;   // g = 0 on 0 < |l| <= 2^n (definition 1.4 only)
    bool strict_grid = true;   // GridTooCoarse instead of clamping the radius
    double C1 = 1;             // scoglio neighbourhood constant
    int threads = 1;
};

struct DeltaSchedule {
    DirectionGrid grid;
    WeightSequence weights;
    ScheduleOptions options;
    long n_max = 0;
    std::vector<std::vector<double>> delta;            // [beta][n]
    std::vector<std::vector<std::array<long, 2>>> argmin;   // binding l, (0,0) if none
    std::vector<double> radius;                        // neighbourhood radius used for n -> n+1
    long first_unreliable_stage = -1;                  // first stage whose radius was clamped

    double inf_delta() const;
    nlohmann::json headline() const;
    std::string to_csv() const;
};

// One stage: delta[.][n] -> delta[.][n+1]; exposed for the domination property.
struct StageResult {
    std::vector<double> delta;
    std::vector<std::array<long, 2>> argmin;
    double radius = 0;
    bool clamped = false;
};
StageResult delta_step(const DivisorTable& table, const DirectionGrid& grid, const WeightSequence& w, long n,
                       const std::vector<double>& delta_n, const ScheduleOptions& opt);

DeltaSchedule delta_schedule(const RealVec& alpha, const DirectionGrid& grid, const WeightSequence& w, long n_max,
                             const ScheduleOptions& opt = {});
DeltaSchedule delta_schedule(const DivisorTable& table, const DirectionGrid& grid, const WeightSequence& w,
                             long n_max, const ScheduleOptions& opt = {});

// |beta.l| at round-off level of |l|_1 counts as beta orthogonal to l: no constraint.
bool orthogonal(double beta_dot_l, const Lattice& l);

// g(c, n, l); throws ZeroVector for l = 0.
double cutoff_weight(const WeightSequence& c, long n, const Lattice& l);
// e^{2 pi |beta.l| delta}
double phi_weight(const Lattice& l, const std::array<double, 2>& beta, int d, double delta);

struct AdjustedWeights {
    WeightSequence weights;
    long N1 = -1;              // first n from which property 1 holds on the stored range
    double sum_before = 0, sum_after = 0;
};
AdjustedWeights adjust_weights(const WeightSequence& c, double C1, int d);

struct EpsilonLedger {
    std::vector<Real> eps;
    double C = 0;
    int d = 0;
    long N1 = 0;
    long gennecoso_first_failure = -1;   // -1: holds at every stage after N1
    nlohmann::json to_json() const;
};
EpsilonLedger epsilon_ledger(const Real& eps0, const WeightSequence& w, int d, long n_max, long prec = 0);

// Weight recipes.
WeightSequence appendix_weights(const DivisorTable& table, long n_max, double gothic_d = 1, long N = 0);
WeightSequence constant_weights(double value, long n_max, double gothic_d = 1, long N = 0);
// The three-term recipe for the constructed vector, with k_n scanned on
// alpha_{.,2L} over |l| <= 2^n not parallel to nu(l(n)).
WeightSequence construction_weights(const ConstructionState& s, long n_max, double C, double gothic_d = 1, long N = 0);
WeightSequence construction_weights(const ConstructionState& s, const DivisorTable& table, long n_max, double C,
                                    double gothic_d = 1, long N = 0);
// alpha_{.,2L} of the state as a real vector
RealVec construction_alpha(const ConstructionState& s, long prec = 0);

struct ClassificationReport {
    Real bryuno_partial;
    int depth = 0;
    double inf_delta = 0;
    int d1_consistent = -1;   // -1 when d != 1
    double d1_lower_bound = 0;
    std::string label = "finite-depth evidence, not a proof";
    DeltaSchedule schedule;
    nlohmann::json to_json() const;
};
ClassificationReport classify(const RealVec& alpha, const DirectionGrid& grid, const WeightSequence& w, int depth,
                              const ScheduleOptions& opt = {});

// d = 1 checks of the dyadic drops under the appendix weight recipe.
struct AppendixTrace {
    std::vector<double> drop;          // delta_n - delta_{n+1}
    std::vector<double> oracle_drop;   // max over the annulus of log(1/||alpha l||)/(2 pi |l|)
    std::vector<double> paper_bound;   // 2^{-(n+1)} log(1/Omega(2^{n+1}))
    double inf_delta = 0;
};
VerificationReport appendix_check(const Real& alpha, int depth, double gothic_d = 1,
                                  AppendixTrace* trace = nullptr);

struct RefinementReport {
    double max_change = 0;        // over the coarse grid and all stages
    double lipschitz_bound = 0;   // estimate from the binding constraints
    long stages = 0;
    nlohmann::json to_json() const;
};
RefinementReport grid_refinement(const DivisorTable& table, int M, const WeightSequence& w, long n_max,
                                 const ScheduleOptions& opt = {});

}  // namespace wb
