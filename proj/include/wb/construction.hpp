#pragma once

#include <gmpxx.h>

#include <array>
#include <json.hpp>
#include <string>
#include <vector>

#include "wb/real.hpp"
#include "wb/report.hpp"

namespace wb {

// "0.4" -> 2/5, "1/8" -> 1/8; exact.
mpq_class parse_rational(const std::string& s);
std::string rational_str(const mpq_class& q);

struct TwistSequence {
    mpq_class theta;          // in (0, 1/2)
    std::vector<long> t;      // t_0 = 2, t_{n+1} = t_n + floor(t_n^theta)
};

TwistSequence t_sequence(const mpq_class& theta, int count);
// Extend until the last value is >= l.
void extend_to(TwistSequence& tw, long l);
// n with t_n < l <= t_{n+1}; 0 for l <= t_0 (index extension D1).
int bracket(const TwistSequence& tw, long l);

// Phi(l) = 2 t_n^{theta/2}/(l - t_n) - 1, and 2 t_0^{theta/2} - 1 for l <= t_0.
Real twist_phi(long l, const TwistSequence& tw, long prec = 0);

enum class GrowthMode { Paper, Toy };

struct GrowthSchedule {
    GrowthMode mode = GrowthMode::Paper;
    mpq_class base = 2;               // toy mode only; paper mode uses e
    mpq_class exponent_scale = mpq_class(1, 8);
    long gain = 32;                   // toy mode size gain applied to bit lengths
    double digit_budget = 1e6;        // largest a_j allowed, in decimal digits

    static GrowthSchedule paper() { return {}; }
    static GrowthSchedule toy(const mpq_class& base = 2, const mpq_class& scale = mpq_class(1, 8));
    std::string describe() const;
};

// Per-level twist data: c(l), nu~(l), nu(l), q~_l.
struct LevelRecord {
    long level = 0;
    int bracket_n = 0;
    long t_n = 2;
    mpz_class c;
    std::array<mpz_class, 2> nu_tilde;
    mpz_class gcd;
    std::array<mpz_class, 2> nu;
    mpz_class q_tilde;
};

struct ConstructionState {
    long level = 0;
    GrowthSchedule schedule;
    TwistSequence twist;
    mpz_class qbar_m1 = 1;                    // q-bar_{-1}
    std::vector<mpz_class> p, q, pb, qb;      // indices 0..2*level
    std::vector<mpz_class> a;                 // a[0] unused, a_1..a_{2*level}
    std::vector<LevelRecord> levels;          // records for levels 0..level

    const mpz_class& qbar(long j) const { return j < 0 ? qbar_m1 : qb[j]; }
    const LevelRecord& record(long l) const { return levels.at(l); }
    bool operator==(const ConstructionState& o) const;
};

ConstructionState seed_state(const mpq_class& theta, const GrowthSchedule& schedule,
                             const mpz_class& q0 = 100, const mpz_class& qb0 = 101,
                             const mpz_class& p0 = 1, const mpz_class& pb0 = 1);
ConstructionState construct_step(const ConstructionState& s, const GrowthSchedule& schedule);
ConstructionState construct_levels(const mpq_class& theta, const GrowthSchedule& schedule, int levels);

// Natural-log exponents x with a = floor(e^x) for a_{2l+1} and a_{2l+2}.
struct LevelExponents {
    double odd = 0, even = 0;
    double band_factor = 1;   // x_even * t_n log t_n / q~_l (1 in paper mode up to rounding)
};
LevelExponents level_exponents(const ConstructionState& s, long l);

// floor(base^x) certified by interval evaluation; exposed for tests.
mpz_class certified_floor_exp(const mpq_class& x, long start_prec = 0);

std::array<mpq_class, 2> alpha_at(const ConstructionState& s, long k);
std::array<mpq_class, 2> alpha_approx(const ConstructionState& s);

// ||alpha.l|| for a rational alpha, exact.
mpq_class exact_nearest_distance(const std::array<mpq_class, 2>& alpha, const mpz_class& l1, const mpz_class& l2);

// Index maps: 2^{m(l)-1} < q~_l <= 2^{m(l)}; q~_{l(n)} <= 2^n < q~_{l(n)+1}
// (l(n) = 0 while 2^n < q~_0; -1 if beyond the computed levels); t_{k(l)} < l <= t_{k(l)+1}.
long index_m(const ConstructionState& s, long l);
long index_l(const ConstructionState& s, long n);
long index_k(const ConstructionState& s, long l);

VerificationReport verify_construction(const ConstructionState& s);
VerificationReport verify_divisor_bounds(const ConstructionState& s, long level, long annulus_cap = 0);
// max_scale bounds the brute-force scans; Omega(q~_l) is always exact via
// lattice reduction, for q~_l up to omega_bits_cap bits.
VerificationReport verify_criterio(const ConstructionState& s, long max_scale, long omega_bits_cap = 200000);

nlohmann::json state_to_json(const ConstructionState& s);
ConstructionState state_from_json(const nlohmann::json& j);

}  // namespace wb
