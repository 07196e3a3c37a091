#pragma once

#include <gmpxx.h>

#include <array>
#include <vector>

#include "wb/real.hpp"

namespace wb {

using Lattice = std::vector<long>;
using RealVec = std::vector<Real>;

long sup_norm(const Lattice& l);
long l1_norm(const Lattice& l);
double l2_norm(const Lattice& l);
bool is_zero(const Lattice& l);

// min over integers m of |x - m|, in [0, 1/2]
Real nearest_int_distance(const Real& x);

struct ContinuedFraction {
    mpz_class a0;                  // integer part of the input
    std::vector<mpz_class> a;      // a[k] = a_k for k = 1..depth, a[0] unused (= a0)
    std::vector<mpz_class> p, q;   // convergents p_k/q_k, k = 0..depth
    std::vector<Real> alpha;       // remainders alpha_0..alpha_depth
    std::vector<Real> beta;        // beta_k = alpha_0...alpha_k, k = 0..depth
    int depth = 0;
    long precision = 0;
};

// Gauss map expansion x = a0 + 1/(a_1 + 1/(a_2 + ...)).
// Throws RationalTruncation when a remainder vanishes before depth.
ContinuedFraction continued_fraction(const Real& x, int depth);

// Value of the finite expansion a0 + 1/(a_1 + 1/(... + 1/a_K)), exact.
mpq_class cf_rational(const mpz_class& a0, const std::vector<mpz_class>& a);
// Quotients a_1..a_K of the synthetic Liouville-type number a_{k+1} = 2^{q_k}
// (q_0 = 1): 2, 4, 512, 2^4610, ...; K <= 4 keeps the integers finite.
std::vector<mpz_class> liouville_quotients(int K);

struct BryunoSums {
    Real b_function;   // sum_{n=0..depth} beta_{n-1} log(1/alpha_n)
    Real q_sum;        // sum_{k=0..depth} log(q_{k+1}) / q_k
};
BryunoSums bryuno_1d(const Real& x, int depth);

struct SmallDivisorRecord {
    long N = 0;
    Real value;
    Lattice argmin;
};

// Real dot product alpha . l at the precision of alpha.
Real dot(const RealVec& alpha, const Lattice& l);

// Exhaustive sup-norm scan over 0 < |l| <= N. Of l and -l the one with a
// positive leading nonzero entry is reported; remaining ties go to the
// lexicographically smallest vector.
SmallDivisorRecord omega_min(const RealVec& alpha, long N);

// d = 1 only: best approximations are convergent denominators, so
// Omega(N) = ||q_k alpha|| for the largest q_k <= N.
SmallDivisorRecord omega_min_1d_fast(const Real& alpha, long N);

// Omega(2^k) for k = 1..K from a single scan of the 2^K ball.
std::vector<SmallDivisorRecord> omega_dyadic(const RealVec& alpha, int K);

Real bryuno_partial_sum(const RealVec& alpha, int K);
// Same sum from a precomputed table (entry k-1 holds Omega(2^k)).
Real bryuno_partial_sum(const std::vector<SmallDivisorRecord>& table, int K);

// Exact minimum of ||(A l_1 + B l_2)/D|| over 0 < |l|_inf <= Q, for huge
// rational frequencies where a scan is hopeless. A verification aid only:
// omega_min stays the scan. The value is num/D; the
// argmin follows the omega_min sign and tie conventions.
struct LinearFormMin {
    mpz_class num;
    mpz_class den;
    std::array<mpz_class, 2> argmin;
    long candidates = 0;   // lattice points inspected
};
LinearFormMin min_linear_form_2d(const mpz_class& A, const mpz_class& B, const mpz_class& D,
                                 const mpz_class& Q);

}  // namespace wb
