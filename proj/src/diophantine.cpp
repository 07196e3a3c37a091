#include "wb/diophantine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "wb/errors.hpp"

namespace wb {

long sup_norm(const Lattice& l) {
    long m = 0;
    for (long v : l) m = std::max(m, std::labs(v));
    return m;
}

long l1_norm(const Lattice& l) {
    long s = 0;
    for (long v : l) s += std::labs(v);
    return s;
}

double l2_norm(const Lattice& l) {
    double s = 0;
    for (long v : l) s += double(v) * double(v);
    return std::sqrt(s);
}

bool is_zero(const Lattice& l) {
    return std::all_of(l.begin(), l.end(), [](long v) { return v == 0; });
}

Real nearest_int_distance(const Real& x) {
    if (!x.is_finite()) fail(ErrorKind::ValidationError, "nearest_int_distance of a non-finite value");
    Real r = Real::with_precision(x.precision());
    // x - round(x) is exact in binary floating point
    mpfr_rint(r.get(), x.get(), MPFR_RNDN);
    mpfr_sub(r.get(), x.get(), r.get(), MPFR_RNDN);
    mpfr_abs(r.get(), r.get(), MPFR_RNDN);
    return r;
}

ContinuedFraction continued_fraction(const Real& x, int depth) {
    if (depth < 1) fail(ErrorKind::ValidationError, "continued_fraction depth must be >= 1");
    ContinuedFraction cf;
    cf.depth = depth;
    cf.precision = x.precision();
    cf.a0 = floor_to_mpz(x);
    cf.a.assign(depth + 1, 0);
    cf.a[0] = cf.a0;

    Real rem = x - Real::from_mpz(cf.a0, x.precision());
    cf.alpha.push_back(rem);
    for (int k = 1; k <= depth; ++k) {
        if (rem.is_zero())
            fail(ErrorKind::RationalTruncation,
                 "remainder vanished at depth " + std::to_string(k - 1) + " (rational at working precision)");
        Real inv = Real(1.0, x.precision()) / rem;
        cf.a[k] = floor_to_mpz(inv);
        rem = inv - Real::from_mpz(cf.a[k], x.precision());
        cf.alpha.push_back(rem);
    }

    // convergents of the fractional part: q_{-1}=0, q_0=1, p_{-1}=1, p_0=0
    cf.p.assign(depth + 1, 0);
    cf.q.assign(depth + 1, 0);
    mpz_class pm1 = 1, qm1 = 0;
    cf.p[0] = 0;
    cf.q[0] = 1;
    for (int k = 1; k <= depth; ++k) {
        const mpz_class& pp = k >= 2 ? cf.p[k - 2] : pm1;
        const mpz_class& qq = k >= 2 ? cf.q[k - 2] : qm1;
        cf.p[k] = cf.a[k] * cf.p[k - 1] + pp;
        cf.q[k] = cf.a[k] * cf.q[k - 1] + qq;
    }
    Real b(1.0, x.precision());
    for (int k = 0; k <= depth; ++k) {
        b *= cf.alpha[k];
        cf.beta.push_back(b);
    }
    return cf;
}

BryunoSums bryuno_1d(const Real& x, int depth) {
    ContinuedFraction cf = continued_fraction(x, depth);
    long prec = x.precision();
    if (cf.alpha[depth].is_zero())
        fail(ErrorKind::RationalTruncation, "last remainder vanished (rational at working precision)");
    BryunoSums s{Real::with_precision(prec), Real::with_precision(prec)};
    Real one(1.0, prec);
    for (int n = 0; n <= depth; ++n) {
        Real weight = n == 0 ? one : cf.beta[n - 1];
        s.b_function += weight * log(one / cf.alpha[n]);
    }
    mpz_class a_next = floor_to_mpz(one / cf.alpha[depth]);
    for (int k = 0; k <= depth; ++k) {
        mpz_class q_next = k < depth ? cf.q[k + 1] : a_next * cf.q[depth] + (depth >= 1 ? cf.q[depth - 1] : mpz_class(0));
        s.q_sum += log(Real::from_mpz(q_next, prec)) / Real::from_mpz(cf.q[k], prec);
    }
    return s;
}

Real dot(const RealVec& alpha, const Lattice& l) {
    long prec = 0;
    for (const auto& a : alpha) prec = std::max(prec, a.precision());
    Real s = Real::with_precision(prec);
    Real t = Real::with_precision(prec);
    for (size_t i = 0; i < alpha.size(); ++i) {
        mpfr_mul_si(t.get(), alpha[i].get(), l[i], MPFR_RNDN);
        mpfr_add(s.get(), s.get(), t.get(), MPFR_RNDN);
    }
    return s;
}

namespace {

// Odometer over the half of [-N,N]^d whose leading nonzero entry is positive,
// visited in lexicographic order. The callback receives the vector and the
// distance ||alpha.l||.
template <class F>
void scan_half_ball(const RealVec& alpha, long N, F&& visit) {
    const size_t d = alpha.size();
    if (d == 0) fail(ErrorKind::ValidationError, "empty frequency vector");
    long prec = 0;
    for (const auto& a : alpha) prec = std::max(prec, a.precision());

    mpfr_t s, t, r;
    mpfr_inits2(prec, s, t, r, (mpfr_ptr)0);
    // resonance threshold relative to the working precision
    mpfr_t floor_tol;
    mpfr_init2(floor_tol, 64);

    Lattice l(d, -N);
    l[0] = 0;
    // first vector of the half ball in lex order: (0,...,0,1)
    auto leading_positive = [&]() {
        for (long v : l)
            if (v != 0) return v > 0;
        return false;
    };
    for (size_t i = 1; i < d; ++i) l[i] = -N;
    while (true) {
        if (leading_positive()) {
            mpfr_set_zero(s, 1);
            for (size_t i = 0; i < d; ++i) {
                mpfr_mul_si(t, alpha[i].get(), l[i], MPFR_RNDN);
                mpfr_add(s, s, t, MPFR_RNDN);
            }
            mpfr_rint(r, s, MPFR_RNDN);
            mpfr_sub(r, s, r, MPFR_RNDN);
            mpfr_abs(r, r, MPFR_RNDN);
            // ||alpha.l|| below a few ulps of |alpha.l| is indistinguishable from 0
            mpfr_set_ui_2exp(floor_tol, 1, -(prec - 8), MPFR_RNDN);
            mpfr_abs(t, s, MPFR_RNDN);
            if (mpfr_cmp_ui(t, 1) > 0) mpfr_mul(floor_tol, floor_tol, t, MPFR_RNDU);
            if (mpfr_lessequal_p(r, floor_tol)) {
                mpfr_clears(s, t, r, floor_tol, (mpfr_ptr)0);
                std::string v = "(";
                for (size_t i = 0; i < d; ++i) v += (i ? "," : "") + std::to_string(l[i]);
                fail(ErrorKind::ResonanceDetected, "||alpha.l|| vanishes at working precision for l = " + v + ")");
            }
            visit(l, r);
        }
        // advance odometer
        size_t i = d;
        while (i > 0) {
            --i;
            if (l[i] < N) {
                ++l[i];
                for (size_t j = i + 1; j < d; ++j) l[j] = -N;
                break;
            }
            if (i == 0) {
                mpfr_clears(s, t, r, floor_tol, (mpfr_ptr)0);
                return;
            }
        }
    }
}

bool lex_less(const Lattice& a, const Lattice& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

SmallDivisorRecord omega_min(const RealVec& alpha, long N) {
    if (N < 1) fail(ErrorKind::ValidationError, "omega_min needs N >= 1");
    long prec = 0;
    for (const auto& a : alpha) prec = std::max(prec, a.precision());
    SmallDivisorRecord rec;
    rec.N = N;
    rec.value = Real(1.0, prec);
    scan_half_ball(alpha, N, [&](const Lattice& l, mpfr_srcptr r) {
        if (mpfr_less_p(r, rec.value.get())) {
            mpfr_set(rec.value.get(), r, MPFR_RNDN);
            rec.argmin = l;
        }
    });
    return rec;
}

SmallDivisorRecord omega_min_1d_fast(const Real& alpha, long N) {
    if (N < 1) fail(ErrorKind::ValidationError, "omega_min needs N >= 1");
    // enough quotients to pass N: q_k grows at least like Fibonacci
    int depth = 2;
    while (std::pow(1.618, depth - 2) <= double(N)) ++depth;
    ContinuedFraction cf;
    try {
        cf = continued_fraction(alpha, depth);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::RationalTruncation) throw;
        fail(ErrorKind::ResonanceDetected, "alpha is rational at working precision");
    }
    int k = 0;
    for (int j = 0; j <= depth; ++j)
        if (cf.q[j] <= N) k = j;
    SmallDivisorRecord rec;
    rec.N = N;
    rec.argmin = {cf.q[k].get_si()};
    rec.value = nearest_int_distance(dot({alpha}, rec.argmin));
    return rec;
}

std::vector<SmallDivisorRecord> omega_dyadic(const RealVec& alpha, int K) {
    if (K < 1) fail(ErrorKind::ValidationError, "dyadic table needs K >= 1");
    long prec = 0;
    for (const auto& a : alpha) prec = std::max(prec, a.precision());
    std::vector<SmallDivisorRecord> shell(K);
    for (int k = 1; k <= K; ++k) {
        shell[k - 1].N = 1L << k;
        shell[k - 1].value = Real(1.0, prec);
    }
    scan_half_ball(alpha, 1L << K, [&](const Lattice& l, mpfr_srcptr r) {
        long m = sup_norm(l);
        int k = 1;
        while ((1L << k) < m) ++k;
        auto& s = shell[k - 1];
        if (mpfr_less_p(r, s.value.get())) {
            mpfr_set(s.value.get(), r, MPFR_RNDN);
            s.argmin = l;
        }
    });
    // prefix minima over nested balls, ties to the lexicographically smaller vector
    for (int k = 1; k < K; ++k) {
        const auto& prev = shell[k - 1];
        auto& cur = shell[k];
        if (prev.value < cur.value || (prev.value == cur.value && lex_less(prev.argmin, cur.argmin))) {
            cur.value = prev.value;
            cur.argmin = prev.argmin;
        }
    }
    return shell;
}

Real bryuno_partial_sum(const std::vector<SmallDivisorRecord>& table, int K) {
    if (K < 1 || K > (int)table.size()) fail(ErrorKind::ValidationError, "partial sum depth outside table");
    long prec = table[0].value.precision();
    Real s = Real::with_precision(prec);
    Real one(1.0, prec);
    for (int k = 1; k <= K; ++k) {
        Real term = log(one / table[k - 1].value);
        mpfr_div_2si(term.get(), term.get(), k, MPFR_RNDN);
        s += term;
    }
    return s;
}

Real bryuno_partial_sum(const RealVec& alpha, int K) {
    return bryuno_partial_sum(omega_dyadic(alpha, K), K);
}

mpq_class cf_rational(const mpz_class& a0, const std::vector<mpz_class>& a) {
    mpq_class x = 0;
    for (auto it = a.rbegin(); it != a.rend(); ++it) {
        if (*it <= 0) fail(ErrorKind::ValidationError, "partial quotients must be positive");
        x = 1 / (mpq_class(*it) + x);
    }
    return x + a0;
}

std::vector<mpz_class> liouville_quotients(int K) {
    if (K < 1 || K > 4) fail(ErrorKind::ValidationError, "Liouville quotients are kept to K in [1, 4]");
    std::vector<mpz_class> a;
    mpz_class qm = 0, q = 1;   // q_{-1}, q_0
    for (int k = 0; k < K; ++k) {
        mpz_class ak = mpz_class(1) << q.get_ui();
        a.push_back(ak);
        mpz_class qn = ak * q + qm;
        qm = q;
        q = qn;
    }
    return a;
}

}  // namespace wb
