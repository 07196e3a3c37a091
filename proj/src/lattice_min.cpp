#include <algorithm>
#include <climits>
#include <functional>

#include "wb/diophantine.hpp"
#include "wb/errors.hpp"

namespace wb {

namespace {

using Row = std::array<mpz_class, 3>;

mpz_class dot3(const Row& a, const Row& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

mpz_class round_div(const mpz_class& a, const mpz_class& b) {
    // nearest integer to a/b, b > 0
    mpz_class r = 2 * a + b, d = 2 * b;
    mpz_fdiv_q(r.get_mpz_t(), r.get_mpz_t(), d.get_mpz_t());
    return r;
}

// Integral LLL (delta = 3/4) in dimension 3, all quantities exact.
// b is 1-based (b[1..3]); on return d[i] = Gram determinants, lam the
// scaled Gram-Schmidt coefficients.
struct IntegralLLL {
    Row b[4];
    Row u[4];   // coefficient rows: b = u * (input basis)
    mpz_class d[4];
    mpz_class lam[4][4];

    bool init() {
        d[0] = 1;
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= i; ++j) {
                mpz_class u = dot3(b[i], b[j]);
                for (int k = 1; k < j; ++k) {
                    u = d[k] * u - lam[i][k] * lam[j][k];
                    mpz_divexact(u.get_mpz_t(), u.get_mpz_t(), d[k - 1].get_mpz_t());
                }
                if (j < i)
                    lam[i][j] = u;
                else
                    d[i] = u;
            }
        return d[1] != 0 && d[2] != 0 && d[3] != 0;
    }

    void red(int k, int l) {
        mpz_class two = 2 * abs(lam[k][l]);
        if (two <= d[l]) return;
        mpz_class q = round_div(lam[k][l], d[l]);
        for (int c = 0; c < 3; ++c) {
            b[k][c] -= q * b[l][c];
            u[k][c] -= q * u[l][c];
        }
        lam[k][l] -= q * d[l];
        for (int i = 1; i < l; ++i) lam[k][i] -= q * lam[l][i];
    }

    void swap(int k) {
        std::swap(b[k], b[k - 1]);
        std::swap(u[k], u[k - 1]);
        for (int j = 1; j < k - 1; ++j) std::swap(lam[k][j], lam[k - 1][j]);
        mpz_class L = lam[k][k - 1];
        mpz_class B = d[k - 2] * d[k] + L * L;
        mpz_divexact(B.get_mpz_t(), B.get_mpz_t(), d[k - 1].get_mpz_t());
        for (int i = k + 1; i <= 3; ++i) {
            mpz_class t = lam[i][k];
            mpz_class nk = d[k] * lam[i][k - 1] - L * t;
            mpz_divexact(nk.get_mpz_t(), nk.get_mpz_t(), d[k - 1].get_mpz_t());
            mpz_class nk1 = B * t + L * nk;
            mpz_divexact(nk1.get_mpz_t(), nk1.get_mpz_t(), d[k].get_mpz_t());
            lam[i][k] = nk;
            lam[i][k - 1] = nk1;
        }
        d[k - 1] = B;
    }

    bool reduce() {
        for (int i = 1; i <= 3; ++i)
            for (int c = 0; c < 3; ++c) u[i][c] = (i == c + 1);
        if (!init()) return false;
        int k = 2;
        while (k <= 3) {
            red(k, k - 1);
            mpz_class lhs = 4 * d[k] * d[k - 2];
            mpz_class rhs = 3 * d[k - 1] * d[k - 1] - 4 * lam[k][k - 1] * lam[k][k - 1];
            if (lhs < rhs) {
                swap(k);
                k = std::max(2, k - 1);
            } else {
                for (int l = k - 2; l >= 1; --l) red(k, l);
                ++k;
            }
        }
        return true;
    }
};

// Lattice of (W l_1, W l_2, N.l - m 2^P) sized for a box of radius Q.
struct FormLattice {
    mpz_class N1, N2, twoP, Z, W;
    // Nf = floor(alpha 2^Pf) with Pf at least the precision needed here.
    FormLattice(const mpz_class& Nf1, const mpz_class& Nf2, unsigned long Pf, const mpz_class& Q) {
        // alpha^ = N / 2^P with 0 <= alpha - alpha^ < 2^-P. Every l with
        // ||alpha.l|| <= 1/Q^2 (Dirichlet guarantees one) then lies in the
        // box |l_i| <= Q, |N.l - m 2^P| <= Z.
        const unsigned long P = precision_for(Q);
        mpz_ui_pow_ui(twoP.get_mpz_t(), 2, P);
        mpz_fdiv_q_2exp(N1.get_mpz_t(), Nf1.get_mpz_t(), Pf - P);
        mpz_fdiv_q_2exp(N2.get_mpz_t(), Nf2.get_mpz_t(), Pf - P);
        mpz_class Q2 = Q * Q;
        mpz_cdiv_q(Z.get_mpz_t(), twoP.get_mpz_t(), Q2.get_mpz_t());
        Z += 2 * Q + 1;
        mpz_cdiv_q(W.get_mpz_t(), Z.get_mpz_t(), Q.get_mpz_t());
    }
    // explicit precision and z-radius, N computed from alpha = a/D
    FormLattice(const mpz_class& a, const mpz_class& b, const mpz_class& D, unsigned long P, const mpz_class& Q,
                const mpz_class& z) : Z(z) {
        mpz_ui_pow_ui(twoP.get_mpz_t(), 2, P);
        mpz_mul_2exp(N1.get_mpz_t(), a.get_mpz_t(), P);
        mpz_mul_2exp(N2.get_mpz_t(), b.get_mpz_t(), P);
        mpz_fdiv_q(N1.get_mpz_t(), N1.get_mpz_t(), D.get_mpz_t());
        mpz_fdiv_q(N2.get_mpz_t(), N2.get_mpz_t(), D.get_mpz_t());
        mpz_cdiv_q(W.get_mpz_t(), Z.get_mpz_t(), Q.get_mpz_t());
    }
    static unsigned long precision_for(const mpz_class& Q) { return 3 * mpz_sizeinbase(Q.get_mpz_t(), 2) + 64; }
    Row image(const Row& c) const { return {c[0] * W, c[1] * W, c[0] * N1 + c[1] * N2 + c[2] * twoP}; }
};

// LLL with floating point Gram-Schmidt over an exact basis. Entries keep
// their own exponents, so wildly different row sizes are fine as long as
// the basis is not too far from reduced. Returns false when precision runs
// out; the caller then falls back to IntegralLLL.
struct FloatLLL {
    Row b[3];
    Row u[3];
    long prec;
    Real f[3][3], r[3][3], mu[3][3];

    explicit FloatLLL(long p) : prec(p) {}

    void load(int i) {
        for (int c = 0; c < 3; ++c) f[i][c] = Real::from_mpz(b[i][c], prec);
    }
    Real fdot(int i, int j) const { return f[i][0] * f[j][0] + f[i][1] * f[j][1] + f[i][2] * f[j][2]; }

    bool gram_schmidt(int k) {
        for (int i = 0; i <= k; ++i) {
            for (int j = 0; j < i; ++j) {
                r[i][j] = fdot(i, j);
                for (int m = 0; m < j; ++m) r[i][j] -= mu[j][m] * r[i][m];
                mu[i][j] = r[i][j] / r[j][j];
            }
            r[i][i] = fdot(i, i);
            for (int m = 0; m < i; ++m) r[i][i] -= mu[i][m] * r[i][m];
            if (r[i][i].sign() <= 0) return false;
        }
        return true;
    }

    bool reduce() {
        for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 3; ++c) u[i][c] = (i == c);
            load(i);
        }
        const Real eta(0.51, prec), delta(0.99, prec);
        int k = 1;
        long guard = 0;
        while (k < 3) {
            if (++guard > 10000000) return false;
            // size reduction of row k, repeated until stable
            for (int pass = 0;; ++pass) {
                if (pass > 4 * prec || !gram_schmidt(k)) return false;
                bool changed = false;
                for (int j = k - 1; j >= 0; --j) {
                    if (abs(mu[k][j]) <= eta) continue;
                    Real xr = Real::with_precision(prec);
                    mpfr_rint(xr.get(), mu[k][j].get(), MPFR_RNDN);
                    mpz_class X;
                    mpfr_get_z(X.get_mpz_t(), xr.get(), MPFR_RNDN);
                    for (int c = 0; c < 3; ++c) {
                        b[k][c] -= X * b[j][c];
                        u[k][c] -= X * u[j][c];
                    }
                    for (int m = 0; m < j; ++m) mu[k][m] -= xr * mu[j][m];
                    mu[k][j] -= xr;
                    changed = true;
                }
                if (!changed) break;
                load(k);
            }
            Real lhs = delta * r[k - 1][k - 1];
            Real rhs = r[k][k] + mu[k][k - 1] * mu[k][k - 1] * r[k - 1][k - 1];
            if (lhs > rhs) {
                std::swap(b[k], b[k - 1]);
                std::swap(u[k], u[k - 1]);
                load(k);
                load(k - 1);
                k = std::max(1, k - 1);
            } else {
                ++k;
            }
        }
        return true;
    }
};

bool canonical_less(const std::array<mpz_class, 2>& a, const std::array<mpz_class, 2>& b) {
    return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
}

}  // namespace

LinearFormMin min_linear_form_2d(const mpz_class& A, const mpz_class& B, const mpz_class& D,
                                 const mpz_class& Q) {
    if (D <= 0) fail(ErrorKind::ValidationError, "min_linear_form_2d: denominator must be positive");
    if (Q < 1) fail(ErrorKind::ValidationError, "min_linear_form_2d: Q must be >= 1");
    mpz_class a, bb;
    mpz_fdiv_r(a.get_mpz_t(), A.get_mpz_t(), D.get_mpz_t());
    mpz_fdiv_r(bb.get_mpz_t(), B.get_mpz_t(), D.get_mpz_t());

    // Solve for Q_j = 2^{64 j} first on truncated bases, carrying the
    // unimodular transform forward, so every reduction works on small
    // numbers. The last reduction is exact.
    const unsigned long qbits = mpz_sizeinbase(Q.get_mpz_t(), 2);
    const unsigned long stride = 64;
    const unsigned long Pf = FormLattice::precision_for(Q);
    mpz_class Nf1, Nf2;
    mpz_mul_2exp(Nf1.get_mpz_t(), a.get_mpz_t(), Pf);
    mpz_mul_2exp(Nf2.get_mpz_t(), bb.get_mpz_t(), Pf);
    mpz_fdiv_q(Nf1.get_mpz_t(), Nf1.get_mpz_t(), D.get_mpz_t());
    mpz_fdiv_q(Nf2.get_mpz_t(), Nf2.get_mpz_t(), D.get_mpz_t());
    Row U[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    auto apply = [&](const Row* v) {
        Row next[3];
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 3; ++c) next[i][c] = v[i][0] * U[0][c] + v[i][1] * U[1][c] + v[i][2] * U[2][c];
        for (int i = 0; i < 3; ++i) U[i] = next[i];
    };
    // Each stage only adds a skew of about 2^{3 stride}, so a modest
    // floating point precision suffices.
    auto restage = [&](const FormLattice& fl) {
        Row img[3];
        long lo = LONG_MAX, hi = 0;
        for (int i = 0; i < 3; ++i) {
            img[i] = fl.image(U[i]);
            long top = 0;
            for (int c = 0; c < 3; ++c) top = std::max(top, long(mpz_sizeinbase(img[i][c].get_mpz_t(), 2)));
            lo = std::min(lo, top);
            hi = std::max(hi, top);
        }
        // Rows of very different length need precision to match.
        for (long prec = hi - lo + 3 * long(stride) + 128; prec <= 4 * (hi - lo) + 4096; prec *= 2) {
            FloatLLL fll(prec);
            for (int i = 0; i < 3; ++i) fll.b[i] = img[i];
            if (fll.reduce()) {
                apply(fll.u);
                return;
            }
        }
        IntegralLLL lll;
        for (int i = 0; i < 3; ++i) lll.b[i + 1] = img[i];
        if (!lll.reduce()) fail(ErrorKind::ValidationError, "lattice basis is degenerate");
        apply(lll.u + 1);
    };
    for (unsigned long sb = stride; sb < qbits; sb += stride) {
        mpz_class Qs;
        mpz_ui_pow_ui(Qs.get_mpz_t(), 2, sb);
        restage(FormLattice(Nf1, Nf2, Pf, Qs));
    }
    LinearFormMin best;
    best.den = D;
    best.num = D;
    bool found = false;

    // First pass uses the Dirichlet radius. If the box holds too many
    // lattice points (a very good relation and its multiples), the radius
    // is shrunk to the best value seen and the search repeated.
    const long kLeafCap = 1L << 16;
    FormLattice fl(Nf1, Nf2, Pf, Q);
    for (;;) {
        restage(fl);
        // exact pass: also yields the Gram-Schmidt data for the enumeration
        IntegralLLL lll;
        for (int i = 0; i < 3; ++i) lll.b[i + 1] = fl.image(U[i]);
        if (!lll.reduce()) fail(ErrorKind::ValidationError, "lattice basis is degenerate");
        const mpz_class& W = fl.W;
        const mpz_class WQ = W * Q;
        const mpz_class R2 = 2 * WQ * WQ + fl.Z * fl.Z;

        // Fincke-Pohst over the reduced basis. Bounds are computed in
        // floating point and widened; candidates are filtered exactly.
        const long prec = 192;
        Real Bn[4], mu[4][4];
        for (int i = 1; i <= 3; ++i) {
            Bn[i] = Real::from_mpz(lll.d[i], prec) / Real::from_mpz(lll.d[i - 1], prec);
            for (int j = 1; j < i; ++j) mu[i][j] = Real::from_mpz(lll.lam[i][j], prec) / Real::from_mpz(lll.d[j], prec);
        }
        const Real R2r = Real::from_mpz(R2, prec) * Real(1 + 1e-20, prec);
        const Real slack(1e-20, prec);
        long coeff[4] = {0, 0, 0, 0};
        long leaves = 0;
        bool capped = false;
        const mpz_class before = best.num;

        auto visit = [&]() {
            Row v = {0, 0, 0};
            for (int i = 1; i <= 3; ++i)
                for (int c = 0; c < 3; ++c) v[c] += coeff[i] * lll.b[i][c];
            if (!mpz_divisible_p(v[0].get_mpz_t(), W.get_mpz_t()) || !mpz_divisible_p(v[1].get_mpz_t(), W.get_mpz_t()))
                return;
            std::array<mpz_class, 2> l = {v[0] / W, v[1] / W};
            if (l[0] == 0 && l[1] == 0) return;
            if (abs(l[0]) > Q || abs(l[1]) > Q) return;
            if (l[0] < 0 || (l[0] == 0 && l[1] < 0)) l = {-l[0], -l[1]};
            ++best.candidates;
            mpz_class r = a * l[0] + bb * l[1];
            mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), D.get_mpz_t());
            mpz_class o = D - r;
            if (o < r) r = o;
            if (!found || r < best.num || (r == best.num && canonical_less(l, best.argmin))) {
                best.num = r;
                best.argmin = l;
                found = true;
            }
        };

        std::function<void(int, const Real&)> enumerate = [&](int i, const Real& used) {
            Real c(0.0, prec);
            for (int j = i + 1; j <= 3; ++j) c -= Real(double(coeff[j]), prec) * mu[j][i];
            Real room = R2r - used;
            if (room.sign() < 0) return;
            Real r = sqrt(room / Bn[i]) + slack * (abs(c) + Real(1.0, prec));
            if (r > Real(double(kLeafCap), prec)) {
                capped = true;
                return;
            }
            const long lo = mpfr_get_si(Real(c - r).get(), MPFR_RNDU);
            const long hi = mpfr_get_si(Real(c + r).get(), MPFR_RNDD);
            if (lo > hi) return;
            // centre-out order finds small values early
            const long mid = std::clamp(mpfr_get_si(c.get(), MPFR_RNDN), lo, hi);
            auto take = [&](long u) {
                coeff[i] = u;
                Real off = Real(double(u), prec) - c;
                Real next = used + off * off * Bn[i];
                if (i == 1) {
                    visit();
                    if (++leaves > kLeafCap) capped = true;
                } else {
                    enumerate(i - 1, next);
                }
            };
            take(mid);
            for (long step = 1; !capped && (mid - step >= lo || mid + step <= hi); ++step) {
                if (mid + step <= hi && !capped) take(mid + step);
                if (mid - step >= lo && !capped) take(mid - step);
            }
            coeff[i] = 0;
        };
        enumerate(3, Real(0.0, prec));

        // an exact relation: nothing can beat it
        if (found && best.num == 0) return best;
        if (!capped) {
            if (!found)
                fail(ErrorKind::ValidationError, "min_linear_form_2d: enumeration found no vector below the Dirichlet bound");
            return best;
        }
        if (!found || best.num >= before)
            fail(ErrorKind::ValidationError, "min_linear_form_2d: enumeration budget exhausted without progress");

        // Shrink to ||alpha.l|| <= best: precision so the truncation error
        // 2Q 2^-P stays well below the radius.
        const unsigned long P = qbits + mpz_sizeinbase(D.get_mpz_t(), 2) - mpz_sizeinbase(best.num.get_mpz_t(), 2) + 66;
        mpz_class z;
        mpz_mul_2exp(z.get_mpz_t(), best.num.get_mpz_t(), P);
        mpz_cdiv_q(z.get_mpz_t(), z.get_mpz_t(), D.get_mpz_t());
        z += 2 * Q + 1;
        fl = FormLattice(a, bb, D, P, Q, z);
    }
}

}  // namespace wb
