#include <cmath>
#include <sstream>

#include "wb/construction.hpp"
#include "wb/diophantine.hpp"
#include "wb/errors.hpp"

namespace wb {

namespace {

const char* kD1Note =
    "index extension: Phi(l) = 2 t_0^{theta/2} - 1 and bracket n = 0 for l <= t_0";

double ln_z(const mpz_class& z) {
    if (z == 0) return -INFINITY;
    long e;
    double m = mpz_get_d_2exp(&e, z.get_mpz_t());
    return std::log(std::fabs(m)) + double(e) * std::log(2.0);
}

// log2(rhs/lhs) for positive integers, the margin of lhs <= rhs
double bits_margin(const mpz_class& lhs, const mpz_class& rhs) {
    return (ln_z(rhs) - ln_z(lhs)) / std::log(2.0);
}

mpz_class zpow(const mpz_class& b, unsigned long e) {
    mpz_class r;
    mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
    return r;
}

mpz_class zgcd(const mpz_class& a, const mpz_class& b) {
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return g;
}

std::vector<std::string> base_header(const ConstructionState& s) {
    return {kD1Note, s.schedule.describe(), "theta = " + s.twist.theta.get_str(),
            "levels computed: 0.." + std::to_string(s.level)};
}

// alpha_{.,k} . l mod 1 as numerator over the fixed denominator D = q_k qbar_k.
struct ExactAlpha {
    mpz_class A, B, D;
    ExactAlpha(const ConstructionState& s, long k) {
        D = s.q[k] * s.qb[k];
        A = s.p[k] * s.qb[k];
        B = s.pb[k] * s.q[k];
        mpz_fdiv_r(A.get_mpz_t(), A.get_mpz_t(), D.get_mpz_t());
        mpz_fdiv_r(B.get_mpz_t(), B.get_mpz_t(), D.get_mpz_t());
    }
    // numerator of ||alpha.l|| over D
    mpz_class dist(long l1, long l2, mpz_class& tmp) const {
        mpz_class r = A * l1;
        tmp = B * l2;
        r += tmp;
        mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), D.get_mpz_t());
        tmp = D - r;
        return tmp < r ? tmp : r;
    }
    mpz_class dist(const mpz_class& l1, const mpz_class& l2) const {
        mpz_class r = A * l1 + B * l2;
        mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), D.get_mpz_t());
        mpz_class o = D - r;
        return o < r ? o : r;
    }
    double ln_dist(const mpz_class& num) const { return ln_z(num) - ln_z(D); }
};

bool parallel(long l1, long l2, const std::array<mpz_class, 2>& v) {
    mpz_class cross = v[1] * l1 - v[0] * l2;
    return cross == 0;
}

}  // namespace

VerificationReport verify_construction(const ConstructionState& s) {
    VerificationReport rep;
    rep.title = "construction identities";
    rep.header = base_header(s);
    rep.header.push_back("lemma3 checks: the limit alpha is proxied by the deepest approximant alpha_{.," + std::to_string(2 * s.level) +
                         "} with tail bound 2/a_{2L}^2");
    rep.header.push_back("l = 0 uses max(l,1) in the factor-l bounds");
    const long L = s.level;

    for (long l = 0; l <= L; ++l) {
        const mpz_class& q = s.q[2 * l];
        const mpz_class& qb = s.qb[2 * l];
        const mpz_class& qbm = s.qbar(2 * l - 1);
        mpz_class lo = qbm * qbm * q;
        mpz_class hi = q * zpow(qbm, 4);
        rep.add("iter.lower", l, lo <= qb, bits_margin(lo, qb), "qbar_{2l-1}^2 q_{2l} <= qbar_{2l}; margin in bits");
        rep.add("iter.upper", l, qb <= hi, bits_margin(qb, hi), "qbar_{2l} <= q_{2l} qbar_{2l-1}^4; margin in bits");
        mpz_class g = zgcd(q, qb);
        rep.add("iter.gcd", l, g <= qbm, bits_margin(g, qbm), "GCD(q_{2l}, qbar_{2l}) <= qbar_{2l-1}; margin in bits");

        const LevelRecord& r = s.levels[l];
        bool def_ok = r.nu_tilde[0] == q * r.c && r.nu_tilde[1] == -qb && r.gcd == zgcd(r.nu_tilde[0], r.nu_tilde[1]) &&
                      r.nu[0] * r.gcd == r.nu_tilde[0] && r.nu[1] * r.gcd == r.nu_tilde[1] &&
                      r.q_tilde == std::max(abs(r.nu[0]), abs(r.nu[1]));
        rep.add("nu.definition", l, def_ok, 0, "nu~ = (q c, -qbar), nu = nu~/GCD, q~ = |nu|");
        mpz_class gn = zgcd(r.nu[0], r.nu[1]);
        rep.add("nu.coprime", l, gn == 1, 0, "GCD(nu_1, nu_2) = " + gn.get_str());

        long lf = std::max(l, 1L);
        mpz_class nt = std::max(abs(r.nu_tilde[0]), abs(r.nu_tilde[1]));
        mpz_class lhs = r.q_tilde * 2 * lf * zpow(qbm, 5);
        rep.add("primastimetta", l, lhs >= nt, bits_margin(nt, lhs), "q~_l >= |nu~(l)|/(2l qbar_{2l-1}^5); margin in bits");

        mpz_class cb = 2 * lf * zpow(qbm, 4);
        rep.add("c_bound.qbar_2l-1", l, r.c <= cb, bits_margin(r.c, cb), "c(l) <= 2l qbar_{2l-1}^4");
        if (l < L) {
            mpz_class cb2 = 2 * lf * zpow(s.qb[2 * l + 1], 4);
            rep.add("c_bound.qbar_2l+1", l, r.c <= cb2, bits_margin(r.c, cb2), "c(l) <= 2l qbar_{2l+1}^4");
        }
    }

    for (long j = 1; j <= 2 * L; ++j) {
        mpz_class g = zgcd(s.q[j], s.p[j]);
        rep.add("urca.q", j, g <= s.q[j - 1], bits_margin(g, s.q[j - 1]), "GCD(q_j, p_j) <= q_{j-1}");
        mpz_class gb = zgcd(s.qb[j], s.pb[j]);
        rep.add("urca.qbar", j, gb <= s.qb[j - 1], bits_margin(gb, s.qb[j - 1]), "GCD(qbar_j, pbar_j) <= qbar_{j-1}");
    }
    for (long j = 1; j + 1 <= 2 * L; ++j) {
        mpz_class sq = s.a[j] * s.a[j];
        rep.add("a.square_growth", j, s.a[j + 1] > sq, bits_margin(sq, s.a[j + 1]), "a_{j+1} > a_j^2");
    }
    for (long l = 0; l < L; ++l) {
        const mpz_class& a = s.a[2 * l + 2];
        mpz_class g = zgcd(a, a * s.qb[2 * l + 1] * s.q[2 * l + 1] + 1);
        rep.add("cremina.gcd", l, g == 1, 0, "GCD(a_{2l+2}, a_{2l+2} qbar_{2l+1} q_{2l+1} + 1) = 1");
    }

    // alpha_{i,k} strictly increasing; compare p_k q_{k+1} < p_{k+1} q_k
    for (long k = 0; k < 2 * L; ++k) {
        bool inc1 = s.p[k] * s.q[k + 1] < s.p[k + 1] * s.q[k];
        bool inc2 = s.pb[k] * s.qb[k + 1] < s.pb[k + 1] * s.qb[k];
        rep.add("alpha.increasing", k, inc1 && inc2, 0, "alpha_{i,k} < alpha_{i,k+1}, i = 1,2");
    }

    // lemma3: ordering of the limit, via the deepest approximant
    if (L >= 1) {
        const long K = 2 * L;
        const mpz_class& aK = s.a[K];
        for (long l = 0; l < L; ++l) {
            const long k = 2 * l + 1;
            const mpz_class& a = s.a[2 * l + 2];
            for (int i = 0; i < 2; ++i) {
                const mpz_class& pk = i == 0 ? s.p[k] : s.pb[k];
                const mpz_class& qk = i == 0 ? s.q[k] : s.qb[k];
                const mpz_class& pK = i == 0 ? s.p[K] : s.pb[K];
                const mpz_class& qK = i == 0 ? s.q[K] : s.qb[K];
                // |pK/qK - pk/qk| + 2/aK^2 <= 2/a  <=>  (|pK qk - pk qK| aK^2 + 2 qK qk) a <= 2 qK qk aK^2
                mpz_class diff = abs(pK * qk - pk * qK);
                mpz_class den = qK * qk;
                mpz_class aK2 = aK * aK;
                mpz_class lhs = (diff * aK2 + 2 * den) * a;
                mpz_class rhs = 2 * den * aK2;
                rep.add(i == 0 ? "lemma3.alpha1" : "lemma3.alpha2", l, lhs <= rhs, bits_margin(lhs, rhs),
                        "|alpha_{i,2l+1} - alpha_i| <= 2/a_{2l+2}; proxy alpha_{.,2L} + tail 2/a_{2L}^2");
            }
        }
    }
    return rep;
}

VerificationReport verify_divisor_bounds(const ConstructionState& s, long level, long annulus_cap) {
    if (level < 0 || level >= s.level)
        fail(ErrorKind::ValidationError, "divisor bounds need a completed level (a_{2l+2} computed)");
    const LevelRecord& r = s.levels[level];
    if (r.q_tilde > 100000)
        fail(ErrorKind::ScanTooLarge, "q~_" + std::to_string(level) + " = " + r.q_tilde.get_str() +
                                          " exceeds the exhaustive-scan guard 1e5");
    const long Q = r.q_tilde.get_si();
    const long l = level;
    VerificationReport rep;
    rep.title = "small-divisor bounds at level " + std::to_string(level);
    rep.header = base_header(s);
    rep.header.push_back("scans use the exact approximant alpha_{.," + std::to_string(2 * l + 2) + "}");

    const ExactAlpha al(s, 2 * l + 2);
    mpz_class tmp, best = al.D;
    long b1 = 0, b2 = 0;
    // sup-norm half ball, leading nonzero entry positive, lexicographic order
    for (long l1 = 0; l1 <= Q; ++l1) {
        for (long l2 = -Q; l2 <= Q; ++l2) {
            if (l1 == 0 && l2 <= 0) continue;
            mpz_class d = al.dist(l1, l2, tmp);
            if (d < best) {
                best = d;
                b1 = l1;
                b2 = l2;
            }
        }
    }
    if (best == 0) fail(ErrorKind::ResonanceDetected, "exact approximant is resonant inside the scan");

    const mpz_class& a = s.a[2 * l + 2];
    mpz_class X = a * s.qb[2 * l + 1] * s.q[2 * l + 1] + 1;
    // best/D >= 1/(2X)
    mpz_class lhs = 2 * X * best;
    rep.add("stoqua.lower", l, lhs >= al.D, bits_margin(al.D, lhs), "Omega(q~_l) >= 1/(2(a_{2l+2} qbar q + 1)); exact");
    long lf = std::max(l, 1L);
    mpz_class up_num = 8 * zpow(s.qb[2 * l + 1], 5) * lf;
    // best/D <= up_num/a
    rep.add("stoqua.upper", l, best * a <= up_num * al.D, bits_margin(best * a, up_num * al.D),
            "Omega(q~_l) <= 8 qbar_{2l+1}^5 max(l,1)/a_{2l+2}; exact");

    bool is_nu = (mpz_class(b1) == r.nu[0] && mpz_class(b2) == r.nu[1]) ||
                 (mpz_class(b1) == -r.nu[0] && mpz_class(b2) == -r.nu[1]);
    rep.add("remarkino.argmin", l, is_nu, 0,
            "argmin over |l| <= q~ is (" + std::to_string(b1) + "," + std::to_string(b2) + "), expected +-nu(l)");

    // stability of the argmin under the next approximant, when it exists
    if (2 * l + 4 <= 2 * s.level) {
        const ExactAlpha al2(s, 2 * l + 4);
        mpz_class best2 = al2.D;
        long c1 = 0, c2 = 0;
        for (long l1 = 0; l1 <= Q; ++l1)
            for (long l2 = -Q; l2 <= Q; ++l2) {
                if (l1 == 0 && l2 <= 0) continue;
                mpz_class d = al2.dist(l1, l2, tmp);
                if (d < best2) {
                    best2 = d;
                    c1 = l1;
                    c2 = l2;
                }
            }
        rep.add("argmin.stable", l, c1 == b1 && c2 == b2, 0, "same argmin on alpha_{.,2l+4}");
    }

    // annulus q~_l <= |l|_1 < min(sqrt(q~_{l+1}), cap)
    const long cap = annulus_cap > 0 ? annulus_cap : 4 * Q;
    const mpz_class& qn = s.levels[l + 1].q_tilde;
    mpz_class sq;
    mpz_sqrt(sq.get_mpz_t(), qn.get_mpz_t());
    mpz_class ceil_sqrt = sq * sq == qn ? sq : sq + 1;   // |l|_1 < sqrt(qn) <=> |l|_1 < ceil_sqrt
    const bool truncated = !(ceil_sqrt <= cap);
    const long hi1 = truncated ? cap : ceil_sqrt.get_si();
    const long t = r.t_n;
    double c1_bound = 3.0 * double(Q) / double(t * t);
    mpz_class min_np = al.D;
    for (long l1 = 0; l1 < hi1; ++l1) {
        for (long l2 = -(hi1 - 1); l2 < hi1; ++l2) {
            if (l1 == 0 && l2 <= 0) continue;
            long n1 = std::labs(l1) + std::labs(l2);
            if (n1 < Q || n1 >= hi1) continue;
            if (parallel(l1, l2, r.nu)) continue;
            mpz_class d = al.dist(l1, l2, tmp);
            if (d < min_np) min_np = d;
        }
    }
    double worst = -al.ln_dist(min_np);
    std::ostringstream note;
    note << "log(1/||alpha.l||) <= 3 q~/t_n^2 = " << c1_bound << " for non-parallel l with " << Q
         << " <= |l|_1 < " << hi1 << "; worst " << worst;
    rep.add("C1.annulus", l, worst <= c1_bound, c1_bound - worst, note.str());
    if (!truncated) {
        rep.header.push_back("C1 annulus scanned completely up to sqrt(q~_{l+1})");
    } else {
        rep.header.push_back("C1 annulus truncated at |l|_1 < " + std::to_string(cap) + " (floor sqrt(q~_{l+1}) = " +
                             sq.get_str() + ")");
        rep.header.push_back("C2 annulus sqrt(q~_{l+1}) <= |l|_1 < q~_{l+1} outside the scan budget: skipped");
    }

    // parallel multiples m nu(l) inside the annulus
    if (l >= 2) {
        const double ll = double(l) * std::log(double(l));
        const mpz_class nu1 = abs(r.nu[0]) + abs(r.nu[1]);
        for (long m = 1; m * Q < hi1; ++m) {
            mpz_class d = al.dist(r.nu[0] * m, r.nu[1] * m);
            double v = -al.ln_dist(d) / (double(m) * nu1.get_d());
            double lo = 1.0 / (4.0 * m * ll), hi = 4.0 / (m * ll);
            rep.add("sottoradice", l, lo <= v && v <= hi, std::min(v - lo, hi - v),
                    "m = " + std::to_string(m) + ": 1/(4|m| l log l) <= log(1/||alpha.l||)/|l|_1 <= 4/(|m| l log l)");
        }
    } else {
        rep.header.push_back("sottoradice bounds not applicable at l <= 1 (l log l <= 0)");
    }
    return rep;
}

VerificationReport verify_criterio(const ConstructionState& s, long max_scale, long omega_bits_cap) {
    if (max_scale > 100000) fail(ErrorKind::ScanTooLarge, "max_scale exceeds the scan guard 1e5");
    VerificationReport rep;
    rep.title = "criterion conditions 1-5";
    rep.header = base_header(s);
    if (s.level < 1) {
        rep.header.push_back("insufficient levels: the conditions compare consecutive levels");
        rep.add("insufficient_levels", -1, false, 0, "need at least two completed levels");
        return rep;
    }
    if (s.schedule.mode == GrowthMode::Toy)
        rep.header.push_back("toy-scale, not paper-rate: band constants multiplied by the toy exponent factor");
    const long L = s.level;

    // 1: q~_{l+1} > 4 q~_l
    for (long l = 0; l < L; ++l) {
        mpz_class lhs = 4 * s.levels[l].q_tilde;
        const mpz_class& rhs = s.levels[l + 1].q_tilde;
        rep.add("criterio.1", l, rhs > lhs, bits_margin(lhs, rhs), "q~_{l+1} > 4 q~_l; margin in bits");
    }

    // 2: band for q~_l^{-1} log(1/Omega(q~_l)), compared in log space since
    // the terms under- and overflow doubles past level 2
    const ExactAlpha deep(s, 2 * L);
    for (long l = 0; l < L; ++l) {
        const LevelRecord& r = s.levels[l];
        const double t = double(r.t_n);
        const double tl = t * std::log(t);
        // S is the band centre scale: log(1/Omega) must lie in [S/2, 4S]
        double lnS;
        std::string scale;
        if (s.schedule.mode == GrowthMode::Paper) {
            lnS = ln_z(r.q_tilde) - std::log(tl);
            scale = "S = q~/(t log t)";
        } else {
            lnS = std::log(level_exponents(s, l).even);
            std::ostringstream os;
            os << "S = log a_" << 2 * l + 2 << " (log of the toy band factor " << lnS + std::log(tl) - ln_z(r.q_tilde)
               << "; toy-scale, not paper-rate)";
            scale = os.str();
        }
        if (long(mpz_sizeinbase(r.q_tilde.get_mpz_t(), 2)) > omega_bits_cap) {
            rep.add("criterio.2", l, false, 0, "Omega(q~_l) not computed: q~_l exceeds the lattice budget");
            continue;
        }
        // the relation alpha_{2l+1}.nu(l) in Z that would put Omega at nu(l)
        {
            mpz_class rel = s.p[2 * l] * r.c - s.pb[2 * l], res;
            mpz_fdiv_r(res.get_mpz_t(), rel.get_mpz_t(), r.gcd.get_mpz_t());
            const mpz_class pd = deep.dist(r.nu[0], r.nu[1]);
            std::ostringstream rn;
            rn << "(p_{2l} c - pbar_{2l}) mod GCD = " << (mpz_sizeinbase(res.get_mpz_t(), 2) <= 64 ? res.get_str() : "(large)")
               << ", GCD has " << mpz_sizeinbase(r.gcd.get_mpz_t(), 2) << " bits; margin = log(1/||alpha_{.," << 2 * L
               << "} . nu(l)||)";
            rep.add("remarkino.relation", l, res == 0, pd == 0 ? INFINITY : ln_z(deep.D) - ln_z(pd), rn.str());
        }
        const LinearFormMin m = min_linear_form_2d(deep.A, deep.B, deep.D, r.q_tilde);
        std::ostringstream note;
        const bool at_nu = m.argmin[0] == abs(r.nu[0]) && m.argmin[1] == (r.nu[0] < 0 ? -r.nu[1] : r.nu[1]);
        if (m.num == 0) {
            note << "Omega(q~_l) = 0 on alpha_{.," << 2 * L << "}";
            rep.add("criterio.2", l, false, -INFINITY, note.str());
            continue;
        }
        const double log_inv = ln_z(deep.D) - ln_z(m.num);
        const double lr = std::log(log_inv) - lnS;
        const bool ok = std::log(0.5) <= lr && lr <= std::log(4.0);
        note << "log(1/Omega(q~_l)) = " << log_inv << ", ratio to S = " << std::exp(lr) << " in [0.5, 4]; " << scale
             << "; exact lattice minimum on alpha_{.," << 2 * L << "}, argmin " << (at_nu ? "= nu(l)" : "!= nu(l)")
             << "; margin = min log-ratio";
        rep.add("criterio.2", l, ok, std::min(lr - std::log(0.5), std::log(4.0) - lr), note.str());
    }

    // 3: angles between nu~ directions of levels sharing a bracket
    for (long l1 = 0; l1 <= L; ++l1)
        for (long l2 = l1 + 1; l2 <= L; ++l2) {
            const LevelRecord& a = s.levels[l1];
            const LevelRecord& b = s.levels[l2];
            if (a.bracket_n != b.bracket_n) continue;
            mpz_class cross = a.nu_tilde[0] * b.nu_tilde[1] - a.nu_tilde[1] * b.nu_tilde[0];
            mpz_class dotp = a.nu_tilde[0] * b.nu_tilde[0] + a.nu_tilde[1] * b.nu_tilde[1];
            Real cr = Real::from_mpz(abs(cross), 256), dt = Real::from_mpz(dotp, 256);
            Real ang = Real::with_precision(256);
            mpfr_atan2(ang.get(), cr.get(), dt.get(), MPFR_RNDN);
            double theta = ang.to_double();
            double tn = double(a.t_n);
            double C = theta * std::pow(tn, s.twist.theta.get_d() / 2);
            std::ostringstream note;
            note << "levels " << l1 << "," << l2 << ": angle " << theta << " rad, cross sign "
                 << (cross > 0 ? "+" : cross < 0 ? "-" : "0") << ", implied C = angle * t_n^{theta/2} = " << C;
            rep.add("criterio.3", l1, cross != 0 && theta > 0, C, note.str());
        }

    // 4: k_n over non-parallel l with |l| <= 2^n
    double partial = 0;
    for (long n = 1; (1L << n) <= max_scale; ++n) {
        long ln = index_l(s, n);
        if (ln < 0) break;
        const long N = 1L << n;
        const long k = std::min(2 * L, 2 * ln + 4);
        const ExactAlpha al(s, k);
        const auto& nu = s.levels[ln].nu;
        mpz_class tmp, best = al.D;
        for (long l1 = 0; l1 <= N; ++l1)
            for (long l2 = -N; l2 <= N; ++l2) {
                if (l1 == 0 && l2 <= 0) continue;
                if (parallel(l1, l2, nu)) continue;
                mpz_class d = al.dist(l1, l2, tmp);
                if (d < best) best = d;
            }
        double term = -al.ln_dist(best) / double(N);
        partial += term;
        std::ostringstream note;
        note << "l(n) = " << ln << ", 2^-n log(1/k_n) = " << term << ", partial sum " << partial
             << " (alpha_{.," << k << "})";
        rep.add("criterio.4", n, std::isfinite(term) && best > 0, term, note.str());
    }

    // 5: per-l annulus bounds at levels small enough to scan
    for (long l = 0; l < L; ++l) {
        if (s.levels[l].q_tilde > max_scale) {
            rep.header.push_back("criterio.5 at level " + std::to_string(l) + ": q~ beyond max_scale, skipped");
            continue;
        }
        VerificationReport sub = verify_divisor_bounds(s, l, max_scale);
        for (auto e : sub.entries) {
            e.name = "criterio.5." + e.name;
            rep.entries.push_back(e);
        }
        for (size_t i = 4; i < sub.header.size(); ++i) rep.header.push_back(sub.header[i]);
    }
    return rep;
}

}  // namespace wb
