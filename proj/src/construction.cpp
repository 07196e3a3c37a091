#include "wb/construction.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "wb/errors.hpp"

namespace wb {

mpq_class parse_rational(const std::string& s) {
    if (s.empty()) fail(ErrorKind::ValidationError, "empty rational");
    mpq_class r;
    auto slash = s.find('/');
    auto dot = s.find('.');
    try {
        if (slash != std::string::npos) {
            r = mpq_class(s, 10);
        } else if (dot != std::string::npos) {
            std::string digits = s.substr(0, dot) + s.substr(dot + 1);
            mpz_class num(digits.empty() || digits == "-" ? "0" : digits, 10);
            mpz_class den;
            mpz_ui_pow_ui(den.get_mpz_t(), 10, s.size() - dot - 1);
            r = mpq_class(num, den);
        } else {
            r = mpq_class(mpz_class(s, 10));
        }
    } catch (const std::invalid_argument&) {
        fail(ErrorKind::ValidationError, "cannot parse rational '" + s + "'");
    }
    if (r.get_den() == 0) fail(ErrorKind::ValidationError, "zero denominator in '" + s + "'");
    r.canonicalize();
    return r;
}

std::string rational_str(const mpq_class& q) { return q.get_str(); }

// ---------------------------------------------------------------------------
// twist sequence

namespace {

// floor(t^{P/Q}) = integer Q-th root of t^P
long floor_power(long t, const mpq_class& theta) {
    mpz_class tp, r;
    mpz_ui_pow_ui(tp.get_mpz_t(), t, theta.get_num().get_ui());
    mpz_root(r.get_mpz_t(), tp.get_mpz_t(), theta.get_den().get_ui());
    return r.get_si();
}

void check_theta(const mpq_class& theta) {
    if (theta <= 0 || theta >= mpq_class(1, 2))
        fail(ErrorKind::ValidationError, "theta must lie in (0, 1/2)");
}

}  // namespace

TwistSequence t_sequence(const mpq_class& theta, int count) {
    check_theta(theta);
    if (count < 1) fail(ErrorKind::ValidationError, "t_sequence count must be >= 1");
    TwistSequence tw{theta, {2}};
    for (int n = 0; n < count; ++n) tw.t.push_back(tw.t.back() + floor_power(tw.t.back(), theta));
    return tw;
}

void extend_to(TwistSequence& tw, long l) {
    if (tw.t.empty()) tw.t.push_back(2);
    while (tw.t.back() < l) tw.t.push_back(tw.t.back() + floor_power(tw.t.back(), tw.theta));
}

int bracket(const TwistSequence& tw, long l) {
    if (l <= tw.t.front()) return 0;
    if (tw.t.back() < l) fail(ErrorKind::ValidationError, "twist sequence too short for l = " + std::to_string(l));
    // first index with t_{n+1} >= l
    auto it = std::lower_bound(tw.t.begin(), tw.t.end(), l);
    return int(it - tw.t.begin()) - 1;
}

namespace {

// Closed interval [lo, hi] of MPFR values at a common precision.
struct Iv {
    mpfr_t lo, hi;
    explicit Iv(long prec) { mpfr_inits2(prec, lo, hi, (mpfr_ptr)0); }
    ~Iv() { mpfr_clears(lo, hi, (mpfr_ptr)0); }
    Iv(const Iv&) = delete;
    Iv& operator=(const Iv&) = delete;
};

void set_q(Iv& x, const mpq_class& q) {
    mpfr_set_q(x.lo, q.get_mpq_t(), MPFR_RNDD);
    mpfr_set_q(x.hi, q.get_mpq_t(), MPFR_RNDU);
}

// positive intervals only
void mul_pos(Iv& r, const Iv& a, const Iv& b) {
    mpfr_mul(r.lo, a.lo, b.lo, MPFR_RNDD);
    mpfr_mul(r.hi, a.hi, b.hi, MPFR_RNDU);
}
void div_pos(Iv& r, const Iv& a, const Iv& b) {
    mpfr_div(r.lo, a.lo, b.hi, MPFR_RNDD);
    mpfr_div(r.hi, a.hi, b.lo, MPFR_RNDU);
}
void log_pos(Iv& r, const Iv& a) {
    mpfr_log(r.lo, a.lo, MPFR_RNDD);
    mpfr_log(r.hi, a.hi, MPFR_RNDU);
}

// Ziv-style loop: evaluate an enclosure, accept once both ends share a floor.
mpz_class certified_floor(const std::function<void(Iv&, long)>& eval, long prec) {
    for (int attempt = 0; attempt < 12; ++attempt, prec *= 2) {
        Iv v(prec);
        eval(v, prec);
        mpz_class flo, fhi;
        mpfr_get_z(flo.get_mpz_t(), v.lo, MPFR_RNDD);
        mpfr_get_z(fhi.get_mpz_t(), v.hi, MPFR_RNDD);
        if (flo == fhi) return flo;
    }
    fail(ErrorKind::ValidationError, "floor could not be certified (value too close to an integer)");
}

long start_precision(double value_bits) {
    long need = long(std::max(0.0, value_bits)) + 64;
    return std::max(need, default_precision());
}

// t^{theta/2} enclosure
void twist_root(Iv& r, long t, const mpq_class& theta) {
    mpz_class tp;
    mpz_ui_pow_ui(tp.get_mpz_t(), t, theta.get_num().get_ui());
    unsigned long k = 2 * theta.get_den().get_ui();
    mpfr_set_z(r.lo, tp.get_mpz_t(), MPFR_RNDD);
    mpfr_set_z(r.hi, tp.get_mpz_t(), MPFR_RNDU);
    mpfr_rootn_ui(r.lo, r.lo, k, MPFR_RNDD);
    mpfr_rootn_ui(r.hi, r.hi, k, MPFR_RNDU);
}

// Phi(l) enclosure
void phi_interval(Iv& r, long l, const TwistSequence& tw) {
    int n = bracket(tw, l);
    long tn = tw.t[n];
    long gap = l <= tw.t.front() ? 1 : l - tn;
    twist_root(r, tn, tw.theta);
    mpfr_mul_ui(r.lo, r.lo, 2, MPFR_RNDD);
    mpfr_mul_ui(r.hi, r.hi, 2, MPFR_RNDU);
    mpfr_div_ui(r.lo, r.lo, gap, MPFR_RNDD);
    mpfr_div_ui(r.hi, r.hi, gap, MPFR_RNDU);
    mpfr_sub_ui(r.lo, r.lo, 1, MPFR_RNDD);
    mpfr_sub_ui(r.hi, r.hi, 1, MPFR_RNDU);
}

// Phi(l) exactly when t_n^{theta/2} is rational (t_n^P a perfect 2Q-th power)
bool phi_rational(long l, const TwistSequence& tw, mpq_class& out) {
    int n = bracket(tw, l);
    long tn = tw.t[n];
    long gap = l <= tw.t.front() ? 1 : l - tn;
    mpz_class tp, root;
    mpz_ui_pow_ui(tp.get_mpz_t(), tn, tw.theta.get_num().get_ui());
    if (!mpz_root(root.get_mpz_t(), tp.get_mpz_t(), 2 * tw.theta.get_den().get_ui())) return false;
    out = mpq_class(2 * root, gap) - 1;
    out.canonicalize();
    return true;
}

}  // namespace

Real twist_phi(long l, const TwistSequence& tw, long prec) {
    if (l < 0) fail(ErrorKind::ValidationError, "twist_phi needs l >= 0");
    TwistSequence ext = tw;
    extend_to(ext, l);
    Real r = Real::with_precision(prec);
    Iv v(r.precision() + 32);
    phi_interval(v, l, ext);
    mpfr_set(r.get(), v.lo, MPFR_RNDN);
    return r;
}

mpz_class certified_floor_exp(const mpq_class& x, long start_prec) {
    double bits = x.get_d() / std::log(2.0);
    long prec = start_prec > 0 ? start_prec : start_precision(bits);
    return certified_floor(
        [&](Iv& v, long) {
            set_q(v, x);
            mpfr_exp(v.lo, v.lo, MPFR_RNDD);
            mpfr_exp(v.hi, v.hi, MPFR_RNDU);
        },
        prec);
}

// ---------------------------------------------------------------------------
// growth schedule

GrowthSchedule GrowthSchedule::toy(const mpq_class& base, const mpq_class& scale) {
    GrowthSchedule g;
    g.mode = GrowthMode::Toy;
    g.base = base;
    g.exponent_scale = scale;
    if (base <= 1) fail(ErrorKind::ValidationError, "toy base must exceed 1");
    if (scale <= 0 || scale > 1) fail(ErrorKind::ValidationError, "exponent scale must lie in (0, 1]");
    return g;
}

std::string GrowthSchedule::describe() const {
    std::ostringstream os;
    if (mode == GrowthMode::Paper) {
        os << "paper mode: a_{2l+1} = floor(e^{q~/t_n^2}), a_{2l+2} = floor(e^{q~/(t_n log t_n)})";
    } else {
        os << "toy mode (toy-scale, not paper-rate): base " << base.get_str() << ", scale "
           << exponent_scale.get_str() << ", gain " << gain
           << "; a_{2l+1} = floor(base^{gain*scale*bits(q~)/t_0^2}), a_{2l+2} = floor(base^{gain*scale*bits(q~)/(t_0 log t_0)})";
    }
    return os.str();
}

namespace {

enum class Parity { Odd, Even };

// Enclosure of the natural exponent x with a = floor(e^x).
void exponent_interval(Iv& x, const GrowthSchedule& g, const LevelRecord& rec, long t0, Parity par) {
    long prec = mpfr_get_prec(x.lo);
    if (g.mode == GrowthMode::Paper) {
        long t = rec.t_n;
        if (par == Parity::Odd) {
            set_q(x, mpq_class(rec.q_tilde, mpz_class(t) * t));
        } else {
            Iv lt(prec), q(prec);
            mpfr_set_ui(lt.lo, t, MPFR_RNDD);
            mpfr_set_ui(lt.hi, t, MPFR_RNDU);
            log_pos(lt, lt);
            mpfr_mul_ui(lt.lo, lt.lo, t, MPFR_RNDD);
            mpfr_mul_ui(lt.hi, lt.hi, t, MPFR_RNDU);
            set_q(q, mpq_class(rec.q_tilde));
            div_pos(x, q, lt);
        }
        return;
    }
    long bits = long(mpz_sizeinbase(rec.q_tilde.get_mpz_t(), 2));
    mpq_class y = mpq_class(g.gain) * g.exponent_scale * bits;
    Iv lb(prec), yv(prec);
    set_q(lb, g.base);
    log_pos(lb, lb);
    if (par == Parity::Odd) {
        set_q(yv, y / (t0 * t0));
        mul_pos(x, yv, lb);
    } else {
        Iv lt(prec), tmp(prec);
        mpfr_set_ui(lt.lo, t0, MPFR_RNDD);
        mpfr_set_ui(lt.hi, t0, MPFR_RNDU);
        log_pos(lt, lt);
        set_q(yv, y / t0);
        mul_pos(tmp, yv, lb);
        div_pos(x, tmp, lt);
    }
}

double exponent_value(const GrowthSchedule& g, const LevelRecord& rec, long t0, Parity par) {
    Iv x(64);
    exponent_interval(x, g, rec, t0, par);
    return mpfr_get_d(x.hi, MPFR_RNDU);
}

mpz_class growth_term(const GrowthSchedule& g, const LevelRecord& rec, long t0, Parity par, long index) {
    double x = exponent_value(g, rec, t0, par);
    double digits = x / std::log(10.0);
    if (!(digits <= g.digit_budget)) {
        std::ostringstream os;
        os << "a_" << index << " = floor(e^x) with x ~ " << x << " would have ~" << digits
           << " digits, beyond the budget of " << g.digit_budget;
        fail(ErrorKind::ExponentOverflow, os.str());
    }
    if (g.mode == GrowthMode::Toy && par == Parity::Odd) {
        // base^{P/Q} with rational base and exponent: floor is an exact integer root
        long bits = long(mpz_sizeinbase(rec.q_tilde.get_mpz_t(), 2));
        mpq_class y = mpq_class(g.gain) * g.exponent_scale * bits / (t0 * t0);
        y.canonicalize();
        unsigned long P = y.get_num().get_ui(), Q = y.get_den().get_ui();
        mpz_class u, v, r;
        mpz_pow_ui(u.get_mpz_t(), g.base.get_num_mpz_t(), P);
        mpz_pow_ui(v.get_mpz_t(), g.base.get_den_mpz_t(), P);
        mpz_fdiv_q(u.get_mpz_t(), u.get_mpz_t(), v.get_mpz_t());
        mpz_root(r.get_mpz_t(), u.get_mpz_t(), Q);
        return r;
    }
    return certified_floor(
        [&](Iv& v, long) {
            exponent_interval(v, g, rec, t0, par);
            mpfr_exp(v.lo, v.lo, MPFR_RNDD);
            mpfr_exp(v.hi, v.hi, MPFR_RNDU);
        },
        start_precision(x / std::log(2.0)));
}

LevelRecord make_record(const ConstructionState& s, long l) {
    LevelRecord r;
    r.level = l;
    r.bracket_n = bracket(s.twist, l);
    r.t_n = s.twist.t[r.bracket_n];
    const mpz_class& q = s.q[2 * l];
    const mpz_class& qb = s.qb[2 * l];
    double bits = double(mpz_sizeinbase(qb.get_mpz_t(), 2));
    mpq_class exact_phi;
    if (phi_rational(l, s.twist, exact_phi)) {
        mpq_class x = exact_phi * qb / q;
        mpz_fdiv_q(r.c.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
    } else r.c = certified_floor(
        [&](Iv& v, long) {
            phi_interval(v, l, s.twist);
            // multiply by the positive ratio qb/q, order preserving
            mpfr_mul_z(v.lo, v.lo, qb.get_mpz_t(), MPFR_RNDD);
            mpfr_mul_z(v.hi, v.hi, qb.get_mpz_t(), MPFR_RNDU);
            mpfr_div_z(v.lo, v.lo, q.get_mpz_t(), MPFR_RNDD);
            mpfr_div_z(v.hi, v.hi, q.get_mpz_t(), MPFR_RNDU);
        },
        start_precision(bits));
    r.nu_tilde = {q * r.c, -qb};
    mpz_gcd(r.gcd.get_mpz_t(), r.nu_tilde[0].get_mpz_t(), r.nu_tilde[1].get_mpz_t());
    r.nu = {r.nu_tilde[0] / r.gcd, r.nu_tilde[1] / r.gcd};
    r.q_tilde = std::max(abs(r.nu[0]), abs(r.nu[1]));
    return r;
}

}  // namespace

ConstructionState seed_state(const mpq_class& theta, const GrowthSchedule& schedule, const mpz_class& q0,
                             const mpz_class& qb0, const mpz_class& p0, const mpz_class& pb0) {
    check_theta(theta);
    if (q0 <= 0 || qb0 <= 0) fail(ErrorKind::ValidationError, "seed denominators must be positive");
    ConstructionState s;
    s.schedule = schedule;
    s.twist = t_sequence(theta, 1);
    s.p = {p0};
    s.q = {q0};
    s.pb = {pb0};
    s.qb = {qb0};
    s.a = {0};
    s.levels.push_back(make_record(s, 0));
    return s;
}

ConstructionState construct_step(const ConstructionState& s, const GrowthSchedule& g) {
    const long l = s.level;
    const LevelRecord& rec = s.levels.at(l);
    if (rec.c <= 0)
        fail(ErrorKind::ValidationError, "c(" + std::to_string(l) + ") = " + rec.c.get_str() + " is not positive");
    const long t0 = s.twist.t.front();

    mpz_class a1 = growth_term(g, rec, t0, Parity::Odd, 2 * l + 1);
    mpz_class a2 = growth_term(g, rec, t0, Parity::Even, 2 * l + 2);

    ConstructionState n = s;
    n.schedule = g;
    const mpz_class& q = s.q[2 * l];
    const mpz_class& qb = s.qb[2 * l];
    const mpz_class& p = s.p[2 * l];
    const mpz_class& pb = s.pb[2 * l];

    // odd half-step
    mpz_class q1 = a1 * q * q * rec.c;
    mpz_class qb1 = a1 * qb * qb;
    mpz_class p1 = a1 * q * rec.c * p + q;
    mpz_class pb1 = a1 * qb * pb + qb;
    // even half-step
    mpz_class A = a2 * q1 * qb1 + 1;
    mpz_class q2 = a2 * q1;
    mpz_class qb2 = A * qb1;
    mpz_class p2 = a2 * p1 + q1;
    mpz_class pb2 = pb1 * A + qb1;

    n.a.push_back(a1);
    n.a.push_back(a2);
    n.q.push_back(q1);
    n.qb.push_back(qb1);
    n.p.push_back(p1);
    n.pb.push_back(pb1);
    n.q.push_back(q2);
    n.qb.push_back(qb2);
    n.p.push_back(p2);
    n.pb.push_back(pb2);
    n.level = l + 1;
    extend_to(n.twist, n.level + 1);
    n.levels.push_back(make_record(n, n.level));
    return n;
}

ConstructionState construct_levels(const mpq_class& theta, const GrowthSchedule& g, int levels) {
    ConstructionState s = seed_state(theta, g);
    for (int i = 0; i < levels; ++i) s = construct_step(s, g);
    return s;
}

LevelExponents level_exponents(const ConstructionState& s, long l) {
    const LevelRecord& rec = s.levels.at(l);
    LevelExponents e;
    long t0 = s.twist.t.front();
    e.odd = exponent_value(s.schedule, rec, t0, Parity::Odd);
    e.even = exponent_value(s.schedule, rec, t0, Parity::Even);
    double t = double(rec.t_n);
    long ex;
    const double m = mpz_get_d_2exp(&ex, rec.q_tilde.get_mpz_t());
    e.band_factor = std::exp(std::log(e.even * t * std::log(t) / m) - double(ex) * std::log(2.0));
    return e;
}

std::array<mpq_class, 2> alpha_at(const ConstructionState& s, long k) {
    if (k < 0 || k >= (long)s.q.size()) fail(ErrorKind::ValidationError, "approximant index out of range");
    mpq_class a1(s.p[k], s.q[k]), a2(s.pb[k], s.qb[k]);
    a1.canonicalize();
    a2.canonicalize();
    return {a1, a2};
}

std::array<mpq_class, 2> alpha_approx(const ConstructionState& s) { return alpha_at(s, 2 * s.level); }

mpq_class exact_nearest_distance(const std::array<mpq_class, 2>& alpha, const mpz_class& l1, const mpz_class& l2) {
    mpq_class x = alpha[0] * l1 + alpha[1] * l2;
    mpz_class fl;
    mpz_fdiv_q(fl.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
    mpq_class frac = x - fl;
    mpq_class other = 1 - frac;
    return frac < other ? frac : other;
}

long index_m(const ConstructionState& s, long l) {
    const mpz_class& q = s.levels.at(l).q_tilde;
    // smallest m with q <= 2^m
    long m = long(mpz_sizeinbase(q.get_mpz_t(), 2));
    mpz_class pw = mpz_class(1) << (m - 1);
    return q <= pw ? m - 1 : m;
}

long index_l(const ConstructionState& s, long n) {
    mpz_class pw = mpz_class(1) << n;
    if (pw < s.levels.front().q_tilde) return 0;
    long best = -1;
    for (const auto& r : s.levels)
        if (r.q_tilde <= pw) best = r.level;
    // the next level must exceed 2^n for l(n) to be determined
    if (best == (long)s.levels.size() - 1) return -1;
    return best;
}

long index_k(const ConstructionState& s, long l) {
    TwistSequence tw = s.twist;
    extend_to(tw, l);
    return bracket(tw, l);
}

bool ConstructionState::operator==(const ConstructionState& o) const {
    auto rec_eq = [](const LevelRecord& x, const LevelRecord& y) {
        return x.level == y.level && x.bracket_n == y.bracket_n && x.t_n == y.t_n && x.c == y.c &&
               x.nu_tilde == y.nu_tilde && x.gcd == y.gcd && x.nu == y.nu && x.q_tilde == y.q_tilde;
    };
    if (levels.size() != o.levels.size()) return false;
    for (size_t i = 0; i < levels.size(); ++i)
        if (!rec_eq(levels[i], o.levels[i])) return false;
    return level == o.level && schedule.mode == o.schedule.mode && schedule.base == o.schedule.base &&
           schedule.exponent_scale == o.schedule.exponent_scale && schedule.gain == o.schedule.gain &&
           schedule.digit_budget == o.schedule.digit_budget && twist.theta == o.twist.theta &&
           twist.t == o.twist.t && qbar_m1 == o.qbar_m1 && p == o.p && q == o.q && pb == o.pb && qb == o.qb &&
           a == o.a;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

nlohmann::json zlist(const std::vector<mpz_class>& v) {
    auto j = nlohmann::json::array();
    for (const auto& z : v) j.push_back(z.get_str());
    return j;
}

std::vector<mpz_class> zread(const nlohmann::json& j) {
    std::vector<mpz_class> v;
    for (const auto& x : j) v.emplace_back(x.get<std::string>());
    return v;
}

}  // namespace

nlohmann::json state_to_json(const ConstructionState& s) {
    nlohmann::json j;
    j["format"] = "wb.construction.v1";
    j["level"] = s.level;
    j["theta"] = s.twist.theta.get_str();
    j["twist"] = s.twist.t;
    nlohmann::json g;
    g["mode"] = s.schedule.mode == GrowthMode::Paper ? "paper" : "toy";
    g["base"] = s.schedule.base.get_str();
    g["exponent_scale"] = s.schedule.exponent_scale.get_str();
    g["gain"] = s.schedule.gain;
    g["digit_budget"] = s.schedule.digit_budget;
    j["schedule"] = g;
    j["qbar_minus1"] = s.qbar_m1.get_str();
    j["p"] = zlist(s.p);
    j["q"] = zlist(s.q);
    j["pbar"] = zlist(s.pb);
    j["qbar"] = zlist(s.qb);
    j["a"] = zlist(s.a);
    j["levels"] = nlohmann::json::array();
    for (const auto& r : s.levels) {
        nlohmann::json x;
        x["level"] = r.level;
        x["bracket_n"] = r.bracket_n;
        x["t_n"] = r.t_n;
        x["c"] = r.c.get_str();
        x["nu_tilde"] = {r.nu_tilde[0].get_str(), r.nu_tilde[1].get_str()};
        x["gcd"] = r.gcd.get_str();
        x["nu"] = {r.nu[0].get_str(), r.nu[1].get_str()};
        x["q_tilde"] = r.q_tilde.get_str();
        j["levels"].push_back(x);
    }
    return j;
}

ConstructionState state_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "wb.construction.v1")
            fail(ErrorKind::SchemaMismatch, "unknown construction state format");
        ConstructionState s;
        s.level = j.at("level").get<long>();
        s.twist.theta = mpq_class(j.at("theta").get<std::string>());
        s.twist.t = j.at("twist").get<std::vector<long>>();
        const auto& g = j.at("schedule");
        s.schedule.mode = g.at("mode").get<std::string>() == "paper" ? GrowthMode::Paper : GrowthMode::Toy;
        s.schedule.base = mpq_class(g.at("base").get<std::string>());
        s.schedule.exponent_scale = mpq_class(g.at("exponent_scale").get<std::string>());
        s.schedule.gain = g.at("gain").get<long>();
        s.schedule.digit_budget = g.at("digit_budget").get<double>();
        s.qbar_m1 = mpz_class(j.at("qbar_minus1").get<std::string>());
        s.p = zread(j.at("p"));
        s.q = zread(j.at("q"));
        s.pb = zread(j.at("pbar"));
        s.qb = zread(j.at("qbar"));
        s.a = zread(j.at("a"));
        for (const auto& x : j.at("levels")) {
            LevelRecord r;
            r.level = x.at("level").get<long>();
            r.bracket_n = x.at("bracket_n").get<int>();
            r.t_n = x.at("t_n").get<long>();
            r.c = mpz_class(x.at("c").get<std::string>());
            r.nu_tilde = {mpz_class(x.at("nu_tilde")[0].get<std::string>()),
                          mpz_class(x.at("nu_tilde")[1].get<std::string>())};
            r.gcd = mpz_class(x.at("gcd").get<std::string>());
            r.nu = {mpz_class(x.at("nu")[0].get<std::string>()), mpz_class(x.at("nu")[1].get<std::string>())};
            r.q_tilde = mpz_class(x.at("q_tilde").get<std::string>());
            s.levels.push_back(r);
        }
        size_t n = 2 * s.level + 1;
        if (s.p.size() != n || s.q.size() != n || s.pb.size() != n || s.qb.size() != n || s.a.size() != n ||
            s.levels.size() != size_t(s.level + 1))
            fail(ErrorKind::SchemaMismatch, "construction state sequences have inconsistent lengths");
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("construction state: ") + e.what());
    } catch (const std::invalid_argument& e) {
        fail(ErrorKind::SchemaMismatch, std::string("construction state: bad integer: ") + e.what());
    }
}

}  // namespace wb
