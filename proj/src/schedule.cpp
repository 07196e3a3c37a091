#include "wb/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "wb/errors.hpp"
#include "wb/parallel.hpp"

namespace wb {

namespace {

const double kTwoPi = 2 * M_PI;

}  // namespace

bool orthogonal(double beta_dot_l, const Lattice& l) {
    double n1 = 0;
    for (long x : l) n1 += std::fabs(double(x));
    return beta_dot_l <= 1e-12 * n1;
}

// ---------------------------------------------------------------------------
// grid

DirectionGrid DirectionGrid::circle(int M) {
    if (M < 4) fail(ErrorKind::ValidationError, "direction grid needs at least 4 points");
    DirectionGrid g;
    g.d = 2;
    for (int i = 0; i < M; ++i) {
        double th = kTwoPi * i / M;
        g.beta.push_back({std::cos(th), std::sin(th)});
        g.angle.push_back(th);
    }
    g.spacing = 2 * std::sin(M_PI / M);
    return g;
}

DirectionGrid DirectionGrid::two_point() {
    DirectionGrid g;
    g.d = 1;
    g.beta = {{1, 0}, {-1, 0}};
    g.angle = {0, M_PI};
    g.spacing = 2;
    return g;
}

double DirectionGrid::chord(size_t i, size_t j) const {
    return std::hypot(beta[i][0] - beta[j][0], beta[i][1] - beta[j][1]);
}

double DirectionGrid::dot(size_t i, const Lattice& l) const {
    double s = beta[i][0] * double(l[0]);
    if (d == 2) s += beta[i][1] * double(l[1]);
    return s;
}

// ---------------------------------------------------------------------------
// weights

double WeightSequence::sum() const { return std::accumulate(c.begin(), c.end(), 0.0); }

double WeightSequence::at(long n) const { return n >= 0 && n < (long)c.size() ? c[n] : 0.0; }

double cutoff_weight(const WeightSequence& c, long n, const Lattice& l) {
    if (n < 0) fail(ErrorKind::ValidationError, "cutoff weight needs n >= 0");
    if (is_zero(l)) fail(ErrorKind::ZeroVector, "g(c, n, 0) is undefined");
    const long m = sup_norm(l);
    const long p = 1L << n;
    if (p < m && m <= 2 * p) return 1.0;
    if (m <= p) return std::exp(-double(p) * c.at(n));
    return 0.0;
}

double phi_weight(const Lattice& l, const std::array<double, 2>& beta, int d, double delta) {
    double s = beta[0] * double(l[0]);
    if (d == 2) s += beta[1] * double(l[1]);
    return std::exp(kTwoPi * std::fabs(s) * delta);
}

WeightSequence constant_weights(double value, long n_max, double gothic_d, long N) {
    WeightSequence w;
    w.c.assign(n_max + 1, value);
    w.gothic_d = gothic_d;
    w.N = N;
    w.recipe = "constant";
    return w;
}

WeightSequence appendix_weights(const DivisorTable& table, long n_max, double gothic_d, long N) {
    if ((1L << n_max) > table.radius) fail(ErrorKind::ValidationError, "divisor table too small for the weights");
    WeightSequence w;
    w.gothic_d = gothic_d;
    w.N = N;
    w.recipe = "appendix: c_n = 2 pi 2^-n log(1/Omega(2^n))";
    for (long n = 0; n <= n_max; ++n) w.c.push_back(kTwoPi * table.log_inv_omega(1L << n) / double(1L << n));
    return w;
}

RealVec construction_alpha(const ConstructionState& s, long prec) {
    auto al = alpha_approx(s);
    if (prec <= 0) prec = default_precision();
    return {Real::from_mpq(al[0], prec), Real::from_mpq(al[1], prec)};
}

WeightSequence construction_weights(const ConstructionState& s, long n_max, double C, double gothic_d, long N) {
    return construction_weights(s, DivisorTable::build(construction_alpha(s), 1L << n_max), n_max, C, gothic_d, N);
}

WeightSequence construction_weights(const ConstructionState& s, const DivisorTable& table, long n_max, double C,
                                    double gothic_d, long N) {
    if ((1L << n_max) > table.radius || table.d != 2)
        fail(ErrorKind::ValidationError, "divisor table does not cover the weights");
    WeightSequence w;
    w.C = C;
    w.gothic_d = gothic_d;
    w.N = N;
    w.recipe = "construction: C/(t (4n - log q~_l)^2) + C/(t (|4n - log q~_{l+1}| + 1)^2) + 2^-n log(1/k_n)";
    auto lnz = [](const mpz_class& z) {
        long e;
        double m = mpz_get_d_2exp(&e, z.get_mpz_t());
        return std::log(m) + double(e) * std::log(2.0);
    };
    for (long n = 0; n <= n_max; ++n) {
        long l = index_l(s, n);
        if (l < 0) fail(ErrorKind::ValidationError, "l(" + std::to_string(n) + ") lies beyond the computed levels");
        const double t = double(s.twist.t[index_k(s, l)]);
        const double a = 4.0 * n - lnz(s.record(l).q_tilde);
        const double b = std::fabs(4.0 * n - lnz(s.record(l + 1).q_tilde)) + 1;
        const auto& nu = s.record(l).nu;
        // k_n: smallest divisor off the nu(l(n)) line
        double worst = -INFINITY;
        const size_t end = table.upto(1L << n);
        for (size_t i = 0; i < end; ++i) {
            const Lattice& v = table.l[i];
            if (nu[1] * v[0] - nu[0] * v[1] == 0) continue;
            worst = std::max(worst, -table.log_dist[i]);
        }
        double kn = std::isfinite(worst) ? worst / double(1L << n) : 0.0;
        w.c.push_back(C / (t * a * a) + C / (t * b * b) + kn);
    }
    return w;
}

AdjustedWeights adjust_weights(const WeightSequence& c, double C1, int d) {
    if (!(C1 > 0)) fail(ErrorKind::ValidationError, "C1 must be positive");
    AdjustedWeights out;
    out.weights = c;
    out.weights.recipe = c.recipe + " + 2^-n log(C1 2^{2nd})";
    for (size_t n = 0; n < c.c.size(); ++n)
        out.weights.c[n] = c.c[n] + (std::log(C1) + 2.0 * n * d * std::log(2.0)) / std::ldexp(1.0, int(n));
    // property 1: C1 2^{nd} e^{-2^n c~_n} < e^{-2^n c_n}, compared in logs
    for (long n = (long)c.c.size() - 1; n >= 0; --n) {
        double p = std::ldexp(1.0, int(n));
        double lhs = std::log(C1) + n * d * std::log(2.0) - p * out.weights.c[n];
        double rhs = -p * c.c[n];
        if (!(lhs < rhs)) break;
        out.N1 = n;
    }
    out.sum_before = c.sum();
    out.sum_after = out.weights.sum();
    return out;
}

// ---------------------------------------------------------------------------
// epsilon ledger

EpsilonLedger epsilon_ledger(const Real& eps0, const WeightSequence& w, int d, long n_max, long prec) {
    if (eps0.sign() < 0) fail(ErrorKind::ValidationError, "eps0 must be >= 0");
    if (prec <= 0) prec = std::max(eps0.precision(), default_precision());
    EpsilonLedger L;
    L.C = w.C;
    L.d = d;
    L.N1 = std::max<long>(w.N, 1);
    Real e0 = eps0;
    mpfr_prec_round(e0.get(), prec, MPFR_RNDN);
    for (long n = 0; n <= std::min(L.N1, n_max); ++n) L.eps.push_back(e0);
    const Real C(w.C, prec);
    auto pw = [&](double x) { return exp(Real(x, prec)); };
    for (long n = L.N1; n < n_max; ++n) {
        const double p = std::ldexp(1.0, int(n));
        Real first = pw(-p * (w.at(n) + w.at(n + 1))) * L.eps[n];
        Real two = Real::with_precision(prec);
        mpfr_set_ui(two.get(), 1, MPFR_RNDN);
        mpfr_mul_2si(two.get(), two.get(), 3 * (n - 1) * d, MPFR_RNDN);
        Real second = C * pw(p * w.at(n)) * two * L.eps[n - 1] * L.eps[n - 1];
        L.eps.push_back(first + second);
    }
    // eps_n e^{-2^n c_n} > C 2^{3(n-1)d} eps_{n-1}^2
    for (long n = L.N1 + 1; n < (long)L.eps.size(); ++n) {
        Real two = Real::with_precision(prec);
        mpfr_set_ui(two.get(), 1, MPFR_RNDN);
        mpfr_mul_2si(two.get(), two.get(), 3 * (n - 1) * d, MPFR_RNDN);
        Real lhs = L.eps[n] * pw(-std::ldexp(1.0, int(n)) * w.at(n));
        Real rhs = C * two * L.eps[n - 1] * L.eps[n - 1];
        if (!(lhs > rhs)) {
            L.gennecoso_first_failure = n;
            break;
        }
    }
    return L;
}

nlohmann::json EpsilonLedger::to_json() const {
    nlohmann::json j;
    j["C"] = C;
    j["d"] = d;
    j["N1"] = N1;
    j["gennecoso_first_failure"] = gennecoso_first_failure;
    auto& e = j["eps"] = nlohmann::json::array();
    for (const auto& x : eps) e.push_back(x.str(17));
    return j;
}

// ---------------------------------------------------------------------------
// divisor table

DivisorTable DivisorTable::build(const RealVec& alpha, long radius) {
    const int d = (int)alpha.size();
    if (d < 1 || d > 2) fail(ErrorKind::ValidationError, "schedules support d = 1 and d = 2");
    if (radius < 1) fail(ErrorKind::ValidationError, "divisor table radius must be >= 1");
    long prec = 64;
    for (const auto& a : alpha) prec = std::max(prec, a.precision());
    DivisorTable t;
    t.d = d;
    t.radius = radius;
    mpfr_t acc, r;
    mpfr_inits2(prec, acc, r, (mpfr_ptr)0);
    // log ||acc||; doubles suffice unless the distance underflows them
    auto push = [&](const Lattice& l) {
        mpfr_rint(r, acc, MPFR_RNDN);
        mpfr_sub(r, acc, r, MPFR_RNDN);
        mpfr_abs(r, r, MPFR_RNDN);
        if (mpfr_zero_p(r)) {
            mpfr_clears(acc, r, (mpfr_ptr)0);
            fail(ErrorKind::ResonanceDetected, "alpha.l vanishes mod 1 inside the schedule scan");
        }
        long e;
        double m = mpfr_get_d_2exp(&e, r, MPFR_RNDN);
        t.l.push_back(l);
        t.norm.push_back(sup_norm(l));
        t.log_dist.push_back(std::log(m) + double(e) * std::log(2.0));
    };
    if (d == 1) {
        mpfr_set_ui(acc, 0, MPFR_RNDN);
        for (long a = 1; a <= radius; ++a) {
            mpfr_add(acc, acc, alpha[0].get(), MPFR_RNDN);
            push({a});
        }
    } else {
        for (long a = 0; a <= radius; ++a) {
            // acc = a alpha_1 + b alpha_2, stepping b upwards
            const long b0 = a == 0 ? 1 : -radius;
            mpfr_mul_si(acc, alpha[0].get(), a, MPFR_RNDN);
            mpfr_mul_si(r, alpha[1].get(), b0, MPFR_RNDN);
            mpfr_add(acc, acc, r, MPFR_RNDN);
            // keep acc in [0, 1) so the running sum stays small
            mpfr_floor(r, acc);
            mpfr_sub(acc, acc, r, MPFR_RNDN);
            for (long b = b0; b <= radius; ++b) {
                push({a, b});
                mpfr_add(acc, acc, alpha[1].get(), MPFR_RNDN);
                if (mpfr_cmp_ui(acc, 1) >= 0) mpfr_sub_ui(acc, acc, 1, MPFR_RNDN);
            }
        }
    }
    mpfr_clears(acc, r, (mpfr_ptr)0);
    std::vector<size_t> idx(t.l.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return t.norm[i] < t.norm[j]; });
    DivisorTable s;
    s.d = d;
    s.radius = radius;
    for (size_t i : idx) {
        s.l.push_back(t.l[i]);
        s.norm.push_back(t.norm[i]);
        s.log_dist.push_back(t.log_dist[i]);
    }
    return s;
}

size_t DivisorTable::upto(long r) const {
    return size_t(std::upper_bound(norm.begin(), norm.end(), r) - norm.begin());
}

double DivisorTable::log_inv_omega(long N) const {
    if (N > radius) fail(ErrorKind::ValidationError, "Omega(N) requested beyond the table radius");
    double worst = -INFINITY;
    for (size_t i = 0, e = upto(N); i < e; ++i) worst = std::max(worst, -log_dist[i]);
    return worst;
}

// ---------------------------------------------------------------------------
// delta schedule

const char* variant_name(ScheduleVariant v) {
    return v == ScheduleVariant::Definition14 ? "definition14" : "scoglio";
}

StageResult delta_step(const DivisorTable& table, const DirectionGrid& grid, const WeightSequence& w, long n,
                       const std::vector<double>& delta_n, const ScheduleOptions& opt) {
    const long p = 1L << n;
    if (2 * p > table.radius) fail(ErrorKind::ValidationError, "divisor table smaller than the stage scan");
    if (table.d != grid.d) fail(ErrorKind::ValidationError, "grid and alpha dimensions differ");
    const size_t M = grid.size();
    const bool scoglio = opt.variant == ScheduleVariant::Scoglio;
    const size_t lo = scoglio || opt.inner_zero ? table.upto(p) : 0;
    const size_t hi = table.upto(2 * p);
    const double log_g_inner = -double(p) * w.at(n);

    // log M_l / (2 pi) = max over the grid of |beta.l| delta_beta
    std::vector<double> logM(hi - lo);
    parallel_for(hi - lo, opt.threads, [&](size_t k) {
        const Lattice& l = table.l[lo + k];
        double m = -INFINITY;
        for (size_t j = 0; j < M; ++j) m = std::max(m, std::fabs(grid.dot(j, l)) * delta_n[j]);
        logM[k] = kTwoPi * m;
    });

    std::vector<double> tilde(M);
    std::vector<std::array<long, 2>> targ(M, {0, 0});
    parallel_for(M, opt.threads, [&](size_t j) {
        double best = delta_n[j];
        for (size_t k = 0; k < hi - lo; ++k) {
            const size_t i = lo + k;
            const double bl = std::fabs(grid.dot(j, table.l[i]));
            if (orthogonal(bl, table.l[i])) continue;
            const double log_g = table.norm[i] <= p ? log_g_inner : 0.0;
            const double v = (logM[k] + table.log_dist[i] - log_g) / (kTwoPi * bl);
            if (v < best) {
                best = v;
                targ[j] = {table.l[i][0], table.d == 2 ? table.l[i][1] : 0};
            }
        }
        tilde[j] = best;
    });

    StageResult r;
    r.radius = scoglio ? opt.C1 * std::ldexp(1.0, int(grid.d * n)) * std::exp(-double(p) * w.at(n))
                       : std::exp(-double(p) * w.at(n));
    double eff = r.radius;
    if (grid.d == 2 && r.radius < grid.spacing) {
        if (opt.strict_grid) {
            std::ostringstream os;
            os << "neighbourhood radius " << r.radius << " below the grid spacing " << grid.spacing << " at stage "
               << n << "; last reliable stage " << n;
            fail(ErrorKind::GridTooCoarse, os.str());
        }
        r.clamped = true;
        eff = grid.spacing * (1 + 1e-12);
    }
    const double shrink = scoglio ? 1 - w.at(n + 1) : 1.0;
    r.delta.resize(M);
    r.argmin.resize(M);
    for (size_t j = 0; j < M; ++j) {
        double best = tilde[j];
        auto arg = targ[j];
        for (size_t i = 0; i < M; ++i) {
            if (i == j) continue;
            const double ch = grid.chord(i, j);
            if (r.clamped ? ch <= eff : ch < eff) {
                if (tilde[i] < best) {
                    best = tilde[i];
                    arg = targ[i];
                }
            }
        }
        // the shrink is meant for delta >= 0; applied to a negative value it
        // would raise delta above the previous stage
        r.delta[j] = best >= 0 ? best * shrink : best;
        r.argmin[j] = arg;
    }
    return r;
}

DeltaSchedule delta_schedule(const DivisorTable& table, const DirectionGrid& grid, const WeightSequence& w,
                             long n_max, const ScheduleOptions& opt) {
    if (n_max < 0) fail(ErrorKind::ValidationError, "n_max must be >= 0");
    DeltaSchedule s;
    s.grid = grid;
    s.weights = w;
    s.options = opt;
    s.n_max = n_max;
    const size_t M = grid.size();
    s.delta.assign(M, std::vector<double>(n_max + 1));
    s.argmin.assign(M, std::vector<std::array<long, 2>>(n_max + 1, {0, 0}));
    const long start = std::min(std::max<long>(w.N, 0), n_max);
    for (size_t j = 0; j < M; ++j)
        for (long n = 0; n <= start; ++n) s.delta[j][n] = w.gothic_d;
    std::vector<double> cur(M, w.gothic_d);
    for (long n = start; n < n_max; ++n) {
        StageResult r = delta_step(table, grid, w, n, cur, opt);
        s.radius.push_back(r.radius);
        if (r.clamped && s.first_unreliable_stage < 0) s.first_unreliable_stage = n + 1;
        for (size_t j = 0; j < M; ++j) {
            s.delta[j][n + 1] = r.delta[j];
            s.argmin[j][n + 1] = r.argmin[j];
        }
        cur = r.delta;
    }
    return s;
}

DeltaSchedule delta_schedule(const RealVec& alpha, const DirectionGrid& grid, const WeightSequence& w, long n_max,
                             const ScheduleOptions& opt) {
    return delta_schedule(DivisorTable::build(alpha, 1L << std::max<long>(n_max, 1)), grid, w, n_max, opt);
}

double DeltaSchedule::inf_delta() const {
    double m = INFINITY;
    for (const auto& row : delta)
        for (double v : row) m = std::min(m, v);
    return m;
}

nlohmann::json DeltaSchedule::headline() const {
    nlohmann::json j;
    j["inf_delta"] = inf_delta();
    j["first_unreliable_stage"] = first_unreliable_stage;
    j["variant"] = variant_name(options.variant);
    j["inner_zero"] = options.inner_zero;
    j["grid_points"] = grid.size();
    j["d"] = grid.d;
    j["n_max"] = n_max;
    j["weights"] = weights.recipe;
    j["weights_sum"] = weights.sum();
    j["gothic_d"] = weights.gothic_d;
    j["N"] = weights.N;
    j["phi"] = "Phi(l, beta, delta) = exp(2 pi |beta.l| delta), absolute value in place of ||.||";
    return j;
}

std::string DeltaSchedule::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "stage,beta_angle,delta,constraint_argmin_l1,constraint_argmin_l2,variant\n";
    for (long n = 0; n <= n_max; ++n)
        for (size_t j = 0; j < grid.size(); ++j)
            os << n << ',' << grid.angle[j] << ',' << delta[j][n] << ',' << argmin[j][n][0] << ','
               << argmin[j][n][1] << ',' << variant_name(options.variant) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// classification

nlohmann::json ClassificationReport::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["depth"] = depth;
    j["bryuno_partial_sum"] = bryuno_partial.str(17);
    j["inf_delta"] = inf_delta;
    if (d1_consistent >= 0) {
        j["appendix_consistent"] = d1_consistent == 1;
        j["appendix_lower_bound"] = d1_lower_bound;
    }
    j["schedule"] = schedule.headline();
    return j;
}

ClassificationReport classify(const RealVec& alpha, const DirectionGrid& grid, const WeightSequence& w, int depth,
                              const ScheduleOptions& opt) {
    if (depth < 1) fail(ErrorKind::ValidationError, "classification depth must be >= 1");
    ClassificationReport r;
    r.depth = depth;
    DivisorTable table = DivisorTable::build(alpha, 1L << depth);
    r.bryuno_partial = bryuno_partial_sum(alpha, depth);
    r.schedule = delta_schedule(table, grid, w, depth, opt);
    r.inf_delta = r.schedule.inf_delta();
    if (grid.d == 1) {
        // delta_{n+1} >= delta_n - 2^{-(n+1)} log(1/Omega(2^{n+1})) summed from N
        double lb = w.gothic_d;
        for (long n = std::max<long>(w.N, 0); n < depth; ++n)
            lb -= table.log_inv_omega(1L << (n + 1)) / double(1L << (n + 1));
        r.d1_lower_bound = lb;
        bool ok = true;
        for (size_t j = 0; j < grid.size(); ++j) ok = ok && r.schedule.delta[j][depth] >= lb - 1e-12;
        r.d1_consistent = ok ? 1 : 0;
    }
    return r;
}

// ---------------------------------------------------------------------------
// one dimension

VerificationReport appendix_check(const Real& alpha, int depth, double gothic_d, AppendixTrace* trace) {
    if (depth < 1) fail(ErrorKind::ValidationError, "appendix check needs depth >= 1");
    VerificationReport rep;
    rep.title = "one-dimensional equivalence";
    rep.header = {"d = 1, grid {+1, -1}, definition14 variant, appendix weights c_n = 2 pi 2^-n log(1/Omega(2^n))",
                  "Phi uses |beta.l|", "finite-depth evidence, not a proof"};
    RealVec av{alpha};
    const DivisorTable table = DivisorTable::build(av, 1L << (depth + 1));
    const DirectionGrid grid = DirectionGrid::two_point();
    const WeightSequence w = appendix_weights(table, depth, gothic_d, 0);
    const DeltaSchedule s = delta_schedule(table, grid, w, depth + 1);
    AppendixTrace tr;
    for (long n = 0; n <= depth; ++n) {
        const long p = 1L << n;
        // inner modes: log g + log(1/||alpha l||) <= (1 - 2 pi) log(1/Omega(2^n)) <= 0
        double inner = -INFINITY;
        for (size_t i = 0, e = table.upto(p); i < e; ++i) inner = std::max(inner, -double(p) * w.c[n] - table.log_dist[i]);
        const double lio = table.log_inv_omega(p);
        const double want = (1 - kTwoPi) * lio;
        std::ostringstream in;
        in << "max_{|l|<=2^n} log(g/||alpha l||) = " << inner << " vs (1-2pi) log(1/Omega(2^n)) = " << want;
        rep.add("appendix.inner", n, inner <= 0 && std::fabs(inner - want) <= 1e-12 * std::max(1.0, std::fabs(want)),
                -inner, in.str());

        double oracle = 0;
        for (size_t i = table.upto(p), e = table.upto(2 * p); i < e; ++i)
            oracle = std::max(oracle, -table.log_dist[i] / (kTwoPi * double(table.l[i][0])));
        const double drop = s.delta[0][n] - s.delta[0][n + 1];
        const double bound = table.log_inv_omega(2 * p) / double(2 * p);
        tr.drop.push_back(drop);
        tr.oracle_drop.push_back(oracle);
        tr.paper_bound.push_back(bound);
        std::ostringstream dn;
        dn << "drop " << drop << ", annulus solve " << oracle << ", bound 2^-(n+1) log(1/Omega(2^(n+1))) = " << bound;
        rep.add("appendix.drop", n, std::fabs(drop - oracle) <= 1e-12 && drop <= bound + 1e-12, bound - drop, dn.str());
        rep.add("appendix.symmetric", n, s.delta[0][n + 1] == s.delta[1][n + 1], 0, "delta_{+1,n} = delta_{-1,n}");
    }
    tr.inf_delta = s.inf_delta();
    rep.add("appendix.inf", -1, tr.inf_delta > 0, tr.inf_delta, "inf_n delta_n > 0 over the computed stages");
    if (trace) *trace = tr;
    return rep;
}

// ---------------------------------------------------------------------------
// grid refinement

nlohmann::json RefinementReport::to_json() const {
    return {{"max_change", max_change}, {"lipschitz_bound", lipschitz_bound}, {"stages", stages}};
}

RefinementReport grid_refinement(const DivisorTable& table, int M, const WeightSequence& w, long n_max,
                                 const ScheduleOptions& opt) {
    const DirectionGrid coarse = DirectionGrid::circle(M), fine = DirectionGrid::circle(2 * M);
    const DeltaSchedule a = delta_schedule(table, coarse, w, n_max, opt);
    const DeltaSchedule b = delta_schedule(table, fine, w, n_max, opt);
    RefinementReport r;
    r.stages = n_max;
    const double h = kTwoPi / M;
    for (long n = 1; n <= n_max; ++n) {
        double L = 0;
        for (int j = 0; j < M; ++j) {
            r.max_change = std::max(r.max_change, std::fabs(a.delta[j][n] - b.delta[2 * j][n]));
            // d/dtheta of v/(2 pi |beta.l|) = v |beta_perp.l| / |beta.l| at the binding l
            const auto& l = a.argmin[j][n];
            if (l[0] == 0 && l[1] == 0) continue;
            const double bl = std::fabs(coarse.beta[j][0] * l[0] + coarse.beta[j][1] * l[1]);
            const double bp = std::fabs(-coarse.beta[j][1] * l[0] + coarse.beta[j][0] * l[1]);
            if (bl > 0) L = std::max(L, std::fabs(a.delta[j][n]) * bp / bl);
        }
        r.lipschitz_bound += L * h / 2;
    }
    return r;
}

}  // namespace wb
