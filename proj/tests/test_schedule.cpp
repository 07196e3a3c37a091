#include <doctest.h>

#include <cmath>
#include <random>

#include "wb/errors.hpp"
#include "wb/schedule.hpp"

using namespace wb;

namespace {

const double kTwoPi = 2 * M_PI;

RealVec alpha2() {
    return {Real::parse("0.41421356237309504880168872420969807856967187537694807317667973799", 256),
            Real::parse("0.73205080756887729352744634150587236694280525381038062805580697945", 256)};
}

Real golden() { return (sqrt(Real(5.0, 256)) - Real(1.0, 256)) / Real(2.0, 256); }

// log ||alpha.l|| straight from mpfr, one point at a time
double log_div(const RealVec& a, const Lattice& l) {
    const long prec = a[0].precision();
    mpfr_t x, t;
    mpfr_inits2(prec, x, t, (mpfr_ptr)0);
    mpfr_set_ui(x, 0, MPFR_RNDN);
    for (size_t i = 0; i < l.size(); ++i) {
        mpfr_mul_si(t, a[i].get(), l[i], MPFR_RNDN);
        mpfr_add(x, x, t, MPFR_RNDN);
    }
    mpfr_round(t, x);
    mpfr_sub(x, x, t, MPFR_RNDN);
    mpfr_abs(x, x, MPFR_RNDN);
    mpfr_log(x, x, MPFR_RNDN);
    double out = mpfr_get_d(x, MPFR_RNDN);
    mpfr_clears(x, t, (mpfr_ptr)0);
    return out;
}

// One stage of the definition by bisection on delta over the whole ball
// (both signs of l), feasibility tested in logs.
std::vector<double> oracle_step(const RealVec& a, const DirectionGrid& grid, const WeightSequence& w, long n,
                                const std::vector<double>& dn, const ScheduleOptions& opt) {
    const long R = 2L << n, p = 1L << n;
    const int d = grid.d;
    struct Item {
        Lattice l;
        double logg, logdiv, logM;
    };
    std::vector<Item> items;
    auto visit = [&](const Lattice& l) {
        const long m = sup_norm(l);
        const bool inner = m <= p;
        if (inner && (opt.variant == ScheduleVariant::Scoglio || opt.inner_zero)) return;
        double g = cutoff_weight(w, n, l);
        if (g == 0) return;
        double logM = -INFINITY;
        for (size_t j = 0; j < grid.size(); ++j)
            logM = std::max(logM, std::log(phi_weight(l, grid.beta[j], d, dn[j])));
        items.push_back({l, inner ? -double(p) * w.at(n) : 0.0, log_div(a, l), logM});
    };
    if (d == 1) {
        for (long x = -R; x <= R; ++x)
            if (x != 0) visit({x});
    } else {
        for (long x = -R; x <= R; ++x)
            for (long y = -R; y <= R; ++y)
                if (x != 0 || y != 0) visit({x, y});
    }
    std::vector<double> tilde(grid.size());
    for (size_t j = 0; j < grid.size(); ++j) {
        auto feasible = [&](double delta) {
            for (const auto& it : items) {
                double bl = std::fabs(grid.dot(j, it.l));
                if (orthogonal(bl, it.l)) continue;
                if (kTwoPi * bl * delta + it.logg - it.logdiv > it.logM + 1e-12) return false;
            }
            return true;
        };
        double hi = dn[j];
        if (feasible(hi)) {
            tilde[j] = hi;
            continue;
        }
        double step = 1, lo = hi - step;
        while (!feasible(lo)) {
            step *= 2;
            lo = hi - step;
        }
        for (int k = 0; k < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(lo)); ++k) {
            double mid = 0.5 * (lo + hi);
            (feasible(mid) ? lo : hi) = mid;
        }
        tilde[j] = lo;
    }
    const bool sc = opt.variant == ScheduleVariant::Scoglio;
    double r = sc ? opt.C1 * std::ldexp(1.0, int(d * n)) * std::exp(-double(p) * w.at(n))
                  : std::exp(-double(p) * w.at(n));
    std::vector<double> out(grid.size());
    for (size_t j = 0; j < grid.size(); ++j) {
        double m = tilde[j];
        for (size_t i = 0; i < grid.size(); ++i) {
            // non-strict grids widen the neighbourhood to the nearest neighbours
            bool in = d == 2 && r < grid.spacing ? grid.chord(i, j) <= grid.spacing * (1 + 1e-12) : grid.chord(i, j) < r;
            if (in) m = std::min(m, tilde[i]);
        }
        out[j] = m >= 0 && sc ? m * (1 - w.at(n + 1)) : m;
    }
    return out;
}

void check_schedule_against_oracle(const RealVec& a, const DirectionGrid& grid, const WeightSequence& w, long n_max,
                                   const ScheduleOptions& opt) {
    DeltaSchedule s = delta_schedule(a, grid, w, n_max, opt);
    std::vector<double> cur(grid.size(), w.gothic_d);
    for (long n = w.N; n < n_max; ++n) {
        for (size_t j = 0; j < grid.size(); ++j) cur[j] = s.delta[j][n];
        auto want = oracle_step(a, grid, w, n, cur, opt);
        for (size_t j = 0; j < grid.size(); ++j)
            REQUIRE(s.delta[j][n + 1] == doctest::Approx(want[j]).epsilon(1e-9).scale(1.0));
    }
}

}  // namespace

TEST_CASE("cutoff and phi weights") {
    WeightSequence w = constant_weights(0.3, 4);
    CHECK(cutoff_weight(w, 1, {3, 0}) == 1.0);
    CHECK(cutoff_weight(w, 1, {2, -1}) == doctest::Approx(std::exp(-2 * 0.3)));
    CHECK(cutoff_weight(w, 1, {5, 0}) == 0.0);
    CHECK(cutoff_weight(w, 0, {1}) == doctest::Approx(std::exp(-0.3)));
    CHECK_THROWS_AS(cutoff_weight(w, 1, {0, 0}), Error);
    try {
        cutoff_weight(w, 1, {0, 0});
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroVector);
    }

    CHECK(phi_weight({1, 0}, {0, 1}, 2, 0.7) == 1.0);
    CHECK(phi_weight({1, 0}, {1, 0}, 2, 0.1) == doctest::Approx(1.87446).epsilon(1e-5));
    CHECK(phi_weight({3, 4}, {0.6, 0.8}, 2, 0.0) == 1.0);
    for (long l = -5; l <= 5; ++l) CHECK(phi_weight({l}, {1, 0}, 1, 0.2) == phi_weight({l}, {-1, 0}, 1, 0.2));
}

TEST_CASE("direction grids") {
    for (int M : {4, 12, 64, 360}) {
        auto g = DirectionGrid::circle(M);
        CHECK(g.size() == size_t(M));
        for (size_t j = 0; j < g.size(); ++j) {
            double n2 = std::hypot(g.beta[j][0], g.beta[j][1]);
            REQUIRE(std::fabs(n2 - 1) <= 2 * std::numeric_limits<double>::epsilon());
            REQUIRE(g.chord(j, (j + 1) % g.size()) <= g.spacing * (1 + 1e-12));
        }
        CHECK(g.spacing <= kTwoPi / M);
    }
    auto two = DirectionGrid::two_point();
    CHECK(two.size() == 2);
    CHECK(two.chord(0, 1) == 2.0);
    CHECK_THROWS_AS(DirectionGrid::circle(3), Error);
}

TEST_CASE("stage solve matches a bisection oracle") {
    const RealVec a = alpha2();
    const auto grid = DirectionGrid::circle(12);
    ScheduleOptions opt;
    opt.strict_grid = false;

    SUBCASE("definition14, constant weights") {
        check_schedule_against_oracle(a, grid, constant_weights(0.8, 5), 4, opt);
    }
    SUBCASE("definition14, inner modes switched off") {
        opt.inner_zero = true;
        check_schedule_against_oracle(a, grid, constant_weights(0.8, 5), 4, opt);
    }
    SUBCASE("scoglio") {
        opt.variant = ScheduleVariant::Scoglio;
        opt.C1 = 0.05;
        check_schedule_against_oracle(a, grid, constant_weights(0.1, 5), 4, opt);
    }
    SUBCASE("one dimension, appendix weights") {
        RealVec g{golden()};
        auto table = DivisorTable::build(g, 1L << 6);
        check_schedule_against_oracle(g, DirectionGrid::two_point(), appendix_weights(table, 5), 5, opt);
    }
    SUBCASE("late start") {
        auto w = constant_weights(0.5, 5, 0.7, 2);
        check_schedule_against_oracle(a, grid, w, 4, opt);
        auto s = delta_schedule(a, grid, w, 4, opt);
        for (size_t j = 0; j < grid.size(); ++j)
            for (long n = 0; n <= 2; ++n) CHECK(s.delta[j][n] == 0.7);
    }
}

TEST_CASE("inner modes switched off leave only the annulus") {
    const RealVec a = alpha2();
    const auto grid = DirectionGrid::circle(16);
    ScheduleOptions opt;
    opt.strict_grid = false;
    opt.inner_zero = true;
    // with inner modes off the weights only move the radius, so huge weights
    // and tiny weights agree whenever the neighbourhood is a single point
    auto tiny = delta_schedule(a, grid, constant_weights(5.0, 5), 4, opt);
    auto huge = delta_schedule(a, grid, constant_weights(50.0, 5), 4, opt);
    for (size_t j = 0; j < grid.size(); ++j)
        for (long n = 0; n <= 4; ++n) CHECK(tiny.delta[j][n] == huge.delta[j][n]);
    for (size_t j = 0; j < grid.size(); ++j)
        for (long n = 1; n <= 4; ++n) {
            auto l = tiny.argmin[j][n];
            if (l[0] == 0 && l[1] == 0) continue;
            long m = std::max(std::labs(l[0]), std::labs(l[1]));
            CHECK(m > (1L << (n - 1)));
        }
}

TEST_CASE("schedule invariants") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const auto grid = DirectionGrid::circle(24);
    for (int trial = 0; trial < 6; ++trial) {
        RealVec a{Real(u(rng), 256), Real(u(rng), 256)};
        ScheduleOptions opt;
        opt.strict_grid = false;
        opt.variant = trial % 2 ? ScheduleVariant::Scoglio : ScheduleVariant::Definition14;
        opt.C1 = 0.1;
        auto table = DivisorTable::build(a, 64);
        auto w = trial % 3 == 0 ? appendix_weights(table, 6) : constant_weights(0.2 + 0.1 * trial, 6);
        auto s = delta_schedule(table, grid, w, 6, opt);
        // monotone in n, exactly
        for (size_t j = 0; j < grid.size(); ++j)
            for (long n = 0; n < 6; ++n) REQUIRE(s.delta[j][n + 1] <= s.delta[j][n]);
        // domination: a pointwise smaller stage stays smaller after one step
        for (long n = 1; n < 6; ++n) {
            std::vector<double> top(grid.size()), low(grid.size());
            for (size_t j = 0; j < grid.size(); ++j) {
                top[j] = s.delta[j][n];
                low[j] = top[j] - 0.2 * u(rng);
            }
            auto A = delta_step(table, grid, w, n, top, opt);
            auto B = delta_step(table, grid, w, n, low, opt);
            for (size_t j = 0; j < grid.size(); ++j) REQUIRE(B.delta[j] <= A.delta[j] + 1e-10);
        }
    }
}

TEST_CASE("grid limits") {
    const RealVec a = alpha2();
    ScheduleOptions opt;
    CHECK_THROWS_AS(delta_schedule(a, DirectionGrid::circle(16), constant_weights(1.0, 4), 4, opt), Error);
    try {
        delta_schedule(a, DirectionGrid::circle(16), constant_weights(1.0, 4), 4, opt);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GridTooCoarse);
    }
    opt.strict_grid = false;
    auto s = delta_schedule(a, DirectionGrid::circle(16), constant_weights(1.0, 4), 4, opt);
    // e^{-1} ~ 0.37 is already below the spacing 2 sin(pi/16) ~ 0.39 at n = 0
    CHECK(s.first_unreliable_stage == 1);
    CHECK(s.headline()["first_unreliable_stage"] == 1);

    auto rr = grid_refinement(DivisorTable::build(a, 32), 16, constant_weights(0.5, 5), 5, opt);
    CHECK(std::isfinite(rr.max_change));
    CHECK(std::isfinite(rr.lipschitz_bound));
    CHECK(rr.max_change >= 0);

    RealVec res{Real::parse("0.25", 256), Real::parse("0.2", 256)};
    CHECK_THROWS_AS(delta_schedule(res, DirectionGrid::circle(8), constant_weights(0.5, 3), 3, opt), Error);
}

TEST_CASE("schedule export") {
    ScheduleOptions opt;
    opt.strict_grid = false;
    auto s = delta_schedule(alpha2(), DirectionGrid::circle(8), constant_weights(0.5, 3), 3, opt);
    std::string csv = s.to_csv();
    CHECK(csv.rfind("stage,beta_angle,delta,constraint_argmin_l1,constraint_argmin_l2,variant\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 8 * 4);
    CHECK(csv == delta_schedule(alpha2(), DirectionGrid::circle(8), constant_weights(0.5, 3), 3, opt).to_csv());
    auto h = s.headline();
    CHECK(h["inf_delta"].get<double>() == s.inf_delta());
    CHECK(h["variant"] == "definition14");
}

TEST_CASE("weight adjustment") {
    auto z = constant_weights(0.0, 12);
    auto adj = adjust_weights(z, 1.0, 2);
    for (size_t n = 0; n < z.c.size(); ++n)
        CHECK(adj.weights.c[n] == doctest::Approx(4.0 * n * std::ldexp(1.0, -int(n)) * std::log(2.0)));
    // C1 2^{nd} e^{-2^n c~_n} / e^{-2^n c_n} = 2^{-nd}: holds from n = 1
    CHECK(adj.N1 == 1);
    CHECK(adj.sum_after < 8 * std::log(2.0) + 1e-12);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    WeightSequence c;
    for (int n = 0; n < 40; ++n) c.c.push_back(u(rng) / ((n + 1.0) * (n + 1.0)));
    auto a2 = adjust_weights(c, 3.0, 2);
    CHECK(std::isfinite(a2.sum_after));
    CHECK(a2.sum_after >= a2.sum_before);
    for (long n = std::max<long>(a2.N1, 0); n < 40; ++n) {
        double ratio = std::log(3.0) + n * 2 * std::log(2.0) - std::ldexp(1.0, int(n)) * a2.weights.c[n] +
                       std::ldexp(1.0, int(n)) * c.c[n];
        CHECK(ratio < 0);
    }
    CHECK_THROWS_AS(adjust_weights(c, 0.0, 2), Error);
}

TEST_CASE("epsilon ledger") {
    WeightSequence w;
    w.C = 10;
    w.N = 1;
    w.c.push_back(1.0);
    for (int n = 1; n <= 12; ++n) w.c.push_back(1.0 / (double(n) * n));

    auto zero = epsilon_ledger(Real(0.0, 256), w, 2, 10);
    for (const auto& e : zero.eps) CHECK(e.is_zero());

    auto L = epsilon_ledger(Real::parse("1e-8", 256), w, 2, 10);
    REQUIRE(L.eps.size() == 11);
    // eps_0 = 1e-8 is too large here: the quadratic term takes over at stage 7
    for (size_t n = 1; n < 6; ++n) CHECK(L.eps[n + 1] < L.eps[n]);
    for (size_t n = 6; n + 1 < L.eps.size(); ++n) CHECK(L.eps[n + 1] > L.eps[n]);
    CHECK(L.gennecoso_first_failure == 6);

    auto S = epsilon_ledger(Real::parse("1e-16", 256), w, 2, 10);
    for (size_t n = 1; n + 1 < S.eps.size(); ++n) CHECK(S.eps[n + 1] < S.eps[n]);
    CHECK(S.gennecoso_first_failure == -1);

    // the same recursion written out at 512 bits
    auto H = epsilon_ledger(Real::parse("1e-8", 512), w, 2, 10, 512);
    mpfr_t e0, e1, t, u;
    mpfr_inits2(512, e0, e1, t, u, (mpfr_ptr)0);
    mpfr_set_str(e0, "1e-8", 10, MPFR_RNDN);
    mpfr_set(e1, e0, MPFR_RNDN);
    for (int n = 1; n < 10; ++n) {
        const double p = std::ldexp(1.0, n);
        mpfr_set_d(t, -p * (w.c[n] + w.c[n + 1]), MPFR_RNDN);
        mpfr_exp(t, t, MPFR_RNDN);
        mpfr_mul(t, t, e1, MPFR_RNDN);
        mpfr_set_d(u, p * w.c[n], MPFR_RNDN);
        mpfr_exp(u, u, MPFR_RNDN);
        mpfr_mul_ui(u, u, 10, MPFR_RNDN);
        mpfr_mul_2si(u, u, 3 * (n - 1) * 2, MPFR_RNDN);
        mpfr_mul(u, u, e0, MPFR_RNDN);
        mpfr_mul(u, u, e0, MPFR_RNDN);
        mpfr_add(t, t, u, MPFR_RNDN);
        mpfr_set(e0, e1, MPFR_RNDN);
        mpfr_set(e1, t, MPFR_RNDN);
        // 256 and 512 bit ledgers and the direct recursion agree
        mpfr_sub(u, H.eps[n + 1].get(), t, MPFR_RNDN);
        mpfr_div(u, u, t, MPFR_RNDN);
        CHECK(std::fabs(mpfr_get_d(u, MPFR_RNDN)) < 1e-140);
        CHECK(std::fabs((L.eps[n + 1].to_double() - mpfr_get_d(t, MPFR_RNDN)) / mpfr_get_d(t, MPFR_RNDN)) < 1e-15);
    }
    mpfr_clears(e0, e1, t, u, (mpfr_ptr)0);
    CHECK(L.to_json()["eps"].size() == 11);
}

TEST_CASE("one-dimensional equivalence") {
    const Real g = golden();
    AppendixTrace tr;
    auto rep = appendix_check(g, 12, 1.0, &tr);
    CHECK(rep.failures() == 0);
    CHECK(tr.inf_delta > 0);
    // drop = max over the annulus of log(1/||n alpha||)/(2 pi n), recomputed here
    RealVec av{g};
    for (long n = 0; n <= 12; ++n) {
        double want = 0;
        for (long k = (1L << n) + 1; k <= (2L << n); ++k) want = std::max(want, -log_div(av, {k}) / (kTwoPi * k));
        CHECK(tr.drop[n] == doctest::Approx(want).epsilon(1e-12).scale(1e-12));
        // the appendix only proves an inequality
        CHECK(tr.drop[n] <= tr.paper_bound[n]);
    }

    // synthetic Liouville number: every continued-fraction level q_k costs
    // about log(2)/(2 pi) of regularity
    auto q = liouville_quotients(4);
    Real L = Real::from_mpq(cf_rational(0, q), 6000);
    AppendixTrace lt;
    auto lrep = appendix_check(L, 13, 1.0, &lt);
    CHECK(lrep.failures() == 0);
    const long qk[] = {2, 9, 4610};
    double cum = 0;
    for (long v : qk) {
        long n = 0;
        while ((2L << n) < v) ++n;
        CHECK(lt.drop[n] >= 0.99 * std::log(2.0) / kTwoPi);
        cum += lt.drop[n];
    }
    CHECK(cum > 3 * 0.99 * std::log(2.0) / kTwoPi);
    // golden drops at its convergent denominators shrink instead
    CHECK(tr.drop[12] < 0.01 * lt.drop[12]);
}

TEST_CASE("classification") {
    RealVec g{golden()};
    auto table = DivisorTable::build(g, 1L << 10);
    auto rep = classify(g, DirectionGrid::two_point(), appendix_weights(table, 10), 10);
    CHECK(std::isfinite(rep.bryuno_partial.to_double()));
    CHECK(rep.inf_delta > 0);
    CHECK(rep.d1_consistent == 1);
    CHECK(rep.to_json()["label"] == "finite-depth evidence, not a proof");

    // the appendix lower bound also holds for the Liouville number
    RealVec L{Real::from_mpq(cf_rational(0, liouville_quotients(4)), 6000)};
    auto lt = DivisorTable::build(L, 1L << 13);
    auto lrep = classify(L, DirectionGrid::two_point(), appendix_weights(lt, 13), 13);
    CHECK(lrep.d1_consistent == 1);
    CHECK(lrep.bryuno_partial.to_double() > rep.bryuno_partial.to_double());
    CHECK(lrep.inf_delta < rep.inf_delta);
}

TEST_CASE("constructed vector: weights dominate the off-line divisors") {
    auto s = construct_levels(mpq_class(2, 5), GrowthSchedule::toy(), 3);
    const long n_max = 7;
    auto w = construction_weights(s, n_max, 1.0);
    REQUIRE(w.c.size() == size_t(n_max + 1));
    auto al = alpha_approx(s);
    for (long n = 0; n <= n_max; ++n) {
        const long p = 1L << n;
        const auto& nu = s.record(index_l(s, n)).nu;
        const double log_g = -double(p) * w.c[n];
        for (long x = 0; x <= p; ++x)
            for (long y = -p; y <= p; ++y) {
                if (x == 0 && y <= 0) continue;
                if (nu[1] * x - nu[0] * y == 0) continue;
                double dist = exact_nearest_distance(al, x, y).get_d();
                REQUIRE(log_g <= std::log(dist) + 1e-9);
            }
    }

    ScheduleOptions opt;
    opt.strict_grid = false;
    auto rep = classify(construction_alpha(s), DirectionGrid::circle(16), construction_weights(s, n_max, 1.0, 1.0, 7),
                        n_max, opt);
    CHECK(rep.d1_consistent == -1);
    CHECK(std::isfinite(rep.bryuno_partial.to_double()));
    CHECK(rep.schedule.delta.size() == 16);
}
