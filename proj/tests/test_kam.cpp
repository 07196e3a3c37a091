#include <doctest.h>

#include <cmath>
#include <random>

#include "wb/errors.hpp"
#include "wb/kam.hpp"

using namespace wb;

namespace {

const double kTwoPi = 2 * M_PI;

RealVec alpha_23() {
    return {sqrt(Real(2.0, 256)) - Real(1.0, 256), sqrt(Real(3.0, 256)) - Real(1.0, 256)};
}

double naive_eval(const FourierMap& f, int j, const Point& x) {
    Complex s = 0;
    for (size_t i = 0; i < f.size(); ++i) {
        Lattice l = f.mode_at(i);
        double ph = double(l[0]) * x[0];
        if (f.d == 2) ph += double(l[1]) * x[1];
        s += f.comp[j][i] * std::exp(Complex(0, kTwoPi * ph));
    }
    return s.real();
}

// divisor from a double alpha, straight from the definition
Complex naive_divisor(const std::vector<double>& a, const Lattice& l) {
    double x = 0;
    for (size_t k = 0; k < a.size(); ++k) x += a[k] * double(l[k]);
    return std::exp(Complex(0, kTwoPi * x)) - 1.0;
}

FourierMap zero_mean(FourierMap f) {
    const Lattice z(f.d, 0);
    for (auto& c : f.comp) c[f.index(z)] = 0;
    return f;
}

// sparse df with `modes` random modes in the box
FourierMap sparse_map(int N, int modes, double scale, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(-N, N);
    std::normal_distribution<double> g;
    FourierMap f(2, N, 2);
    for (int k = 0; k < modes; ++k) {
        Lattice l{pick(rng), pick(rng)};
        f += FourierMap::mode(2, N, l, Complex(g(rng), g(rng)) * scale, 2, k % 2);
    }
    return f;
}

struct Manufactured {
    FourierMap h_star;
    FourierMap df;
    KamParams params;
    LinearizeResult run;
};

const Manufactured& manufactured() {
    static const Manufactured m = [] {
        Manufactured r;
        std::mt19937_64 rng(7);
        r.h_star = zero_mean(random_map(2, 6, 2, 1.0, 0.5, rng));
        r.h_star *= 1e-3 / r.h_star.abs_sum();
        r.params.alpha = alpha_23();
        r.df = manufacture_test_map(r.h_star, r.params.alpha, r.params.N_max);
        r.run = run_linearize(r.df, r.params);
        return r;
    }();
    return m;
}

}  // namespace

TEST_CASE("cohomological equation, closed forms") {
    const RealVec a = alpha_23();
    const std::vector<double> ad{a[0].to_double(), a[1].to_double()};

    FourierMap zero(2, 8, 2);
    FourierMap h = solve_cohomological(zero, a, 8);
    CHECK(h.abs_sum() == 0);
    CHECK(cohomological_residual(h, zero, a, 8) == 0);

    for (Lattice l : {Lattice{1, 0}, Lattice{0, 1}, Lattice{3, -5}, Lattice{-7, 8}}) {
        const Complex eps(1e-3, -2e-4);
        FourierMap df = FourierMap::mode(2, 8, l, eps, 2, 1);
        h = solve_cohomological(df, a, 8);
        const Complex want = eps / naive_divisor(ad, l);
        CHECK(std::abs(h.get(1, l) - want) <= 1e-13 * std::abs(want));
        CHECK(std::abs(h.get(1, Lattice{-l[0], -l[1]}) - std::conj(want)) <= 1e-13 * std::abs(want));
        CHECK(std::abs(h.get(0, l)) == 0);
        CHECK(h.mean()[1] == 0);
        CHECK(cohomological_residual(h, df, a, 8) <= 1e-15 * df.abs_sum());
    }

    // modes beyond the truncation are left alone
    FourierMap far = FourierMap::mode(2, 10, {9, 1}, 1e-3, 2, 0);
    CHECK(solve_cohomological(far, a, 8).abs_sum() == 0);
}

TEST_CASE("cohomological equation on random polynomials") {
    const RealVec a = alpha_23();
    const std::vector<double> ad{a[0].to_double(), a[1].to_double()};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    int violations = 0;
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        // half dense, half 20-mode; degree 10 so the truncation at 8 matters
        FourierMap df = t % 2 ? random_map(2, 10, 2, 1e-3, 0.3, rng) : sparse_map(10, 20, 1e-3, rng);
        const double dn = df.abs_sum();
        FourierMap h = solve_cohomological(df, a, 8);
        const double lib = cohomological_residual(h, df, a, 8);
        // pointwise: h(x + alpha) - h(x) - (T_8 df(x) - mean)
        FourierMap rhs = zero_mean(truncate_split(df, 8).first);
        double pt = 0;
        for (int k = 0; k < 40; ++k) {
            Point x{u(rng), u(rng)};
            Point xa{x[0] + ad[0], x[1] + ad[1]};
            for (int j = 0; j < 2; ++j)
                pt = std::max(pt, std::fabs(naive_eval(h, j, xa) - naive_eval(h, j, x) - naive_eval(rhs, j, x)));
        }
        worst = std::max({worst, lib / dn, pt / dn});
        if (lib > 1e-12 * dn || pt > 1e-12 * dn) ++violations;
    }
    MESSAGE("worst relative residual " << worst);
    CHECK(violations == 0);
}

TEST_CASE("resonant divisors are refused") {
    RealVec a{Real(0.5, 256), sqrt(Real(2.0, 256))};
    FourierMap df = FourierMap::mode(2, 4, {2, 0}, 1e-3, 2, 0);
    try {
        solve_cohomological(df, a, 4);
        FAIL("expected ResonanceDetected");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ResonanceDetected);
    }
    // the same alpha is fine below the resonant order
    CHECK_NOTHROW(solve_cohomological(FourierMap::mode(2, 1, {1, 1}, 1e-3, 2, 0), a, 1));
}

TEST_CASE("rotation multipliers") {
    const RealVec a = alpha_23();
    const std::vector<double> ad{a[0].to_double(), a[1].to_double()};
    FourierMap m = rotation_multipliers(a, 12);
    double worst = 0;
    for (size_t i = 0; i < m.size(); ++i)
        worst = std::max(worst, std::abs(m.comp[0][i] - (naive_divisor(ad, m.mode_at(i)) + 1.0)));
    CHECK(worst <= 1e-13);
    // rotating a map is evaluating it at x + alpha
    std::mt19937_64 rng(5);
    FourierMap f = random_map(2, 6, 2, 1.0, 0.4, rng);
    FourierMap r = rotate(f, m);
    Point x{0.3, 0.71}, xa{0.3 + ad[0], 0.71 + ad[1]};
    for (int j = 0; j < 2; ++j) CHECK(std::fabs(naive_eval(r, j, x) - naive_eval(f, j, xa)) <= 1e-13);
}

TEST_CASE("KAM step") {
    KamParams p;
    p.alpha = alpha_23();

    SUBCASE("zero perturbation is a fixed point") {
        KamState s = kam_init(FourierMap(2, 4, 2), p);
        KamState t = kam_step(s, p);
        CHECK(t.stage == s.stage + 1);
        CHECK(t.h.back().abs_sum() == 0);
        CHECK(t.df.abs_sum() == 0);
        CHECK(t.steps.back().oracle_diff <= 1e-15);   // grid round-off of x + alpha
    }

    SUBCASE("assembly agrees with the direct composition") {
        std::mt19937_64 rng(21);
        for (int t = 0; t < 3; ++t) {
            FourierMap df = zero_mean(random_map(2, 8, 2, 1.0, 0.5, rng));
            df *= 2e-4 / df.abs_sum();
            KamState s = kam_init(df, p);
            KamState n = kam_step(s, p);
            const StepReport& r = n.steps.back();
            CHECK(r.oracle_diff >= 0);
            CHECK(r.oracle_diff <= 1e-10);
            CHECK(r.residual <= 1e-12);
            CHECK(std::isfinite(r.norm_head));
            CHECK(std::isfinite(r.norm_tail));
            CHECK(r.defect < df.abs_sum());
        }
    }

    SUBCASE("repeats re-solve at the same truncation") {
        std::mt19937_64 rng(4);
        FourierMap df = zero_mean(random_map(2, 6, 2, 1.0, 0.5, rng));
        df *= 1e-4 / df.abs_sum();
        p.repeats = 2;
        KamState n = kam_step(kam_init(df, p), p);
        REQUIRE(n.steps.size() == 2);
        CHECK(n.steps[0].trunc == n.steps[1].trunc);
        CHECK(n.steps[1].defect < n.steps[0].defect);
        CHECK(n.h.size() == 2);
    }

    SUBCASE("domain radii come from the schedule column") {
        KamState s = kam_init(FourierMap(2, 4, 2), p);
        bool ext = true;
        SlicedDomain dom = stage_domain(s.schedule, s.stage, p.kappa, &ext);
        CHECK_FALSE(ext);
        for (size_t j = 0; j < dom.radius.size(); ++j) CHECK(dom.radius[j] == p.kappa * s.schedule.delta[j][s.stage]);
        stage_domain(s.schedule, s.schedule.n_max + 3, p.kappa, &ext);
        CHECK(ext);
    }
}

TEST_CASE("manufactured maps") {
    const RealVec a = alpha_23();
    const std::vector<double> ad{a[0].to_double(), a[1].to_double()};

    CHECK(manufacture_test_map(FourierMap(2, 4, 2), a, 16).abs_sum() == 0);

    // first order: df(l) = h*(l) (e^{2 pi i alpha.l} - 1); the remainder is quadratic
    // at l itself only odd orders contribute, so the remainder there is cubic;
    // the 2l mode is the pure quadratic one
    const Lattice l{2, -1}, l2{4, -2};
    double err[2], quad[2];
    for (int k = 0; k < 2; ++k) {
        const double e = 1e-4 / (1 << k);
        FourierMap hs = FourierMap::mode(2, 4, l, Complex(e, 0.5 * e), 2, 0);
        FourierMap df = manufacture_test_map(hs, a, 16);
        const Complex lead = hs.get(0, l) * naive_divisor(ad, l);
        err[k] = std::abs(df.get(0, l) - lead);
        quad[k] = std::abs(df.get(0, l2));
        CHECK(err[k] <= e * e);
        CHECK(quad[k] <= 100 * e * e);
    }
    MESSAGE("remainder at l " << err[0] << " -> " << err[1] << ", 2l mode " << quad[0] << " -> " << quad[1]);
    CHECK(err[0] / err[1] > 3.5);
    CHECK(quad[0] / quad[1] == doctest::Approx(4).epsilon(0.01));

    // outside the guard
    FourierMap big = FourierMap::mode(2, 4, l, 0.05, 2, 0);
    CHECK_THROWS(manufacture_test_map(big, a, 16));
}

TEST_CASE("rotation vector estimate") {
    const RealVec a = alpha_23();
    const std::vector<double> ad{a[0].to_double(), a[1].to_double()};
    RotationEstimate r = rotation_vector_estimate(FourierMap(2, 2, 2), a, {0.1, 0.2}, 1000);
    for (int j = 0; j < 2; ++j) CHECK(std::fabs(r.value[j] - ad[j]) <= 1e-13);

    const Manufactured& m = manufactured();
    RotationEstimate one = rotation_vector_estimate(m.df, a, {0.1, 0.2}, 1);
    auto v = m.df.eval({0.1, 0.2});
    for (int j = 0; j < 2; ++j) CHECK(one.value[j] == doctest::Approx(ad[j] + v[j]).epsilon(1e-14));

    RotationEstimate est = rotation_vector_estimate(m.df, a, {0.1, 0.2}, 10000);
    for (int j = 0; j < 2; ++j) CHECK(std::fabs(est.value[j] - ad[j]) <= 1e-3);
    MESSAGE("Birkhoff error " << std::fabs(est.value[0] - ad[0]) << ", O(1/m) scale " << est.error_scale);
    CHECK(std::fabs(est.value[0] - ad[0]) <= 4 * est.error_scale + 1e-15);
}

TEST_CASE("KAM convergence on a manufactured map") {
    const Manufactured& m = manufactured();
    const LinearizeResult& R = m.run;
    const auto& st = R.state.steps;
    MESSAGE("stages " << st.size() << ", defect " << R.defect << ", " << R.seconds << " s, stop: " << R.stop_reason);

    CHECK(R.converged);
    CHECK(R.defect <= 1e-8);
    CHECK(R.defect_direct <= 1e-8);
    CHECK(st.size() <= 8);
    CHECK(R.seconds < 60);
    CHECK(R.H_norm <= R.sqrt_eps);

    double prev = m.df.resized(m.params.N_max).abs_sum();
    for (const auto& s : st) {
        CHECK(s.oracle_diff <= 1e-10);
        CHECK(s.residual <= 1e-12);
        CHECK(s.radii_min > 0);
        // quadratic-type contraction while above the floor
        if (prev > 1e-12) {
            CHECK(s.defect / std::pow(prev, 1.5) <= 1.0);
            CHECK(s.defect <= 50 * prev * prev + 1e-14);   // bounds the truncated part too
        }
        MESSAGE("stage " << s.stage << ": ratio " << s.defect / std::pow(prev, 1.5) << ", const/prev^2 "
                         << s.const_term / (prev * prev));
        // direct evaluation with the composed maps agrees with the ledger
        CHECK(std::fabs(s.defect_composed - s.defect) <= 1e-8 * s.defect + 1e-14);
        prev = s.defect;
    }
}

TEST_CASE("the conjugacy is h* up to a translation") {
    // H* o T_c is the only other conjugacy, so eta - c = h* o T_c with c the mean of eta
    const Manufactured& m = manufactured();
    const FourierMap& eta = m.run.eta;
    const auto c = eta.mean();
    FourierMap shifted = compose_shift(m.h_star, FourierMap::constant(2, c), {m.params.N_max}).map;
    FourierMap diff = eta - FourierMap::constant(2, c) - shifted;
    MESSAGE("||eta - c - h* o T_c|| = " << diff.abs_sum() << ", c = (" << c[0] << ", " << c[1] << ")");
    CHECK(diff.abs_sum() <= 1e-12);
}

TEST_CASE("linearization edge cases") {
    KamParams p;
    p.alpha = alpha_23();

    SUBCASE("the rotation itself") {
        LinearizeResult R = run_linearize(FourierMap(2, 4, 2), p);
        CHECK(R.eta.abs_sum() == 0);
        CHECK(R.defect == 0);
        CHECK(R.defect_direct <= 1e-15);
        CHECK(R.stop_reason == "target reached");
    }

    SUBCASE("too large a perturbation is refused") {
        FourierMap df = FourierMap::mode(2, 4, {1, 2}, 0.05, 2, 0);
        try {
            run_linearize(df, p);
            FAIL("expected a refusal");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::GuardViolation);
            CHECK(std::string(e.what()).find("exceeds the threshold") != std::string::npos);
        }
    }

    SUBCASE("a resonant alpha diverges with a ledger") {
        p.alpha = {Real(1.0 / 3, 256) + Real(1e-3, 256), sqrt(Real(2.0, 256)) - Real(1.0, 256)};
        p.oracle = false;
        std::mt19937_64 rng(3);
        FourierMap df = random_map(2, 4, 2, 1.0, 0.5, rng);
        df *= 3e-3 / df.abs_sum();
        try {
            run_linearize(df, p);
            FAIL("expected StepDiverged");
        } catch (const LedgerError& e) {
            CHECK(e.kind() == ErrorKind::StepDiverged);
            CHECK(e.ledger().contains("steps"));
            CHECK(e.ledger().contains("eps_ledger"));
        }
    }
}
