#include <doctest.h>

#include <cmath>
#include <random>

#include "wb/errors.hpp"
#include "wb/fourier.hpp"

using namespace wb;

namespace {

const double kTwoPi = 2 * M_PI;

// naive evaluation, one complex exponential per mode
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

FourierMap naive_product(const FourierMap& f, const FourierMap& g) {
    FourierMap out(f.d, f.N + g.N, 1);
    for (size_t a = 0; a < f.size(); ++a)
        for (size_t b = 0; b < g.size(); ++b) {
            Lattice la = f.mode_at(a), lb = g.mode_at(b), l(f.d);
            for (int k = 0; k < f.d; ++k) l[k] = la[k] + lb[k];
            out.comp[0][out.index(l)] += f.comp[0][a] * g.comp[0][b];
        }
    return out;
}

double coeff_distance(const FourierMap& a, const FourierMap& b) {
    return (a - b).abs_sum();
}

double direct_analytic(const FourierMap& f, double delta) {
    double s = 0;
    for (size_t i = 0; i < f.size(); ++i) {
        Lattice l = f.mode_at(i);
        double r = f.d == 1 ? std::fabs(double(l[0])) : std::sqrt(double(l[0] * l[0] + l[1] * l[1]));
        s += std::abs(f.comp[0][i]) * std::exp(kTwoPi * delta * r);
    }
    return s;
}

SlicedDomain wobbly_domain(int M, double base, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.8, 1.2);
    std::vector<double> r(M);
    for (auto& x : r) x = base * u(rng);
    return SlicedDomain::sliced(DirectionGrid::circle(M), r);
}

}  // namespace

TEST_CASE("map basics") {
    FourierMap f = FourierMap::mode(2, 3, {1, -2}, Complex(0.5, 0.25));
    CHECK(f.get(0, {1, -2}) == Complex(0.5, 0.25));
    CHECK(f.get(0, {-1, 2}) == Complex(0.5, -0.25));
    CHECK(f.get(0, {7, 0}) == Complex(0, 0));
    CHECK(f.reality_defect_ulp() == 0);
    for (size_t i = 0; i < f.size(); ++i) CHECK(f.index(f.mode_at(i)) == i);
    Point x{0.3, 0.71};
    CHECK(f.eval(x)[0] == doctest::Approx(naive_eval(f, 0, x)).epsilon(1e-14));
    CHECK(f.eval(x)[0] == doctest::Approx(2 * (0.5 * std::cos(kTwoPi * (0.3 - 1.42)) -
                                               0.25 * std::sin(kTwoPi * (0.3 - 1.42)))).epsilon(1e-13));

    std::mt19937_64 rng(3);
    auto g = random_map(2, 5, 2, 1.0, 0.3, rng);
    CHECK(g.reality_defect_ulp() == 0);
    auto back = FourierMap::from_json(nlohmann::json::parse(g.to_json().dump()));
    CHECK(back.comp == g.comp);
    CHECK(g.to_json().dump() == back.to_json().dump());
    CHECK_THROWS_AS(FourierMap::from_json(nlohmann::json{{"d", 2}}), Error);

    auto s = synthesize(g, 16);
    auto pts = grid_points(2, 16);
    for (size_t p = 0; p < pts.size(); p += 17) CHECK(s[1][p] == doctest::Approx(naive_eval(g, 1, pts[p])).epsilon(1e-12));
    double spill = -1;
    auto h = analyze(s, 2, 16, 5, &spill);
    CHECK(coeff_distance(h, g) < 1e-14);
    CHECK(spill < 1e-14);
}

TEST_CASE("norms") {
    const auto grid = DirectionGrid::circle(16);
    auto e1 = FourierMap::mode(2, 2, {1, 0}, 1.0);
    // both e_1 and e_{-1} carry weight e^{0.2 pi}
    CHECK(norm_xi(e1, SlicedDomain::uniform(grid, 0.1)).value == doctest::Approx(2 * std::exp(0.2 * M_PI)).epsilon(1e-15));
    FourierMap half(2, 2, 1);
    half.set(0, {1, 0}, 1.0);
    CHECK(norm_xi(half, SlicedDomain::uniform(grid, 0.1)).value == doctest::Approx(1.87446).epsilon(1e-5));
    CHECK(norm_xi(FourierMap::constant(2, {-3.5}), SlicedDomain::uniform(grid, 0.4)).value == 3.5);

    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> pick(-4, 4);
    for (int trial = 0; trial < 20; ++trial) {
        FourierMap f(2, 4, 1);
        for (int k = 0; k < 5; ++k) f.set(0, {pick(rng), pick(rng)}, Complex(pick(rng), pick(rng)));
        const double delta = 0.05 + 0.01 * trial;
        // augmentation makes the constant-radius norm the analytic norm
        CHECK(norm_xi(f, SlicedDomain::uniform(grid, delta)).value ==
              doctest::Approx(direct_analytic(f, delta)).epsilon(1e-13));
        CHECK(norm_analytic(f, delta) == doctest::Approx(direct_analytic(f, delta)).epsilon(1e-14));
    }

    auto dom = wobbly_domain(24, 0.1, rng);
    auto f = random_map(2, 6, 2, 1.0, 0.2, rng);
    auto rep = norm_xi(f, dom, true);
    CHECK(rep.resum() == doctest::Approx(rep.value).epsilon(1e-14));
    CHECK(rep.per_component.size() == 2);
    CHECK(rep.value == std::max(rep.per_component[0], rep.per_component[1]));
    CHECK(rep.to_csv().rfind("component,l1,l2,abs_coeff,weight,term\n", 0) == 0);
    // slices are dominated by the norm
    for (size_t i = 0; i < dom.grid.size(); ++i) {
        CHECK(seminorm_beta(f, dom.grid.beta[i], dom.radius[i]) <= rep.value * (1 + 1e-14));
        CHECK(seminorm_beta(f, dom.grid.beta[i], 0.5 * dom.radius[i]) <= rep.value);
    }
    // the interpolated radius reproduces the grid values
    for (size_t i = 0; i < dom.grid.size(); ++i) CHECK(dom.radius_at(dom.grid.angle[i]) == doctest::Approx(dom.radius[i]));

    FourierMap g(2, 3, 1);
    g.set(0, {1, 0}, 2.0);
    g.set(0, {0, 0}, -1.0);
    // beta = e_2 is orthogonal to every stored mode
    CHECK(seminorm_beta(g, {0, 1}, 0.7) == 3.0);
    CHECK(seminorm_beta(f, {0.6, 0.8}, 0) == doctest::Approx(f.abs_sum()));
    double last = 0;
    for (double db = 0; db < 0.5; db += 0.05) {
        double v = seminorm_beta(f, {0.6, 0.8}, db);
        CHECK(v >= last);
        last = v;
    }

    // d = 1 on the two-point grid
    auto f1 = FourierMap::mode(1, 4, {3}, Complex(0, 1));
    auto d1 = SlicedDomain::sliced(DirectionGrid::two_point(), {0.1, 0.2});
    CHECK(norm_xi(f1, d1).value == doctest::Approx(2 * std::exp(kTwoPi * 0.6)));
    CHECK_THROWS_AS(SlicedDomain::sliced(DirectionGrid::circle(8), std::vector<double>(8, 0.0)), Error);
}

TEST_CASE("truncation split") {
    std::mt19937_64 rng(23);
    auto f = random_map(2, 7, 2, 1.0, 0.1, rng);
    auto [h0, t0] = truncate_split(f, 7);
    CHECK(t0.abs_sum() == 0);
    CHECK(h0.comp == f.comp);
    auto [hz, tz] = truncate_split(f, 0);
    CHECK(hz.N == 0);
    CHECK(hz.mean() == f.mean());
    auto dom = wobbly_domain(16, 0.08, rng);
    for (int N = 0; N <= 7; ++N) {
        auto [h, t] = truncate_split(f, N);
        // exact partition
        auto sum = h + t;
        CHECK(sum.comp == f.comp);
        for (size_t i = 0; i < t.size(); ++i) {
            Lattice l = t.mode_at(i);
            bool inside = std::max(std::labs(l[0]), std::labs(l[1])) <= N;
            CHECK((inside ? t.comp[0][i] == Complex(0, 0) : t.comp[0][i] == f.comp[0][i]));
        }
        const double nf = norm_xi(f, dom).value;
        CHECK(norm_xi(h, dom).value <= nf);
        CHECK(norm_xi(t, dom).value <= nf);
        CHECK(norm_xi(h, dom).value + norm_xi(t, dom).value >= nf * (1 - 1e-15));
    }
    CHECK_THROWS_AS(truncate_split(f, 8), Error);
}

TEST_CASE("products") {
    auto a = FourierMap::mode(2, 3, {1, 2}, 1.0);
    auto b = FourierMap::mode(2, 3, {2, -1}, 1.0);
    FourierMap ea(2, 3, 1), eb(2, 3, 1);
    ea.set(0, {1, 2}, 1.0);
    eb.set(0, {2, -1}, 1.0);
    auto p = multiply(ea, eb);
    CHECK(p.N == 6);
    CHECK(std::abs(p.get(0, {3, 1}) - 1.0) < 1e-15);
    CHECK(p.abs_sum() == doctest::Approx(1.0).epsilon(1e-14));
    auto c = multiply(FourierMap::constant(2, {2.5}), FourierMap::constant(2, {-4}));
    CHECK(c.mean()[0] == doctest::Approx(-10.0).epsilon(1e-15));
    CHECK(coeff_distance(multiply(a, b), naive_product(a, b)) < 1e-14);

    std::mt19937_64 rng(29);
    const auto grid = DirectionGrid::circle(16);
    int violations = 0;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto f = random_map(2, 1 + trial % 5, 1, 1.0, 0.4, rng);
        auto g = random_map(2, 1 + (trial / 5) % 4, 1, 1.0, 0.4, rng);
        auto fg = multiply(f, g);
        CHECK(coeff_distance(fg, naive_product(f, g)) < 1e-13 * f.abs_sum() * g.abs_sum());
        CHECK(fg.reality_defect_ulp() == 0);
        // one augmented domain for all three norms
        SlicedDomain dom = trial % 2 ? SlicedDomain::uniform(grid, 0.05 + 0.001 * trial)
                                     : wobbly_domain(16, 0.05 + 0.001 * trial, rng);
        dom = dom.augmented(fg.N);
        const double lhs = norm_xi(fg, dom).value;
        const double rhs = norm_xi(f, dom).value * norm_xi(g, dom).value;
        if (lhs > rhs * (1 + 1e-14)) ++violations;
        worst = std::max(worst, lhs / rhs);
    }
    CHECK(violations == 0);
    CHECK(worst <= 1 + 1e-14);
}

TEST_CASE("derivatives") {
    FourierMap f(2, 4, 1);
    f.set(0, {3, 0}, 1.0);
    auto df = derivative(f, 0);
    CHECK(df.get(0, {3, 0}) == Complex(0, 6 * M_PI));
    CHECK(derivative(f, 1).abs_sum() == 0);
    CHECK(derivative(FourierMap::constant(2, {5}), 0).abs_sum() == 0);
    CHECK_THROWS_AS(derivative(f, 2), Error);

    std::mt19937_64 rng(31);
    const auto grid = DirectionGrid::circle(16);
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int N = 1 + trial % 8;
        auto g = random_map(2, N, 2, 1.0, 0.2, rng);
        SlicedDomain dom = trial % 2 ? SlicedDomain::uniform(grid, 0.1) : wobbly_domain(16, 0.1, rng);
        dom = dom.augmented(N);
        const double ng = norm_xi(g, dom).value;
        for (int j = 0; j < 2; ++j) {
            auto dg = derivative(g, j);
            if (dg.reality_defect_ulp() > 4) ++violations;
            if (norm_xi(dg, dom).value > kTwoPi * N * ng) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("remainder split") {
    const auto grid = DirectionGrid::circle(16);
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(0.85, 0.95);
    int violations = 0;
    size_t checks = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto dom = wobbly_domain(16, 0.05, rng);
        // radii shrunk by about 10%, kept within delta/4 of delta
        std::vector<double> r(16);
        const double delta = dom.min_radius();
        for (size_t i = 0; i < 16; ++i) r[i] = std::min(dom.radius[i] * u(rng), 1.2 * delta);
        auto shrunk = SlicedDomain::sliced(grid, r);
        auto f = random_map(2, 12, 2, 1.0, 0.1, rng);
        auto rep = remainder_split_check(f, dom, shrunk, 4 + trial % 6);
        checks += rep.entries.size();
        violations += int(rep.failures());
    }
    CHECK(checks == 20 * 16);
    CHECK(violations == 0);

    // one tail mode with |beta.l| > N/2: the left side is dominated by the first term alone
    auto dom = SlicedDomain::uniform(grid, 0.05);
    auto shrunk = SlicedDomain::uniform(grid, 0.045);
    FourierMap f(2, 8, 1);
    f.set(0, {7, 0}, 1.0);
    auto rep = remainder_split_check(f, dom, shrunk, 5);
    CHECK(rep.all_pass());
    const double lhs = std::exp(kTwoPi * 0.045 * 7);
    const double first = std::exp(-0.005 * 5 / 2) * std::exp(kTwoPi * 0.05 * 7);
    CHECK(lhs <= first);
    CHECK(seminorm_beta(truncate_split(f, 5).second, grid.beta[0], 0.045) == doctest::Approx(lhs));

    // empty tail
    auto full = remainder_split_check(f, dom, shrunk, 8);
    for (const auto& e : full.entries) CHECK(e.margin == 0);
    CHECK(full.all_pass());
    CHECK_THROWS_AS(remainder_split_check(f, shrunk, dom, 5), Error);
}

TEST_CASE("composition with a shift") {
    std::mt19937_64 rng(41);
    auto f = random_map(2, 6, 1, 1.0, 0.3, rng);
    FourierMap zero(2, 3, 2);
    CHECK(coeff_distance(compose_shift(f, zero).map, f) < 1e-14 * f.abs_sum());

    // constant shift: diagonal action
    const double v1 = 0.123, v2 = -0.377;
    auto shifted = compose_shift(f, FourierMap::constant(2, {v1, v2})).map;
    FourierMap want = f;
    for (size_t i = 0; i < want.size(); ++i) {
        Lattice l = want.mode_at(i);
        want.comp[0][i] *= std::exp(Complex(0, kTwoPi * (l[0] * v1 + l[1] * v2)));
    }
    CHECK(coeff_distance(shifted, want) < 1e-13);

    // single modes, grid path vs series oracle
    auto fm = FourierMap::mode(2, 4, {2, 1}, Complex(0.3, -0.2));
    FourierMap h(2, 2, 2);
    h.set(0, {1, 0}, Complex(1e-3, 0));
    h.set(0, {-1, 0}, Complex(1e-3, 0));
    h.set(1, {0, 1}, Complex(0, 5e-4));
    h.set(1, {0, -1}, Complex(0, -5e-4));
    ComposeOptions co;
    co.N_out = 12;
    auto grid_path = compose_shift(fm, h, co);
    auto series = compose_shift_series(fm, h, co);
    CHECK(coeff_distance(grid_path.map, series.map) <= 1e-10 * fm.abs_sum());
    CHECK(series.terms > 2);

    // random pairs, plus pointwise evaluation of f(x + h(x))
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = random_map(2, 5, 2, 1.0, 0.3, rng);
        auto hh = random_map(2, 3, 2, 2e-3, 0.5, rng);
        co.N_out = 40;
        auto A = compose_shift(g, hh, co);
        CHECK(A.spill < 1e-13 * g.abs_sum());
        auto B = compose_shift_series(g, hh, co);
        CHECK(coeff_distance(A.map, B.map) <= 1e-10 * g.abs_sum());
        CHECK(A.map.reality_defect_ulp() <= 4);
        for (int k = 0; k < 5; ++k) {
            Point x{u(rng), u(rng)};
            Point y{x[0] + naive_eval(hh, 0, x), x[1] + naive_eval(hh, 1, x)};
            for (int j = 0; j < 2; ++j) CHECK(naive_eval(A.map, j, x) == doctest::Approx(naive_eval(g, j, y)).epsilon(1e-11));
        }
    }

    auto big = random_map(2, 4, 2, 0.2, 0.0, rng);
    CHECK_THROWS_AS(compose_shift_series(f, big), Error);
    try {
        compose_shift_series(f, big);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OracleDivergence);
    }
}

TEST_CASE("near-identity inversion") {
    FourierMap zero(2, 3, 2);
    CHECK(invert_near_identity(zero).g.abs_sum() == 0);
    auto c = invert_near_identity(FourierMap::constant(2, {0.2, -0.1}));
    CHECK(c.g.abs_sum() < 1e-15);

    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0, 1);
    InverseOptions io;
    io.N_out = 32;
    auto base = random_map(2, 4, 2, 1.0, 0.5, rng);
    base.comp[0][base.index({0, 0})] = 0;
    base.comp[1][base.index({0, 0})] = 0;
    base *= 1e-3 / base.abs_sum();
    std::vector<double> ratio;
    for (int k = 0; k <= 5; ++k) {
        FourierMap h = base * std::ldexp(1.0, -k);
        auto A = invert_near_identity(h, io);
        CHECK(A.residual <= 1e-15);
        CHECK(A.g.reality_defect_ulp() == 0);
        // H^{-1} = id + u with u = -h + g; (id + h) o H^{-1} - id = u + h o (id + u)
        FourierMap uu = A.g - h.resized(32);
        ComposeOptions co;
        co.N_out = 40;
        auto hu = compose_shift(h, uu, co).map;
        CHECK((hu + uu).abs_sum() <= 1e-12);
        for (int t = 0; t < 4; ++t) {
            Point x{u(rng), u(rng)};
            Point y{x[0] + naive_eval(uu, 0, x), x[1] + naive_eval(uu, 1, x)};
            CHECK(std::fabs(y[0] + naive_eval(h, 0, y) - x[0]) <= 1e-12);
            CHECK(std::fabs(y[1] + naive_eval(h, 1, y) - x[1]) <= 1e-12);
        }
        if (k <= 2) {
            auto B = invert_near_identity_series(h, io);
            CHECK(coeff_distance(A.g, B.g) <= 1e-10 * h.abs_sum());
        }
        ratio.push_back(A.g.abs_sum() / (h.abs_sum() * h.abs_sum()));
    }
    const double lo = *std::min_element(ratio.begin(), ratio.end());
    const double hi = *std::max_element(ratio.begin(), ratio.end());
    CHECK(hi <= 4 * lo);

    // the same recursion summed without alternating signs does not invert
    ComposeOptions co;
    co.N_out = 40;
    FourierMap hw = base.resized(40);
    FourierMap w = compose_shift_series(hw, base, co).map - hw;
    FourierMap plain = w;
    for (int k = 1; k < 12; ++k) {
        w = compose_shift_series(w, base, co).map - w;
        plain += w;
    }
    auto ref = invert_near_identity(base, io).g;
    CHECK(coeff_distance(plain.resized(32), ref) > 1e3 * 1e-10 * base.abs_sum());

    auto big = random_map(2, 4, 2, 0.05, 0.0, rng);
    CHECK_THROWS_AS(invert_near_identity(big), Error);
    try {
        invert_near_identity(big);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GuardViolation);
    }
}
