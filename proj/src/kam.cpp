#include "wb/kam.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "wb/parallel.hpp"

namespace wb {

namespace {

const double kTwoPi = 2 * M_PI;

std::vector<double> to_doubles(const RealVec& a) {
    std::vector<double> v;
    for (const auto& x : a) v.push_back(x.to_double());
    return v;
}

void check_alpha(const RealVec& alpha, const FourierMap& f) {
    if (int(alpha.size()) != f.d) fail(ErrorKind::ValidationError, "alpha and map dimensions differ");
    if (f.components() != f.d) fail(ErrorKind::ValidationError, "perturbation must be a d-vector map");
}

// w with w + eta(w) = z at every point, by the contraction w <- z - eta(w)
std::vector<Point> solve_shift(const FourierMap& eta, const std::vector<Point>& z, int threads, int* sweeps) {
    const int d = eta.d;
    std::vector<Point> w = z;
    double prev = INFINITY;
    for (int it = 0;; ++it) {
        auto ev = eval_points(eta, w, threads);
        double res = 0;
        for (size_t p = 0; p < z.size(); ++p)
            for (int j = 0; j < d; ++j) res = std::max(res, std::fabs(w[p][j] + ev[j][p] - z[p][j]));
        if (sweeps) *sweeps = it;
        if (res <= 1e-15 || (res > 0.5 * prev && res < 1e-13)) break;
        if (res > 0.5 * prev || it > 200) {
            std::ostringstream os;
            os << "pointwise inverse stalled at residual " << res;
            fail(ErrorKind::ContractionFailure, os.str());
        }
        prev = res;
        for (size_t p = 0; p < z.size(); ++p)
            for (int j = 0; j < d; ++j) w[p][j] = z[p][j] - ev[j][p];
    }
    return w;
}

int grid_for(int N) { return 4 * std::max(N, 2); }

FourierMap with_mean(FourierMap f, const std::vector<double>& v) {
    const Lattice z(f.d, 0);
    for (int j = 0; j < f.components(); ++j) f.comp[j][f.index(z)] += v[j];
    return f;
}

double max_abs_mean(const FourierMap& f) {
    double m = 0;
    for (double x : f.mean()) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

FourierMap rotation_multipliers(const RealVec& alpha, int N) {
    const int d = int(alpha.size());
    FourierMap m(d, N, 1);
    const Real half(0.5, alpha[0].precision());
    for (size_t i = 0; i < m.size(); ++i) {
        Real x = dot(alpha, m.mode_at(i));
        const double theta = (x - floor(x + half)).to_double();
        m.comp[0][i] = std::polar(1.0, kTwoPi * theta);
    }
    return m;
}

FourierMap rotate(const FourierMap& h, const FourierMap& mult) {
    if (mult.N < h.N) fail(ErrorKind::ValidationError, "multiplier table smaller than the map");
    FourierMap r = h;
    for (auto& c : r.comp)
        for (size_t i = 0; i < r.size(); ++i) c[i] *= mult.comp[0][mult.index(r.mode_at(i))];
    r.symmetrize();
    return r;
}

FourierMap solve_cohomological(const FourierMap& df, const RealVec& alpha, int N) {
    check_alpha(alpha, df);
    if (N < 0) fail(ErrorKind::ValidationError, "negative truncation");
    const int d = df.d;
    FourierMap h(d, N, d);
    const Real half(0.5, alpha[0].precision());
    for (size_t i = 0; i < h.size(); ++i) {
        Lattice l = h.mode_at(i);
        if (is_zero(l)) continue;
        Real x = dot(alpha, l);
        const double theta = (x - floor(x + half)).to_double();
        // e^{2 pi i theta} - 1 = 2 i sin(pi theta) e^{i pi theta}, free of cancellation
        const double s = std::sin(M_PI * theta);
        if (s == 0 || !std::isfinite(1 / s)) {
            std::ostringstream os;
            os << "vanishing divisor at l = (" << l[0] << (d == 2 ? ", " + std::to_string(l[1]) : "") << ")";
            fail(ErrorKind::ResonanceDetected, os.str());
        }
        const Complex div = Complex(0, 2 * s) * std::polar(1.0, M_PI * theta);
        for (int j = 0; j < d; ++j) h.comp[j][i] = df.get(j, l) / div;
    }
    h.symmetrize();
    return h;
}

double cohomological_residual(const FourierMap& h, const FourierMap& df, const RealVec& alpha, int N) {
    const int M = std::max({h.N, N, 0});
    FourierMap lhs = rotate(h, rotation_multipliers(alpha, M)) - h;
    FourierMap rhs = truncate_split(df, std::min(N, df.N)).first;
    const Lattice z(df.d, 0);
    for (auto& c : rhs.comp) c[rhs.index(z)] = 0;
    return (lhs - rhs).abs_sum();
}

// ---------------------------------------------------------------------------
// reports

nlohmann::json StepReport::to_json() const {
    return {{"stage", stage},         {"trunc", trunc},         {"repeat", repeat},
            {"norm_head", norm_head}, {"norm_tail", norm_tail}, {"residual", residual},
            {"const_term", const_term}, {"defect", defect},     {"defect_xi", defect_xi},
            {"radii_min", radii_min}, {"h_norm", h_norm},       {"g_norm", g_norm},
            {"spill", spill},         {"oracle_diff", oracle_diff}, {"defect_composed", defect_composed},
            {"sweeps", sweeps},
            {"schedule_extended", schedule_extended}};
}

nlohmann::json KamState::to_json() const {
    nlohmann::json j;
    j["stage"] = stage;
    j["df_abs_sum"] = df.abs_sum();
    j["steps"] = nlohmann::json::array();
    for (const auto& s : steps) j["steps"].push_back(s.to_json());
    j["eps_ledger"] = eps.to_json();
    j["schedule"] = schedule.headline();
    return j;
}

// ---------------------------------------------------------------------------
// stages

int default_first_stage(int N_max) {
    int n = 0;
    while ((1L << (n + 1)) * 4 <= N_max) ++n;
    return n;
}

DeltaSchedule kam_schedule(const KamParams& p) {
    const int d = int(p.alpha.size());
    DirectionGrid g = d == 1 ? DirectionGrid::two_point() : DirectionGrid::circle(p.grid);
    ScheduleOptions opt;
    opt.strict_grid = false;
    opt.threads = p.threads;
    return delta_schedule(p.alpha, g, constant_weights(p.weight, p.schedule_stages + 1), p.schedule_stages, opt);
}

SlicedDomain stage_domain(const DeltaSchedule& s, long n, double kappa, bool* extended) {
    const long col = std::min(n, s.n_max);
    if (extended) *extended = n > s.n_max;
    std::vector<double> r;
    for (const auto& row : s.delta) r.push_back(kappa * row[col]);
    for (size_t j = 0; j < r.size(); ++j)
        if (!(r[j] > 0)) {
            std::ostringstream os;
            os << "analytic domain exhausted at stage " << n << ": schedule radius " << s.delta[j][col]
               << " in direction " << j;
            fail(ErrorKind::GuardViolation, os.str());
        }
    return SlicedDomain::sliced(s.grid, r);
}

KamState kam_init(const FourierMap& df0, const KamParams& p) {
    check_alpha(p.alpha, df0);
    if (df0.N > p.N_max) fail(ErrorKind::ValidationError, "perturbation truncation above N_max");
    KamState s;
    s.stage = p.N1 >= 0 ? p.N1 : default_first_stage(p.N_max);
    s.df = df0.resized(p.N_max);
    s.schedule = kam_schedule(p);
    const double eps0 = norm_xi(s.df, stage_domain(s.schedule, s.stage, p.kappa)).value;
    WeightSequence w = constant_weights(p.weight, s.stage + p.max_stages + 2);
    w.N = s.stage;
    s.eps = epsilon_ledger(Real(eps0, 256), w, df0.d, s.stage + p.max_stages + 1);
    if (!(eps0 <= p.smallness)) {
        std::ostringstream os;
        os << "perturbation too large: ||f - R_alpha||_xi = " << eps0 << " exceeds the threshold " << p.smallness;
        fail(ErrorKind::GuardViolation, os.str());
    }
    return s;
}

FourierMap direct_conjugate(const FourierMap& df, const FourierMap& eta, const RealVec& alpha, int N_out,
                            int threads) {
    check_alpha(alpha, df);
    if (!(contraction_factor(eta) < 0.5)) fail(ErrorKind::GuardViolation, "conjugacy outside the inversion guard");
    const int d = df.d;
    const int M = grid_for(std::max({N_out, df.N, eta.N}));
    const auto a = to_doubles(alpha);
    auto x = grid_points(d, M);
    auto ev = synthesize(eta, M);
    std::vector<Point> y = x;
    for (size_t p = 0; p < x.size(); ++p)
        for (int j = 0; j < d; ++j) y[p][j] += ev[j][p];
    auto fy = eval_points(df, y, threads);
    std::vector<Point> z = y;
    for (size_t p = 0; p < x.size(); ++p)
        for (int j = 0; j < d; ++j) z[p][j] += a[j] + fy[j][p];
    auto w = solve_shift(eta, z, threads, nullptr);
    std::vector<std::vector<double>> out(d, std::vector<double>(x.size()));
    for (size_t p = 0; p < x.size(); ++p)
        for (int j = 0; j < d; ++j) out[j][p] = w[p][j] - x[p][j] - a[j];
    return analyze(out, d, M, N_out);
}

KamState kam_step(const KamState& state, const KamParams& p) {
    KamState s = state;
    const long n = s.stage;
    const int T = int(std::min<long>(1L << std::min<long>(n + 1, 30), p.N_max));
    bool ext_n = false, ext_n1 = false;
    SlicedDomain dom_n, dom_n1;
    try {
        dom_n = stage_domain(s.schedule, n, p.kappa, &ext_n).augmented(p.N_max);
        dom_n1 = stage_domain(s.schedule, n + 1, p.kappa, &ext_n1).augmented(p.N_max);
    } catch (const Error& e) {
        throw LedgerError(e.kind(), e.what(), s.to_json());
    }
    const auto a = to_doubles(p.alpha);
    const FourierMap mult = rotation_multipliers(p.alpha, p.N_max);
    ComposeOptions co;
    co.N_out = p.N_max;
    co.threads = p.threads;
    InverseOptions io;
    io.N_out = p.N_max;
    io.threads = p.threads;

    for (int r = 0; r < std::max(p.repeats, 1); ++r) {
        const FourierMap df = s.df;
        StepReport rep;
        rep.stage = n;
        rep.trunc = T;
        rep.repeat = r;
        rep.schedule_extended = ext_n1;
        rep.radii_min = dom_n.min_radius();
        auto [head, tail] = truncate_split(df, T);
        rep.norm_head = norm_xi(head, dom_n).value;
        rep.norm_tail = norm_xi(tail, dom_n).value;
        const double dfn = df.abs_sum();

        FourierMap h = solve_cohomological(df, p.alpha, T);
        rep.residual = dfn > 0 ? cohomological_residual(h, df, p.alpha, T) / dfn : 0;
        rep.h_norm = norm_xi(h, dom_n1).value;
        if (!(contraction_factor(h) < 0.5)) {
            std::ostringstream os;
            // small divisors pushed the correction past the point where the step can contract
            os << "stage " << n << ": correction h leaves the inversion guard (||h|| 2 pi N = "
               << contraction_factor(h) << " >= 1/2)";
            throw LedgerError(ErrorKind::StepDiverged, os.str(), s.to_json());
        }
        InverseResult inv = invert_near_identity(h, io);
        rep.g_norm = norm_xi(inv.g, dom_n1).value;
        rep.sweeps = inv.sweeps;

        // f_+ - R_alpha as the four terms: tail plus mean, df o (id+h) - df,
        // h o R_alpha - h o s, g o s, with s = alpha + h + df o (id+h)
        ComposeResult A = compose_shift(df, h, co);
        FourierMap shift = with_mean(h.resized(p.N_max) + A.map, a);
        ComposeResult hs = compose_shift(h, shift, co);
        ComposeResult gs = compose_shift(inv.g, shift, co);
        FourierMap t1 = with_mean(tail, df.mean());
        FourierMap t2 = A.map - df;
        FourierMap t3 = rotate(h, mult).resized(p.N_max) - hs.map;
        FourierMap next = t1 + t2 + t3 + gs.map;
        rep.spill = A.spill + hs.spill + gs.spill + inv.spill;

        if (p.oracle) rep.oracle_diff = (next - direct_conjugate(df, h, p.alpha, p.N_max, p.threads)).abs_sum();
        rep.const_term = max_abs_mean(next);
        rep.defect = next.abs_sum();
        rep.defect_xi = norm_xi(next, dom_n1).value;
        s.steps.push_back(rep);
        s.h.push_back(h);
        s.df = next;
        if (rep.defect > dfn) {
            std::ostringstream os;
            os << "stage " << n << ": ||df|| grew from " << dfn << " to " << rep.defect;
            throw LedgerError(ErrorKind::StepDiverged, os.str(), s.to_json());
        }
    }
    s.stage = n + 1;
    return s;
}

// ---------------------------------------------------------------------------
// the loop

nlohmann::json LinearizeResult::summary() const {
    nlohmann::json j;
    j["eps0"] = eps0;
    j["defect"] = defect;
    j["defect_direct"] = defect_direct;
    j["H_minus_id_norm"] = H_norm;
    j["sqrt_eps0"] = sqrt_eps;
    j["sqrt_eps_margin"] = sqrt_eps - H_norm;
    j["converged"] = converged;
    j["stop_reason"] = stop_reason;
    j["stages"] = state.steps.size();
    auto ratios = nlohmann::json::array();
    auto quad = nlohmann::json::array();
    double prev_abs = -1;
    for (const auto& s : state.steps) {
        if (prev_abs > 0) {
            ratios.push_back(s.defect / std::pow(prev_abs, 1.5));
            quad.push_back(s.const_term / (prev_abs * prev_abs));
        }
        prev_abs = s.defect;
    }
    j["ratio_defect_over_prev_pow_1_5"] = ratios;
    j["const_term_over_prev_sq"] = quad;
    j["ledger"] = state.to_json();
    j["norm_convention"] = "defect: coefficient l1 sum (delta = 0); *_xi, norm_head/tail, H norm: sliced norm";
    return j;
}

std::string LinearizeResult::stages_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "stage,trunc,norm_head,norm_tail,residual,const_term,defect,radii_min\n";
    for (const auto& s : state.steps)
        os << s.stage << ',' << s.trunc << ',' << s.norm_head << ',' << s.norm_tail << ',' << s.residual << ','
           << s.const_term << ',' << s.defect << ',' << s.radii_min << '\n';
    return os.str();
}

LinearizeResult run_linearize(const FourierMap& df0, const KamParams& p) {
    const auto t0 = std::chrono::steady_clock::now();
    LinearizeResult R;
    R.state = kam_init(df0, p);
    const long first = R.state.stage;
    R.eps0 = norm_xi(R.state.df, stage_domain(R.state.schedule, first, p.kappa)).value;
    R.sqrt_eps = std::sqrt(R.eps0);
    const int d = df0.d;
    R.eta = FourierMap(d, 0, d);
    ComposeOptions co;
    co.N_out = p.N_max;
    co.threads = p.threads;
    R.stop_reason = "stage budget";
    for (int k = 0; k < p.max_stages; ++k) {
        if (R.state.df.abs_sum() < p.target) {
            R.stop_reason = "target reached";
            break;
        }
        const size_t before = R.state.h.size();
        try {
            R.state = kam_step(R.state, p);
        } catch (const LedgerError& e) {
            // growth at the round-off floor ends the run; anywhere else it is a failure
            if (e.kind() == ErrorKind::StepDiverged && R.state.df.abs_sum() < 1e-13) {
                R.stop_reason = "precision floor";
                break;
            }
            throw;
        }
        for (size_t i = before; i < R.state.h.size(); ++i) {
            const FourierMap& h = R.state.h[i];
            R.eta = h.resized(p.N_max) + compose_shift(R.eta, h, co).map;
        }
        if (p.oracle)
            R.state.steps.back().defect_composed =
                direct_conjugate(df0.resized(p.N_max), R.eta, p.alpha, p.N_max, p.threads).abs_sum();
    }
    if (R.stop_reason == "stage budget" && R.state.df.abs_sum() < p.target) R.stop_reason = "target reached";
    R.defect = R.state.df.abs_sum();
    const auto& st = R.state.steps;
    R.defect_direct = !st.empty() && st.back().defect_composed >= 0
                          ? st.back().defect_composed
                          : direct_conjugate(df0.resized(p.N_max), R.eta, p.alpha, p.N_max, p.threads).abs_sum();
    R.H_norm = norm_xi(R.eta, stage_domain(R.state.schedule, R.state.stage, p.kappa)).value;
    R.converged = R.defect < p.target || R.stop_reason == "precision floor";
    R.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return R;
}

FourierMap manufacture_test_map(const FourierMap& h_star, const RealVec& alpha, int N_max, int threads,
                                double* spill) {
    check_alpha(alpha, h_star);
    if (!(contraction_factor(h_star) < 0.5)) fail(ErrorKind::GuardViolation, "h* outside the inversion guard");
    const int d = h_star.d;
    const int M = grid_for(std::max(N_max, h_star.N));
    const auto a = to_doubles(alpha);
    const auto x = grid_points(d, M);
    // y = H*^{-1}(x); f(x) - x - alpha = h*(y + alpha) - h*(y)
    auto y = solve_shift(h_star, x, threads, nullptr);
    std::vector<Point> ya = y;
    for (auto& q : ya)
        for (int j = 0; j < d; ++j) q[j] += a[j];
    auto h0 = eval_points(h_star, y, threads);
    auto h1 = eval_points(h_star, ya, threads);
    std::vector<std::vector<double>> out(d, std::vector<double>(x.size()));
    for (int j = 0; j < d; ++j)
        for (size_t p = 0; p < x.size(); ++p) out[j][p] = h1[j][p] - h0[j][p];
    return analyze(out, d, M, N_max, spill);
}

RotationEstimate rotation_vector_estimate(const FourierMap& df, const RealVec& alpha, const Point& x0, long m) {
    check_alpha(alpha, df);
    if (m < 1) fail(ErrorKind::ValidationError, "need at least one iteration");
    const int d = df.d;
    const auto a = to_doubles(alpha);
    std::vector<Point> orbit{x0};
    Point x = x0;
    for (long k = 0; k < m; ++k) {
        auto v = df.eval(x);
        for (int j = 0; j < d; ++j) x[j] += a[j] + v[j];
        orbit.push_back(x);
    }
    RotationEstimate r;
    r.iterations = m;
    for (int j = 0; j < d; ++j) r.value.push_back((x[j] - x0[j]) / double(m));
    double dev = 0;
    for (long k = 0; k <= m; ++k)
        for (int j = 0; j < d; ++j) dev = std::max(dev, std::fabs(orbit[k][j] - x0[j] - double(k) * r.value[j]));
    r.error_scale = dev / double(m);
    return r;
}

}  // namespace wb
