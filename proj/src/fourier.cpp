#include "wb/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "wb/errors.hpp"
#include "wb/parallel.hpp"

namespace wb {

namespace {

const double kTwoPi = 2 * M_PI;

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// In-place transform of an M^d complex array; sign is FFTW_FORWARD or
// FFTW_BACKWARD. FFTW_ESTIMATE keeps the plan (and the round-off) independent
// of timing.
void fft(std::vector<Complex>& a, int d, int M, int sign) {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(fftw_mutex());
        plan = d == 1 ? fftw_plan_dft_1d(M, p, p, sign, FFTW_ESTIMATE)
                      : fftw_plan_dft_2d(M, M, p, p, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lk(fftw_mutex());
    fftw_destroy_plan(plan);
}

size_t grid_size(int d, int M) { return d == 1 ? size_t(M) : size_t(M) * M; }

// position of mode l in an M^d transform array
size_t wrap(const Lattice& l, int d, int M) {
    auto w = [M](long x) { return size_t(((x % M) + M) % M); };
    return d == 1 ? w(l[0]) : w(l[0]) * M + w(l[1]);
}

long sup(const Lattice& l) {
    long s = 0;
    for (long x : l) s = std::max(s, std::labs(x));
    return s;
}

double hypot_l(const Lattice& l) { return l.size() == 1 ? std::fabs(double(l[0])) : std::hypot(double(l[0]), double(l[1])); }

void check_d(int d) {
    if (d != 1 && d != 2) fail(ErrorKind::ValidationError, "fourier maps support d = 1 and d = 2 only");
}

int default_grid(int n) {
    int M = 4 * std::max(n, 2);
    return M + (M & 1);
}

double max_abs(const std::vector<std::vector<double>>& v) {
    double m = 0;
    for (const auto& c : v)
        for (double x : c) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// FourierMap

FourierMap::FourierMap(int d_, int N_, int components) : d(d_), N(N_) {
    check_d(d);
    if (N < 0 || components < 1) fail(ErrorKind::ValidationError, "bad Fourier map shape");
    comp.assign(components, std::vector<Complex>(size(), Complex(0, 0)));
}

FourierMap FourierMap::constant(int d, const std::vector<double>& v) {
    FourierMap f(d, 0, int(v.size()));
    for (size_t j = 0; j < v.size(); ++j) f.comp[j][0] = v[j];
    return f;
}

FourierMap FourierMap::mode(int d, int N, const Lattice& l, Complex c, int components, int j) {
    FourierMap f(d, N, components);
    if (!f.in_box(l)) fail(ErrorKind::ValidationError, "mode outside the box");
    if (is_zero(l)) {
        f.set(j, l, c.real());
        return f;
    }
    Lattice m = l;
    for (auto& x : m) x = -x;
    f.set(j, l, c);
    f.set(j, m, std::conj(c));
    return f;
}

size_t FourierMap::size() const { return d == 1 ? size_t(side()) : size_t(side() * side()); }

bool FourierMap::in_box(const Lattice& l) const { return int(l.size()) == d && sup(l) <= N; }

size_t FourierMap::index(const Lattice& l) const {
    return d == 1 ? size_t(l[0] + N) : size_t((l[0] + N) * side() + (l[1] + N));
}

Lattice FourierMap::mode_at(size_t idx) const {
    if (d == 1) return {long(idx) - N};
    return {long(idx / side()) - N, long(idx % side()) - N};
}

Complex FourierMap::get(int j, const Lattice& l) const { return in_box(l) ? comp[j][index(l)] : Complex(0, 0); }

void FourierMap::set(int j, const Lattice& l, Complex c) {
    if (!in_box(l)) fail(ErrorKind::ValidationError, "coefficient outside the box");
    comp[j][index(l)] = c;
}

std::vector<double> FourierMap::mean() const {
    std::vector<double> m;
    const Lattice z(d, 0);
    for (int j = 0; j < components(); ++j) m.push_back(comp[j][index(z)].real());
    return m;
}

std::vector<double> FourierMap::eval(const Point& x) const {
    std::vector<std::vector<double>> v = eval_points(*this, {x});
    std::vector<double> out;
    for (auto& c : v) out.push_back(c[0]);
    return out;
}

FourierMap FourierMap::resized(int N2) const {
    FourierMap g(d, N2, components());
    const int m = std::min(N, N2);
    for (int j = 0; j < components(); ++j)
        for (size_t i = 0; i < g.size(); ++i) {
            Lattice l = g.mode_at(i);
            if (sup(l) <= m) g.comp[j][i] = comp[j][index(l)];
        }
    return g;
}

FourierMap FourierMap::component(int j) const {
    FourierMap g(d, N, 1);
    g.comp[0] = comp.at(j);
    return g;
}

void FourierMap::symmetrize() {
    for (auto& c : comp)
        for (size_t i = 0; i < size(); ++i) {
            const size_t k = size() - 1 - i;   // index of -l
            if (k < i) continue;
            if (k == i) {
                c[i] = c[i].real();
                continue;
            }
            Complex a = 0.5 * (c[i] + std::conj(c[k]));
            c[i] = a;
            c[k] = std::conj(a);
        }
}

double FourierMap::reality_defect_ulp() const {
    double worst = 0;
    for (const auto& c : comp)
        for (size_t i = 0; i < size(); ++i) {
            const size_t k = size() - 1 - i;
            const double diff = std::abs(c[k] - std::conj(c[i]));
            if (diff == 0) continue;
            const double scale = std::max(std::abs(c[i]), std::abs(c[k]));
            const double ulp = scale > 0 ? std::nextafter(scale, INFINITY) - scale : 0;
            worst = std::max(worst, ulp > 0 ? diff / ulp : INFINITY);
        }
    return worst;
}

double FourierMap::abs_sum() const {
    const auto& ord = canonical_order(d, N);
    double m = 0;
    for (const auto& c : comp) {
        double s = 0;
        for (size_t i : ord) s += std::abs(c[i]);
        m = std::max(m, s);
    }
    return m;
}

FourierMap& FourierMap::operator+=(const FourierMap& o) {
    if (o.d != d || o.components() != components()) fail(ErrorKind::ValidationError, "shape mismatch in +");
    if (o.N > N) *this = resized(o.N);
    for (int j = 0; j < components(); ++j)
        for (size_t i = 0; i < o.size(); ++i) comp[j][index(o.mode_at(i))] += o.comp[j][i];
    return *this;
}

FourierMap& FourierMap::operator-=(const FourierMap& o) {
    if (o.d != d || o.components() != components()) fail(ErrorKind::ValidationError, "shape mismatch in -");
    if (o.N > N) *this = resized(o.N);
    for (int j = 0; j < components(); ++j)
        for (size_t i = 0; i < o.size(); ++i) comp[j][index(o.mode_at(i))] -= o.comp[j][i];
    return *this;
}

FourierMap& FourierMap::operator*=(double s) {
    for (auto& c : comp)
        for (auto& x : c) x *= s;
    return *this;
}

FourierMap operator+(FourierMap a, const FourierMap& b) { return a += b; }
FourierMap operator-(FourierMap a, const FourierMap& b) { return a -= b; }
FourierMap operator*(FourierMap a, double s) { return a *= s; }

nlohmann::json FourierMap::to_json() const {
    nlohmann::json j;
    j["d"] = d;
    j["N"] = N;
    j["components"] = nlohmann::json::array();
    for (const auto& c : comp) {
        auto rows = nlohmann::json::array();
        for (size_t i : canonical_order(d, N)) {
            if (c[i] == Complex(0, 0)) continue;
            Lattice l = mode_at(i);
            rows.push_back({l, c[i].real(), c[i].imag()});
        }
        j["components"].push_back(rows);
    }
    return j;
}

FourierMap FourierMap::from_json(const nlohmann::json& j) {
    try {
        FourierMap f(j.at("d").get<int>(), j.at("N").get<int>(), int(j.at("components").size()));
        int k = 0;
        for (const auto& rows : j.at("components")) {
            for (const auto& r : rows)
                f.set(k, r.at(0).get<Lattice>(), Complex(r.at(1).get<double>(), r.at(2).get<double>()));
            ++k;
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::SchemaMismatch, std::string("Fourier map JSON: ") + e.what());
    }
}

const std::vector<size_t>& canonical_order(int d, int N) {
    static std::mutex m;
    static std::map<std::pair<int, int>, std::vector<size_t>> cache;
    std::lock_guard<std::mutex> lk(m);
    auto it = cache.find({d, N});
    if (it != cache.end()) return it->second;
    FourierMap shape;
    shape.d = d;
    shape.N = N;
    std::vector<size_t> ord(shape.size());
    std::iota(ord.begin(), ord.end(), size_t(0));
    std::stable_sort(ord.begin(), ord.end(), [&](size_t a, size_t b) {
        Lattice la = shape.mode_at(a), lb = shape.mode_at(b);
        long sa = sup(la), sb = sup(lb);
        if (sa != sb) return sa < sb;
        return la < lb;
    });
    return cache.emplace(std::make_pair(d, N), std::move(ord)).first->second;
}

FourierMap random_map(int d, int N, int components, double scale, double decay, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    FourierMap f(d, N, components);
    for (int j = 0; j < components; ++j)
        for (size_t i : canonical_order(d, N)) {
            Lattice l = f.mode_at(i);
            const size_t k = f.size() - 1 - i;
            if (k < i) continue;
            const double r = scale * std::exp(-decay * double(sup(l))) * u(rng);
            const double ph = kTwoPi * u(rng);
            if (k == i) {
                f.comp[j][i] = r * std::cos(ph);
            } else {
                f.comp[j][i] = std::polar(r, ph);
                f.comp[j][k] = std::conj(f.comp[j][i]);
            }
        }
    return f;
}

// ---------------------------------------------------------------------------
// domains and norms

SlicedDomain SlicedDomain::uniform(const DirectionGrid& g, double delta) {
    SlicedDomain s = sliced(g, std::vector<double>(g.size(), delta));
    return s;
}

SlicedDomain SlicedDomain::sliced(const DirectionGrid& g, std::vector<double> radii) {
    if (radii.size() != g.size()) fail(ErrorKind::ValidationError, "one radius per grid direction");
    for (double r : radii)
        if (!(r > 0) || !std::isfinite(r)) fail(ErrorKind::ValidationError, "domain radii must be positive");
    SlicedDomain s;
    s.grid = g;
    s.radius = std::move(radii);
    s.constant = std::all_of(s.radius.begin(), s.radius.end(), [&](double r) { return r == s.radius[0]; });
    s.dir = g.beta;
    s.dir_radius = s.radius;
    return s;
}

double SlicedDomain::radius_at(double angle) const {
    if (grid.d == 1) return std::cos(angle) > 0 ? radius[0] : radius[1];
    const size_t M = radius.size();
    double u = std::fmod(angle, kTwoPi);
    if (u < 0) u += kTwoPi;
    u *= double(M) / kTwoPi;
    size_t i = size_t(std::floor(u)) % M;
    const double t = u - std::floor(u);
    return (1 - t) * radius[i] + t * radius[(i + 1) % M];
}

double SlicedDomain::min_radius() const { return *std::min_element(radius.begin(), radius.end()); }

SlicedDomain SlicedDomain::augmented(int N) const {
    SlicedDomain s = *this;
    if (N <= augmented_to) return s;
    s.augmented_to = N;
    if (grid.d == 1) return s;
    s.dir = grid.beta;
    s.dir_radius = radius;
    for (long a = -N; a <= N; ++a)
        for (long b = -N; b <= N; ++b) {
            if (std::gcd(a, b) != 1) continue;
            const double r = std::hypot(double(a), double(b));
            s.dir.push_back({double(a) / r, double(b) / r});
            s.dir_radius.push_back(radius_at(std::atan2(double(b), double(a))));
        }
    return s;
}

SlicedDomain SlicedDomain::scaled(double f) const {
    std::vector<double> r = radius;
    for (auto& x : r) x *= f;
    SlicedDomain s = sliced(grid, r);
    return augmented_to >= 0 ? s.augmented(augmented_to) : s;
}

double SlicedDomain::weight(const Lattice& l) const {
    if (is_zero(l)) return 0;
    // augmented constant radii: the max sits on l's own direction
    if (constant && augmented_to >= sup(l)) return radius[0] * hypot_l(l);
    double w = 0;
    for (size_t i = 0; i < dir.size(); ++i) {
        double s = dir[i][0] * double(l[0]);
        if (grid.d == 2) s += dir[i][1] * double(l[1]);
        w = std::max(w, dir_radius[i] * std::fabs(s));
    }
    return w;
}

double NormReport::resum() const {
    std::map<int, double> s;
    for (const auto& r : detail) s[r.component] += r.abs * std::exp(kTwoPi * r.weight);
    double m = 0;
    for (auto& [k, v] : s) m = std::max(m, v);
    return m;
}

std::string NormReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "component,l1,l2,abs_coeff,weight,term\n";
    for (const auto& r : detail)
        os << r.component << ',' << r.l[0] << ',' << (r.l.size() > 1 ? r.l[1] : 0) << ',' << r.abs << ','
           << r.weight << ',' << r.abs * std::exp(kTwoPi * r.weight) << '\n';
    return os.str();
}

NormReport norm_xi(const FourierMap& f, const SlicedDomain& dom, bool detail) {
    if (dom.grid.d != f.d) fail(ErrorKind::ValidationError, "domain and map dimensions differ");
    const SlicedDomain D = dom.augmented_to >= f.N ? dom : dom.augmented(f.N);
    const auto& ord = canonical_order(f.d, f.N);
    std::vector<double> w(f.size());
    for (size_t i = 0; i < f.size(); ++i) w[i] = D.weight(f.mode_at(i));
    NormReport rep;
    for (int j = 0; j < f.components(); ++j) {
        double s = 0;
        for (size_t i : ord) {
            const double a = std::abs(f.comp[j][i]);
            if (a == 0) continue;
            s += a * std::exp(kTwoPi * w[i]);
            if (detail) rep.detail.push_back({j, f.mode_at(i), a, w[i]});
        }
        rep.per_component.push_back(s);
        rep.value = std::max(rep.value, s);
    }
    return rep;
}

double norm_analytic(const FourierMap& f, double delta) {
    double m = 0;
    for (const auto& c : f.comp) {
        double s = 0;
        for (size_t i : canonical_order(f.d, f.N))
            if (c[i] != Complex(0, 0)) s += std::abs(c[i]) * std::exp(kTwoPi * delta * hypot_l(f.mode_at(i)));
        m = std::max(m, s);
    }
    return m;
}

double seminorm_beta(const FourierMap& f, const Point& beta, double delta_bar) {
    double m = 0;
    for (const auto& c : f.comp) {
        double s = 0;
        for (size_t i : canonical_order(f.d, f.N)) {
            if (c[i] == Complex(0, 0)) continue;
            Lattice l = f.mode_at(i);
            double bl = beta[0] * double(l[0]);
            if (f.d == 2) bl += beta[1] * double(l[1]);
            s += std::abs(c[i]) * std::exp(kTwoPi * delta_bar * std::fabs(bl));
        }
        m = std::max(m, s);
    }
    return m;
}

std::pair<FourierMap, FourierMap> truncate_split(const FourierMap& f, int N) {
    if (N < 0 || N > f.N) fail(ErrorKind::ValidationError, "truncation outside 0..N_max");
    FourierMap head = f.resized(N);
    FourierMap tail = f;
    for (auto& c : tail.comp)
        for (size_t i = 0; i < tail.size(); ++i)
            if (sup(tail.mode_at(i)) <= N) c[i] = 0;
    return {head, tail};
}

FourierMap multiply(const FourierMap& f, const FourierMap& g) {
    if (f.d != g.d) fail(ErrorKind::ValidationError, "dimension mismatch in product");
    const int kf = f.components(), kg = g.components();
    if (kf != kg && kf != 1 && kg != 1) fail(ErrorKind::ValidationError, "component mismatch in product");
    const int d = f.d, No = f.N + g.N, M = 2 * No + 2;
    const size_t G = grid_size(d, M);
    auto samples = [&](const FourierMap& h, int j) {
        std::vector<Complex> a(G, Complex(0, 0));
        for (size_t i = 0; i < h.size(); ++i) a[wrap(h.mode_at(i), d, M)] = h.comp[j][i];
        fft(a, d, M, FFTW_BACKWARD);
        return a;
    };
    FourierMap out(d, No, std::max(kf, kg));
    for (int j = 0; j < out.components(); ++j) {
        auto a = samples(f, kf == 1 ? 0 : j);
        auto b = samples(g, kg == 1 ? 0 : j);
        for (size_t i = 0; i < G; ++i) a[i] *= b[i];
        fft(a, d, M, FFTW_FORWARD);
        for (size_t i = 0; i < out.size(); ++i) out.comp[j][i] = a[wrap(out.mode_at(i), d, M)] / double(G);
    }
    // the product of real maps is real; drop the transform's round-off asymmetry
    if (f.reality_defect_ulp() == 0 && g.reality_defect_ulp() == 0) out.symmetrize();
    return out;
}

FourierMap derivative(const FourierMap& f, int j) {
    if (j < 0 || j >= f.d) fail(ErrorKind::ValidationError, "derivative index outside 0..d-1");
    FourierMap g = f;
    for (auto& c : g.comp)
        for (size_t i = 0; i < g.size(); ++i) c[i] *= Complex(0, kTwoPi * double(g.mode_at(i)[j]));
    return g;
}

VerificationReport remainder_split_check(const FourierMap& f, const SlicedDomain& dom, const SlicedDomain& shrunk,
                                         int N) {
    if (dom.radius.size() != shrunk.radius.size()) fail(ErrorKind::ValidationError, "domains on different grids");
    const double delta = dom.min_radius();
    VerificationReport rep;
    rep.title = "remainder split";
    rep.header.push_back("N = " + std::to_string(N) + ", delta = inf radius = " + std::to_string(delta));
    const FourierMap tail = truncate_split(f, std::min(N, f.N)).second;
    std::vector<double> tail_norm;
    for (int j = 0; j < f.components(); ++j) tail_norm.push_back(norm_analytic(tail.component(j), delta));
    for (size_t i = 0; i < dom.radius.size(); ++i) {
        const double db = dom.radius[i], dbar = shrunk.radius[i];
        if (dbar > db) fail(ErrorKind::ValidationError, "shrunk radius exceeds the original");
        if (!(std::fabs(delta - dbar) < delta / 4))
            fail(ErrorKind::ValidationError, "|delta - shrunk radius| must be below delta/4");
        double margin = INFINITY;
        for (int j = 0; j < f.components(); ++j) {
            const FourierMap t = tail.component(j);
            const double lhs = seminorm_beta(t, dom.grid.beta[i], dbar);
            const double rhs = std::exp(-(db - dbar) * N / 2) * seminorm_beta(t, dom.grid.beta[i], db) +
                               std::exp(-delta * N / 4) * tail_norm[j];
            margin = std::min(margin, rhs - lhs);
        }
        rep.add("questoqui", long(i), margin >= 0, margin, "rhs - lhs at grid direction");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// sampling

std::vector<Point> grid_points(int d, int M) {
    std::vector<Point> x(grid_size(d, M));
    for (size_t i = 0; i < x.size(); ++i) {
        if (d == 1) {
            x[i] = {double(i) / M, 0};
        } else {
            x[i] = {double(i / M) / M, double(i % M) / M};
        }
    }
    return x;
}

std::vector<std::vector<double>> synthesize(const FourierMap& f, int M) {
    if (M < 2 * f.N + 1) fail(ErrorKind::ValidationError, "sampling grid too small for the truncation");
    const size_t G = grid_size(f.d, M);
    std::vector<std::vector<double>> out;
    for (const auto& c : f.comp) {
        std::vector<Complex> a(G, Complex(0, 0));
        for (size_t i = 0; i < f.size(); ++i) a[wrap(f.mode_at(i), f.d, M)] = c[i];
        fft(a, f.d, M, FFTW_BACKWARD);
        std::vector<double> v(G);
        for (size_t i = 0; i < G; ++i) v[i] = a[i].real();
        out.push_back(std::move(v));
    }
    return out;
}

FourierMap analyze(const std::vector<std::vector<double>>& s, int d, int M, int N, double* spill) {
    if (M < 2 * N + 1) fail(ErrorKind::ValidationError, "re-expansion beyond the grid's band");
    const size_t G = grid_size(d, M);
    FourierMap f(d, N, int(s.size()));
    double sp = 0;
    for (size_t j = 0; j < s.size(); ++j) {
        std::vector<Complex> a(G);
        for (size_t i = 0; i < G; ++i) a[i] = s[j][i];
        fft(a, d, M, FFTW_FORWARD);
        for (auto& x : a) x /= double(G);
        for (size_t i = 0; i < f.size(); ++i) f.comp[j][i] = a[wrap(f.mode_at(i), d, M)];
        // everything the grid resolves beyond the box
        double t = 0;
        for (size_t i = 0; i < G; ++i) {
            auto centred = [M](size_t k) { return long(k) <= M / 2 ? long(k) : long(k) - M; };
            Lattice l = d == 1 ? Lattice{centred(i)} : Lattice{centred(i / M), centred(i % M)};
            if (sup(l) > N) t += std::abs(a[i]);
        }
        sp = std::max(sp, t);
    }
    f.symmetrize();
    if (spill) *spill = sp;
    return f;
}

std::vector<std::vector<double>> eval_points(const FourierMap& f, const std::vector<Point>& x, int threads) {
    const int k = f.components();
    const long S = f.side();
    std::vector<std::vector<double>> out(k, std::vector<double>(x.size()));
    parallel_for(x.size(), threads, [&](size_t p) {
        std::vector<Complex> e1(S), e2(f.d == 2 ? S : 1);
        for (long m = -f.N; m <= f.N; ++m) {
            e1[m + f.N] = std::polar(1.0, kTwoPi * double(m) * x[p][0]);
            if (f.d == 2) e2[m + f.N] = std::polar(1.0, kTwoPi * double(m) * x[p][1]);
        }
        for (int j = 0; j < k; ++j) {
            const auto& c = f.comp[j];
            Complex s = 0;
            if (f.d == 1) {
                for (long a = 0; a < S; ++a) s += c[a] * e1[a];
            } else {
                for (long a = 0; a < S; ++a) {
                    Complex r = 0;
                    const Complex* row = &c[a * S];
                    for (long b = 0; b < S; ++b) r += row[b] * e2[b];
                    s += r * e1[a];
                }
            }
            out[j][p] = s.real();
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// composition

ComposeResult compose_shift(const FourierMap& f, const FourierMap& h, const ComposeOptions& opt) {
    if (h.d != f.d || h.components() != f.d) fail(ErrorKind::ValidationError, "shift must be a d-vector map");
    ComposeResult r;
    const int No = opt.N_out >= 0 ? opt.N_out : f.N;
    const int M = opt.grid > 0 ? opt.grid : default_grid(std::max({No, f.N, h.N}));
    r.grid = M;
    auto x = grid_points(f.d, M);
    auto hv = synthesize(h, M);
    for (size_t p = 0; p < x.size(); ++p)
        for (int j = 0; j < f.d; ++j) x[p][j] += hv[j][p];
    r.map = analyze(eval_points(f, x, opt.threads), f.d, M, No, &r.spill);
    return r;
}

ComposeResult compose_shift_series(const FourierMap& f, const FourierMap& h, const ComposeOptions& opt) {
    if (h.d != f.d || h.components() != f.d) fail(ErrorKind::ValidationError, "shift must be a d-vector map");
    const double rho = h.abs_sum() * kTwoPi * f.N;
    if (!(rho < 1)) {
        std::ostringstream os;
        os << "series composition outside its radius: ||h|| 2 pi N = " << rho;
        fail(ErrorKind::OracleDivergence, os.str());
    }
    const int d = f.d;
    const int No = opt.N_out >= 0 ? opt.N_out : f.N;
    const double fn = std::max(f.abs_sum(), 1e-300);
    // order bound: rho^k / k! below 1e-17
    int K = 1;
    for (double t = rho; t >= 1e-17 && K < 80; t *= rho / double(K + 1)) ++K;
    // the truncated series is a trig polynomial of degree K h.N + f.N
    const int deg = K * h.N + f.N;
    int M = std::max(2 * deg + 2, 2 * No + 2);
    M += M & 1;
    ComposeResult r;
    r.grid = M;
    auto hv = synthesize(h, M);
    const size_t G = grid_size(d, M);
    std::vector<std::vector<double>> acc(f.components(), std::vector<double>(G, 0.0));
    // order 0
    for (int j = 0; j < f.components(); ++j) {
        auto s = synthesize(f.component(j), M);
        for (size_t i = 0; i < G; ++i) acc[j][i] += s[0][i];
    }
    r.terms = 1;
    // order k: sum over a + b = k of d1^a d2^b f h1^a h2^b / (a! b!)
    for (int k = 1; k <= K; ++k) {
        std::vector<std::vector<double>> term(f.components(), std::vector<double>(G, 0.0));
        for (int a = (d == 1 ? k : 0); a <= k; ++a) {
            const int b = k - a;
            FourierMap D = f;
            for (int t = 0; t < a; ++t) D = derivative(D, 0);
            for (int t = 0; t < b; ++t) D = derivative(D, 1);
            const double fact = std::tgamma(a + 1.0) * std::tgamma(b + 1.0);
            auto dv = synthesize(D, M);
            for (int j = 0; j < f.components(); ++j)
                for (size_t i = 0; i < G; ++i) {
                    double m = dv[j][i] / fact;
                    for (int t = 0; t < a; ++t) m *= hv[0][i];
                    for (int t = 0; t < b; ++t) m *= hv[1][i];
                    term[j][i] += m;
                }
        }
        for (int j = 0; j < f.components(); ++j)
            for (size_t i = 0; i < G; ++i) acc[j][i] += term[j][i];
        r.terms = k + 1;
        if (max_abs(term) < 1e-16 * fn) break;
    }
    r.map = analyze(acc, d, M, No, &r.spill);
    return r;
}

// ---------------------------------------------------------------------------
// inversion

double contraction_factor(const FourierMap& h) { return h.abs_sum() * kTwoPi * h.N; }

InverseResult invert_near_identity(const FourierMap& h, const InverseOptions& opt) {
    if (h.components() != h.d) fail(ErrorKind::ValidationError, "inversion needs a d-vector map");
    const double q = contraction_factor(h);
    if (!(q < 0.5)) {
        std::ostringstream os;
        os << "inversion guard: ||h|| 2 pi N = " << q << " is not below 1/2";
        fail(ErrorKind::GuardViolation, os.str());
    }
    const int d = h.d;
    const int No = opt.N_out >= 0 ? opt.N_out : h.N;
    const int M = opt.grid > 0 ? opt.grid : default_grid(std::max(No, h.N));
    const auto x = grid_points(d, M);
    const size_t G = x.size();
    auto hv = synthesize(h, M);
    std::vector<Point> y(G);
    for (size_t p = 0; p < G; ++p)
        for (int j = 0; j < d; ++j) y[p][j] = x[p][j] - hv[j][p];
    InverseResult r;
    double prev = INFINITY;
    for (;;) {
        auto hy = eval_points(h, y, opt.threads);
        double res = 0;
        for (size_t p = 0; p < G; ++p)
            for (int j = 0; j < d; ++j) res = std::max(res, std::fabs(y[p][j] + hy[j][p] - x[p][j]));
        r.residual = res;
        if (res <= 1e-15) break;
        if (res > 0.5 * prev) {
            // stagnation at the round-off floor is convergence, not failure
            if (res < 1e-13) break;
            std::ostringstream os;
            os << "fixed point stalled at sweep " << r.sweeps << ": residual " << res << " after " << prev;
            fail(ErrorKind::ContractionFailure, os.str());
        }
        if (r.sweeps >= opt.max_sweeps) fail(ErrorKind::ContractionFailure, "fixed point sweep budget exhausted");
        prev = res;
        for (size_t p = 0; p < G; ++p)
            for (int j = 0; j < d; ++j) y[p][j] = x[p][j] - hy[j][p];
        ++r.sweeps;
    }
    std::vector<std::vector<double>> u(d, std::vector<double>(G));
    for (size_t p = 0; p < G; ++p)
        for (int j = 0; j < d; ++j) u[j][p] = y[p][j] - x[p][j];
    r.g = analyze(u, d, M, No, &r.spill);
    r.g += h.resized(std::min(h.N, No));
    return r;
}

InverseResult invert_near_identity_series(const FourierMap& h, const InverseOptions& opt) {
    if (h.components() != h.d) fail(ErrorKind::ValidationError, "inversion needs a d-vector map");
    const int No = opt.N_out >= 0 ? opt.N_out : h.N;
    const int W = No + 2 * h.N;
    ComposeOptions co;
    co.N_out = W;
    co.threads = opt.threads;
    FourierMap hw = h.resized(W);
    // w_k is stored at truncation W; compose_shift_series guards W
    FourierMap w = compose_shift_series(hw, h, co).map - hw;
    const double w0 = std::max(w.abs_sum(), 1e-300);
    InverseResult r;
    FourierMap g = w;
    for (int k = 1;; ++k) {
        w = compose_shift_series(w, h, co).map - w;
        if (k % 2) g -= w;
        else g += w;
        r.sweeps = k;
        if (w.abs_sum() < 1e-17 * w0 || w.abs_sum() == 0) break;
        if (k >= opt.max_sweeps) fail(ErrorKind::OracleDivergence, "inverse series did not settle");
    }
    r.g = g.resized(No);
    r.spill = truncate_split(g, No).second.abs_sum();
    return r;
}

}  // namespace wb
