#pragma once

#include <array>
#include <complex>
#include <json.hpp>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wb/diophantine.hpp"
#include "wb/report.hpp"
#include "wb/schedule.hpp"

namespace wb {

using Complex = std::complex<double>;
using Point = std::array<double, 2>;   // second entry unused when d = 1

// Truncated Fourier series of a real map T^d -> R^k (k components), stored on
// the sup-norm box |l| <= N. Coefficients outside the box are zero.
struct FourierMap {
    int d = 2;
    int N = 0;
    std::vector<std::vector<Complex>> comp;

    FourierMap() = default;
    FourierMap(int d, int N, int components);
    static FourierMap constant(int d, const std::vector<double>& v);
    // c e_l + conj(c) e_{-l} in component j
    static FourierMap mode(int d, int N, const Lattice& l, Complex c, int components = 1, int j = 0);

    int components() const { return int(comp.size()); }
    long side() const { return 2L * N + 1; }
    size_t size() const;
    bool in_box(const Lattice& l) const;
    size_t index(const Lattice& l) const;
    Lattice mode_at(size_t idx) const;
    Complex get(int j, const Lattice& l) const;
    void set(int j, const Lattice& l, Complex c);
    std::vector<double> mean() const;

    // real part of the series at a real point
    std::vector<double> eval(const Point& x) const;
    FourierMap resized(int N2) const;
    FourierMap component(int j) const;
    // enforce c(-l) = conj c(l) exactly (average of the two)
    void symmetrize();
    // max |c(-l) - conj c(l)| in units of ulp(|c(l)|)
    double reality_defect_ulp() const;
    // sum |c| over the box, max over components (the delta = 0 norm)
    double abs_sum() const;

    FourierMap& operator+=(const FourierMap& o);
    FourierMap& operator-=(const FourierMap& o);
    FourierMap& operator*=(double s);

    nlohmann::json to_json() const;
    static FourierMap from_json(const nlohmann::json& j);
};

FourierMap operator+(FourierMap a, const FourierMap& b);
FourierMap operator-(FourierMap a, const FourierMap& b);
FourierMap operator*(FourierMap a, double s);

// Box indices sorted by sup norm, then lexicographically; every sum over
// coefficients runs in this order.
const std::vector<size_t>& canonical_order(int d, int N);

// Real trigonometric polynomial with |c(l)| <= scale e^{-decay |l|}.
FourierMap random_map(int d, int N, int components, double scale, double decay, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// domains and norms

struct SlicedDomain {
    DirectionGrid grid;
    std::vector<double> radius;    // per grid direction
    bool constant = false;
    // directions actually used by the norm: the grid plus, after augmented(),
    // every primitive l/|l|_2 in the box, with radii interpolated in angle
    std::vector<Point> dir;
    std::vector<double> dir_radius;
    int augmented_to = -1;

    static SlicedDomain uniform(const DirectionGrid& g, double delta);
    static SlicedDomain sliced(const DirectionGrid& g, std::vector<double> radii);
    SlicedDomain augmented(int N) const;
    SlicedDomain scaled(double s) const;
    double radius_at(double angle) const;
    double min_radius() const;
    // max over dir of r |beta.l|
    double weight(const Lattice& l) const;
};

struct NormRow {
    int component;
    Lattice l;
    double abs;
    double weight;
};

struct NormReport {
    double value = 0;
    std::vector<double> per_component;
    std::vector<NormRow> detail;
    double resum() const;
    std::string to_csv() const;
};

// ||f||_xi. The domain is augmented to f.N unless it already covers it.
NormReport norm_xi(const FourierMap& f, const SlicedDomain& dom, bool detail = false);
// sum |c| e^{2 pi delta |l|_2}, max over components
double norm_analytic(const FourierMap& f, double delta);
double seminorm_beta(const FourierMap& f, const Point& beta, double delta_bar);

std::pair<FourierMap, FourierMap> truncate_split(const FourierMap& f, int N);
FourierMap multiply(const FourierMap& f, const FourierMap& g);
FourierMap derivative(const FourierMap& f, int j);   // j in 0..d-1

VerificationReport remainder_split_check(const FourierMap& f, const SlicedDomain& dom, const SlicedDomain& shrunk,
                                         int N);

// ---------------------------------------------------------------------------
// sampling, composition, inversion

// values on the uniform grid x = k/M, row-major, one vector per component
std::vector<std::vector<double>> synthesize(const FourierMap& f, int M);
// re-expansion of grid samples; sum |c| of the modes beyond N goes to spill
FourierMap analyze(const std::vector<std::vector<double>>& s, int d, int M, int N, double* spill = nullptr);
std::vector<Point> grid_points(int d, int M);
std::vector<std::vector<double>> eval_points(const FourierMap& f, const std::vector<Point>& x, int threads = 1);

struct ComposeOptions {
    int N_out = -1;   // default f.N
    int grid = 0;     // default 4 max(N_out, f.N, h.N)
    int threads = 1;
};

struct ComposeResult {
    FourierMap map;
    double spill = 0;
    int grid = 0;
    int terms = 0;   // series path only
};

// x -> f(x + h(x)); h has d components and may carry a constant part.
ComposeResult compose_shift(const FourierMap& f, const FourierMap& h, const ComposeOptions& opt = {});
// Taylor series in h, products in coefficient space; OracleDivergence unless
// ||h|| 2 pi f.N < 1.
ComposeResult compose_shift_series(const FourierMap& f, const FourierMap& h, const ComposeOptions& opt = {});

struct InverseOptions {
    int N_out = -1;   // default h.N
    int grid = 0;
    int max_sweeps = 200;
    int threads = 1;
};

struct InverseResult {
    FourierMap g;          // (id - h + g) o (id + h) = id
    double residual = 0;   // max |y + h(y) - x| over the grid, grid path
    int sweeps = 0;
    double spill = 0;
};

// pointwise fixed point y <- x - h(y), then re-expansion
InverseResult invert_near_identity(const FourierMap& h, const InverseOptions& opt = {});
// g = sum_k (-1)^k w_k with w_0 = h o (id+h) - h, w_{k+1} = w_k o (id+h) - w_k
InverseResult invert_near_identity_series(const FourierMap& h, const InverseOptions& opt = {});
// ||h|| 2 pi h.N, the contraction factor of the fixed point
double contraction_factor(const FourierMap& h);

}  // namespace wb
