#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "wb/errors.hpp"
#include "wb/fourier.hpp"
#include "wb/schedule.hpp"

namespace wb {

// An Error that carries the stage ledger gathered before the failure.
class LedgerError : public Error {
public:
    LedgerError(ErrorKind k, const std::string& what, nlohmann::json ledger)
        : Error(k, what), ledger_(std::move(ledger)) {}
    const nlohmann::json& ledger() const { return ledger_; }

private:
    nlohmann::json ledger_;
};

// e^{2 pi i alpha.l} over the box |l| <= N in component 0 (not a real map),
// with alpha.l reduced mod 1 in MPFR
FourierMap rotation_multipliers(const RealVec& alpha, int N);
// h o R_alpha, diagonal in Fourier space; mult must cover h's box
FourierMap rotate(const FourierMap& h, const FourierMap& mult);

// h(l) = df(l) / (e^{2 pi i alpha.l} - 1) for 0 < |l| <= N, zero elsewhere
FourierMap solve_cohomological(const FourierMap& df, const RealVec& alpha, int N);
// ||h o R_alpha - h - (T_N df - df(0))||, coefficient l1 sum, max over components
double cohomological_residual(const FourierMap& h, const FourierMap& df, const RealVec& alpha, int N);

struct KamParams {
    RealVec alpha;
    int N_max = 32;
    int N1 = -1;              // first stage; default: largest with 2^{N1} <= N_max / 4
    int max_stages = 8;
    int repeats = 1;          // cohomological solves per stage at the same truncation
    double target = 1e-12;    // stop once ||df_n|| drops below
    double smallness = 1e-2;  // refuse inputs with ||df_0||_xi0 above
    double kappa = 0.02;      // domain radii = kappa * schedule column
    int grid = 16;            // schedule directions
    double weight = 0.5;      // constant schedule weight
    long schedule_stages = 8; // schedule columns computed; later stages reuse the last
    bool oracle = true;       // direct composition check at every step
    int threads = 1;
};

struct StepReport {
    long stage = 0;
    int trunc = 0;
    int repeat = 0;
    double norm_head = 0;     // ||T_trunc df_n||_xi_n
    double norm_tail = 0;     // ||R_trunc df_n||_xi_n
    double residual = 0;      // cohomological residual / ||df_n||
    double const_term = 0;    // |df_{n+1}(0)|, max over components
    double defect = 0;        // ||df_{n+1}||, coefficient l1 sum
    double defect_xi = 0;     // ||df_{n+1}||_xi_{n+1}
    double radii_min = 0;
    double h_norm = 0;
    double g_norm = 0;
    double spill = 0;         // composition spill beyond N_max
    double oracle_diff = -1;  // assembled vs direct composition, coefficient l1 sum
    double defect_composed = -1;  // ||H_{<=n}^{-1} f_0 H_{<=n} - R_alpha|| by direct evaluation
    int sweeps = 0;
    bool schedule_extended = false;   // radii copied from the last computed column
    nlohmann::json to_json() const;
};

struct KamState {
    long stage = 0;
    FourierMap df;
    std::vector<FourierMap> h;            // stage maps H_k = id + h_k
    DeltaSchedule schedule;
    EpsilonLedger eps;
    std::vector<StepReport> steps;
    nlohmann::json to_json() const;
};

int default_first_stage(int N_max);
DeltaSchedule kam_schedule(const KamParams& p);
// column n of the schedule times kappa
SlicedDomain stage_domain(const DeltaSchedule& s, long n, double kappa, bool* extended = nullptr);

KamState kam_init(const FourierMap& df0, const KamParams& p);
KamState kam_step(const KamState& state, const KamParams& p);

// x -> H^{-1}(f(H(x))) - x - alpha by pointwise evaluation, H = id + eta
FourierMap direct_conjugate(const FourierMap& df, const FourierMap& eta, const RealVec& alpha, int N_out,
                            int threads = 1);

struct LinearizeResult {
    KamState state;
    FourierMap eta;           // H = id + eta
    double eps0 = 0;          // ||df_0||_xi_0
    double defect = 0;        // ||df_n|| from the ledger
    double defect_direct = 0; // ||H^{-1} f H - R_alpha|| by direct evaluation
    double H_norm = 0;        // ||H - id||_xi at the final stage domain
    double sqrt_eps = 0;
    bool converged = false;
    std::string stop_reason;
    double seconds = 0;
    nlohmann::json summary() const;
    std::string stages_csv() const;
};

LinearizeResult run_linearize(const FourierMap& df0, const KamParams& p);

// f = (id + h*) o R_alpha o (id + h*)^{-1}, returned as f - R_alpha
FourierMap manufacture_test_map(const FourierMap& h_star, const RealVec& alpha, int N_max, int threads = 1,
                                double* spill = nullptr);

struct RotationEstimate {
    std::vector<double> value;
    double error_scale = 0;   // O(1/m): (max |x| drift of the conjugacy) / m
    long iterations = 0;
};
RotationEstimate rotation_vector_estimate(const FourierMap& df, const RealVec& alpha, const Point& x0, long m);

}  // namespace wb
