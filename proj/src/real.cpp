#include "wb/real.hpp"

#include <algorithm>
#include <atomic>
#include <vector>

#include "wb/errors.hpp"

namespace wb {

namespace {
std::atomic<long> g_precision{256};

long pick(long prec) { return prec > 0 ? prec : g_precision.load(); }
long wider(const Real& a, const Real& b) { return std::max(a.precision(), b.precision()); }
}  // namespace

const char* kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::RationalTruncation: return "RationalTruncation";
    case ErrorKind::ResonanceDetected: return "ResonanceDetected";
    case ErrorKind::ExponentOverflow: return "ExponentOverflow";
    case ErrorKind::ScanTooLarge: return "ScanTooLarge";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::OracleDivergence: return "OracleDivergence";
    case ErrorKind::ContractionFailure: return "ContractionFailure";
    case ErrorKind::StepDiverged: return "StepDiverged";
    case ErrorKind::GuardViolation: return "GuardViolation";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

long default_precision() { return g_precision.load(); }

void set_default_precision(long bits) {
    if (bits < 64) fail(ErrorKind::ValidationError, "precision must be at least 64 bits");
    g_precision.store(bits);
}

Real::Real() {
    mpfr_init2(v_, g_precision.load());
    mpfr_set_zero(v_, 1);
}

Real::Real(double v, long prec) {
    mpfr_init2(v_, pick(prec));
    mpfr_set_d(v_, v, MPFR_RNDN);
}

Real::Real(const Real& o) {
    mpfr_init2(v_, o.precision());
    mpfr_set(v_, o.v_, MPFR_RNDN);
}

Real::Real(Real&& o) noexcept {
    mpfr_init2(v_, MPFR_PREC_MIN);
    mpfr_swap(v_, o.v_);
}

Real& Real::operator=(const Real& o) {
    if (this != &o) {
        mpfr_set_prec(v_, o.precision());
        mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    return *this;
}

Real& Real::operator=(Real&& o) noexcept {
    mpfr_swap(v_, o.v_);
    return *this;
}

Real::~Real() { mpfr_clear(v_); }

Real Real::with_precision(long prec) {
    Real r;
    mpfr_set_prec(r.v_, pick(prec));
    mpfr_set_zero(r.v_, 1);
    return r;
}

Real Real::parse(const std::string& s, long prec) {
    Real r = with_precision(prec);
    if (mpfr_set_str(r.v_, s.c_str(), 10, MPFR_RNDN) != 0 && !r.is_finite())
        fail(ErrorKind::ValidationError, "cannot parse real number '" + s + "'");
    return r;
}

Real Real::from_mpz(const mpz_class& z, long prec, mpfr_rnd_t rnd) {
    Real r = with_precision(prec);
    mpfr_set_z(r.v_, z.get_mpz_t(), rnd);
    return r;
}

Real Real::from_mpq(const mpq_class& q, long prec, mpfr_rnd_t rnd) {
    Real r = with_precision(prec);
    mpfr_set_q(r.v_, q.get_mpq_t(), rnd);
    return r;
}

Real Real::pi(long prec) {
    Real r = with_precision(prec);
    mpfr_const_pi(r.v_, MPFR_RNDN);
    return r;
}

std::string Real::str(int digits) const {
    if (!is_finite()) return mpfr_nan_p(v_) ? "nan" : (sign() > 0 ? "inf" : "-inf");
    std::vector<char> buf(digits + 32);
    mpfr_snprintf(buf.data(), buf.size(), "%.*Rg", digits, v_);
    return std::string(buf.data());
}

Real& Real::operator+=(const Real& o) {
    if (o.precision() > precision()) mpfr_prec_round(v_, o.precision(), MPFR_RNDN);
    mpfr_add(v_, v_, o.v_, MPFR_RNDN);
    return *this;
}
Real& Real::operator-=(const Real& o) {
    if (o.precision() > precision()) mpfr_prec_round(v_, o.precision(), MPFR_RNDN);
    mpfr_sub(v_, v_, o.v_, MPFR_RNDN);
    return *this;
}
Real& Real::operator*=(const Real& o) {
    if (o.precision() > precision()) mpfr_prec_round(v_, o.precision(), MPFR_RNDN);
    mpfr_mul(v_, v_, o.v_, MPFR_RNDN);
    return *this;
}
Real& Real::operator/=(const Real& o) {
    if (o.precision() > precision()) mpfr_prec_round(v_, o.precision(), MPFR_RNDN);
    mpfr_div(v_, v_, o.v_, MPFR_RNDN);
    return *this;
}

Real operator+(const Real& a, const Real& b) {
    Real r = Real::with_precision(wider(a, b));
    mpfr_add(r.get(), a.get(), b.get(), MPFR_RNDN);
    return r;
}
Real operator-(const Real& a, const Real& b) {
    Real r = Real::with_precision(wider(a, b));
    mpfr_sub(r.get(), a.get(), b.get(), MPFR_RNDN);
    return r;
}
Real operator*(const Real& a, const Real& b) {
    Real r = Real::with_precision(wider(a, b));
    mpfr_mul(r.get(), a.get(), b.get(), MPFR_RNDN);
    return r;
}
Real operator/(const Real& a, const Real& b) {
    Real r = Real::with_precision(wider(a, b));
    mpfr_div(r.get(), a.get(), b.get(), MPFR_RNDN);
    return r;
}
Real operator-(const Real& a) {
    Real r = Real::with_precision(a.precision());
    mpfr_neg(r.get(), a.get(), MPFR_RNDN);
    return r;
}
Real operator*(const Real& a, long k) {
    Real r = Real::with_precision(a.precision());
    mpfr_mul_si(r.get(), a.get(), k, MPFR_RNDN);
    return r;
}
bool operator<(const Real& a, const Real& b) { return mpfr_less_p(a.get(), b.get()) != 0; }
bool operator<=(const Real& a, const Real& b) { return mpfr_lessequal_p(a.get(), b.get()) != 0; }
bool operator>(const Real& a, const Real& b) { return mpfr_greater_p(a.get(), b.get()) != 0; }
bool operator>=(const Real& a, const Real& b) { return mpfr_greaterequal_p(a.get(), b.get()) != 0; }
bool operator==(const Real& a, const Real& b) { return mpfr_equal_p(a.get(), b.get()) != 0; }

#define WB_UNARY(name, call)                                \
    Real name(const Real& x) {                              \
        Real r = Real::with_precision(x.precision());       \
        call(r.get(), x.get(), MPFR_RNDN);                  \
        return r;                                           \
    }
WB_UNARY(abs, mpfr_abs)
WB_UNARY(sqrt, mpfr_sqrt)
WB_UNARY(exp, mpfr_exp)
WB_UNARY(log, mpfr_log)
#undef WB_UNARY

Real pow(const Real& x, const Real& y) {
    Real r = Real::with_precision(wider(x, y));
    mpfr_pow(r.get(), x.get(), y.get(), MPFR_RNDN);
    return r;
}

Real floor(const Real& x) {
    Real r = Real::with_precision(x.precision());
    mpfr_floor(r.get(), x.get());
    return r;
}

Real min(const Real& a, const Real& b) { return b < a ? b : a; }
Real max(const Real& a, const Real& b) { return a < b ? b : a; }

mpz_class floor_to_mpz(const Real& x) {
    mpz_class z;
    mpfr_get_z(z.get_mpz_t(), x.get(), MPFR_RNDD);
    return z;
}

}  // namespace wb
