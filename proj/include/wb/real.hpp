#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <string>

namespace wb {

// Global working precision in bits (>= 64). Reports record the value used.
long default_precision();
void set_default_precision(long bits);

class Real {
public:
    Real();
    explicit Real(double v, long prec = 0);
    Real(const Real& o);
    Real(Real&& o) noexcept;
    Real& operator=(const Real& o);
    Real& operator=(Real&& o) noexcept;
    ~Real();

    static Real with_precision(long prec);
    static Real parse(const std::string& s, long prec = 0);
    static Real from_mpz(const mpz_class& z, long prec = 0, mpfr_rnd_t rnd = MPFR_RNDN);
    static Real from_mpq(const mpq_class& q, long prec = 0, mpfr_rnd_t rnd = MPFR_RNDN);
    static Real pi(long prec = 0);

    long precision() const { return mpfr_get_prec(v_); }
    mpfr_ptr get() { return v_; }
    mpfr_srcptr get() const { return v_; }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
    bool is_zero() const { return mpfr_zero_p(v_) != 0; }
    bool is_finite() const { return mpfr_number_p(v_) != 0; }
    int sign() const { return mpfr_sgn(v_); }
    // Decimal rendering with the given number of significant digits.
    std::string str(int digits = 20) const;

    Real& operator+=(const Real& o);
    Real& operator-=(const Real& o);
    Real& operator*=(const Real& o);
    Real& operator/=(const Real& o);

private:
    mpfr_t v_;
};

Real operator+(const Real& a, const Real& b);
Real operator-(const Real& a, const Real& b);
Real operator*(const Real& a, const Real& b);
Real operator/(const Real& a, const Real& b);
Real operator-(const Real& a);
Real operator*(const Real& a, long k);
bool operator<(const Real& a, const Real& b);
bool operator<=(const Real& a, const Real& b);
bool operator>(const Real& a, const Real& b);
bool operator>=(const Real& a, const Real& b);
bool operator==(const Real& a, const Real& b);

Real abs(const Real& x);
Real sqrt(const Real& x);
Real exp(const Real& x);
Real log(const Real& x);
Real pow(const Real& x, const Real& y);
Real floor(const Real& x);
Real min(const Real& a, const Real& b);
Real max(const Real& a, const Real& b);
mpz_class floor_to_mpz(const Real& x);

}  // namespace wb
