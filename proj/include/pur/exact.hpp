#pragma once
// Exact arithmetic helpers: powers of 5 for lattice geometry, dyadics for weights.

#include <gmpxx.h>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace pur {

using i64 = std::int64_t;

inline i64 pow5(int m)
{
    if (m < 0 || m > 27) throw std::out_of_range("pow5: exponent " + std::to_string(m));
    i64 r = 1;
    while (m-- > 0) r *= 5;
    return r;
}

// 5^{-m} as an exact rational
inline mpq_class inv5(int m)
{
    mpz_class d;
    mpz_ui_pow_ui(d.get_mpz_t(), 5, static_cast<unsigned long>(m));
    return mpq_class(mpz_class(1), d);
}

// 2^{-h}
inline mpq_class dyadic(int h)
{
    mpz_class d;
    mpz_ui_pow_ui(d.get_mpz_t(), 2, static_cast<unsigned long>(h));
    return mpq_class(mpz_class(1), d);
}

inline double inv5d(int m)
{
    double r = 1.0;
    while (m-- > 0) r /= 5.0;
    return r;
}

inline mpq_class qabs(const mpq_class& x) { return x < 0 ? mpq_class(-x) : x; }
inline mpq_class qmax(const mpq_class& a, const mpq_class& b) { return a < b ? b : a; }
inline mpq_class qmin(const mpq_class& a, const mpq_class& b) { return a < b ? a : b; }

// uniform helpers so chart code can be templated on double / mpq_class
inline double nabs(double x) { return x < 0 ? -x : x; }
inline mpq_class nabs(const mpq_class& x) { return qabs(x); }
inline double nmax(double a, double b) { return a < b ? b : a; }
inline mpq_class nmax(const mpq_class& a, const mpq_class& b) { return qmax(a, b); }
inline double todouble(double x) { return x; }
inline double todouble(const mpq_class& x) { return x.get_d(); }

// uniform double in [0,1) from 53 random bits; identical across standard libraries
inline double u01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

} // namespace pur
