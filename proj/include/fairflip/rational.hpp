#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fairflip {

using Rat = mpq_class;
using Int = mpz_class;

inline double to_double(const Rat& q) { return q.get_d(); }

inline Rat rat(long num, long den = 1) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}

inline Rat rat(const Int& num, const Int& den) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}

// C(n, k) as an exact integer, 0 outside range.
inline Int binom_coeff(unsigned long n, long k) {
    if (k < 0 || static_cast<unsigned long>(k) > n) return Int(0);
    Int r;
    mpz_bin_uiui(r.get_mpz_t(), n, static_cast<unsigned long>(k));
    return r;
}

inline Rat pow_rat(const Rat& base, unsigned long e) {
    Rat num, den;
    mpz_pow_ui(num.get_num_mpz_t(), base.get_num_mpz_t(), e);
    mpz_pow_ui(den.get_num_mpz_t(), base.get_den_mpz_t(), e);
    num.get_den() = den.get_num();
    num.canonicalize();
    return num;
}

inline Int pow_int(const Int& base, unsigned long e) {
    Int r;
    mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), e);
    return r;
}

inline std::string rat_str(const Rat& q) { return q.get_str(); }

}  // namespace fairflip
