#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fairflip/rational.hpp"

namespace fairflip {

// ---------------------------------------------------------------------------
// Round/coin schedule: round i of m tosses (m+1-i)^2 coins.
// ---------------------------------------------------------------------------
struct WeightSchedule {
    int rounds = 0;
    std::vector<long> round_coins;   // 1-based: round_coins[i] = (m+1-i)^2
    std::vector<long> suffix_coins;  // 1-based: suffix_coins[i] = sum_{j>=i} round_coins[j]; [m+1] = 0
    bool total_odd = false;

    long coins_in_round(int i) const { return round_coins.at(static_cast<std::size_t>(i)); }
    long coins_from(int i) const { return suffix_coins.at(static_cast<std::size_t>(i)); }
    long total() const { return suffix_coins[1]; }
};

inline WeightSchedule weight_schedule(int m) {
    if (m < 1) throw std::domain_error("weight_schedule: round count must be positive");
    WeightSchedule s;
    s.rounds = m;
    s.round_coins.assign(static_cast<std::size_t>(m) + 2, 0);
    s.suffix_coins.assign(static_cast<std::size_t>(m) + 2, 0);
    for (int i = m; i >= 1; --i) {
        long side = static_cast<long>(m) + 1 - i;
        s.round_coins[static_cast<std::size_t>(i)] = side * side;
        s.suffix_coins[static_cast<std::size_t>(i)] =
            s.round_coins[static_cast<std::size_t>(i)] + s.suffix_coins[static_cast<std::size_t>(i) + 1];
    }
    s.total_odd = (s.suffix_coins[1] % 2) != 0;
    return s;
}

// sign: 1 on non-negative input, 0 otherwise.
inline int sign_bit(long x) { return x >= 0 ? 1 : 0; }

// Bits needed to encode an integer in [-ell, ell]: ceil(log2 ell) + 1.
inline int code_width(long ell) {
    if (ell < 1) throw std::domain_error("code_width: ell must be positive");
    int bits = 0;
    while ((1L << bits) < ell) ++bits;
    return bits + 1;
}

// ---------------------------------------------------------------------------
// Probability values carried through the protocol: an exact rational in [0,1]
// together with its 64-bit fixed-point rounding (the wire encoding).
// ---------------------------------------------------------------------------
struct DeltaValue {
    Rat exact;               // value in [0,1]
    std::uint64_t fixed64 = 0;  // round-to-nearest of exact * 2^64, saturated at 2^64-1

    double value() const { return to_double(exact); }
};

inline std::uint64_t fixed64_of(const Rat& v) {
    if (v <= 0) return 0;
    if (v >= 1) return ~0ULL;  // saturate; 1.0 is not representable in 64 fraction bits
    Int scaled_num = v.get_num() << 65;
    Int q = (scaled_num / v.get_den() + 1) >> 1;  // round half up
    if (q > Int(1) << 64) q = Int(1) << 64;
    std::uint64_t lo = q.get_ui();
    if (mpz_sizeinbase(q.get_mpz_t(), 2) > 64) return ~0ULL;
    return lo;
}

inline DeltaValue make_delta(const Rat& v) {
    if (v < 0 || v > 1) throw std::domain_error("delta value out of [0,1]");
    return DeltaValue{v, fixed64_of(v)};
}

inline DeltaValue make_delta(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("delta value out of [0,1]");
    return make_delta(Rat(v));
}

// The dyadic value actually carried on the wire.
inline Rat delta_from_fixed64(std::uint64_t raw) {
    Rat r(Int(raw), Int(1) << 64);
    r.canonicalize();
    return r;
}

// ---------------------------------------------------------------------------
// Binomial distribution of the sum of n independent +-1 coins with
// Pr[+1] = (1+eps)/2.  Exact (rational) and floating backends.
// ---------------------------------------------------------------------------

// Exact pmf row over j = number of +1 coins (sum k = 2j - n), by convolution.
inline std::vector<Rat> binom_pmf_row(long n, const Rat& eps) {
    if (n < 0) throw std::domain_error("binom: negative coin count");
    if (eps < -1 || eps > 1) throw std::domain_error("binom: bias out of [-1,1]");
    Rat p = (Rat(1) + eps) / 2;
    Rat q = Rat(1) - p;
    std::vector<Rat> row{Rat(1)};
    for (long step = 0; step < n; ++step) {
        std::vector<Rat> next(row.size() + 1, Rat(0));
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] == 0) continue;
            next[j] += row[j] * q;
            next[j + 1] += row[j] * p;
        }
        row.swap(next);
    }
    return row;
}

inline Rat binom_pmf(long n, const Rat& eps, long k) {
    if ((k + n) % 2 != 0 || k < -n || k > n) return Rat(0);
    return binom_pmf_row(n, eps)[static_cast<std::size_t>((k + n) / 2)];
}

inline Rat binom_tail(long n, const Rat& eps, long k) {
    if (k <= -n) return Rat(1);
    if (k > n) return Rat(0);
    auto row = binom_pmf_row(n, eps);
    long jmin = (k + n + 1) / 2;  // smallest j with 2j - n >= k
    Rat acc(0);
    for (long j = jmin; j <= n; ++j) acc += row[static_cast<std::size_t>(j)];
    return acc;
}

namespace detail {

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Regularized incomplete beta I_x(a,b) by continued fraction (Lentz).
inline double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return h;
}

inline double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// Pr[X >= j] for X ~ Binomial(n, p).
inline double binom_count_sf(long n, double p, long j) {
    if (j <= 0) return 1.0;
    if (j > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    return betai(static_cast<double>(j), static_cast<double>(n - j + 1), p);
}

}  // namespace detail

inline double binom_pmf(long n, double eps, long k) {
    if (n < 0) throw std::domain_error("binom: negative coin count");
    if (!(eps >= -1.0 && eps <= 1.0)) throw std::domain_error("binom: bias out of [-1,1]");
    if ((k + n) % 2 != 0 || k < -n || k > n) return 0.0;
    long j = (k + n) / 2;
    double p = 0.5 * (1.0 + eps), q = 1.0 - p;
    if (p == 0.0) return j == 0 ? 1.0 : 0.0;
    if (q == 0.0) return j == n ? 1.0 : 0.0;
    return std::exp(detail::log_choose(static_cast<double>(n), static_cast<double>(j)) +
                    j * std::log(p) + (n - j) * std::log(q));
}

inline double binom_tail(long n, double eps, long k) {
    if (n < 0) throw std::domain_error("binom: negative coin count");
    if (!(eps >= -1.0 && eps <= 1.0)) throw std::domain_error("binom: bias out of [-1,1]");
    if (k <= -n) return 1.0;
    if (k > n) return 0.0;
    long j = (k + n + 1) / 2;
    return detail::binom_count_sf(n, 0.5 * (1.0 + eps), j);
}

// sBias(n, delta): the bias eps with Pr[sum of n eps-coins >= 0] = delta,
// found by bisection (the tail is strictly increasing in eps).
inline double sbias(long n, double delta) {
    if (n < 1) throw std::domain_error("sbias: n must be positive");
    delta = std::clamp(delta, 0.0, 1.0);
    if (delta <= 0.0) return -1.0;
    if (delta >= 1.0) return 1.0;
    double lo = -1.0, hi = 1.0;
    double mid = 0.0;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        double v = binom_tail(n, mid, 0L);
        if (std::fabs(v - delta) <= 1e-13) break;
        if (v < delta)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-17) break;
    }
    return mid;
}

// ---------------------------------------------------------------------------
// Hypergeometric distribution of the weight of a uniform l-subset of a +-1
// vector of length N and total weight p.
// ---------------------------------------------------------------------------
inline void hyp_check(long N, long p, long l) {
    if (N < 0 || l < 0 || l > N) throw std::domain_error("hyp: need 0 <= l <= N");
    if (p < -N || p > N) throw std::domain_error("hyp: need |p| <= N");
    if ((N + p) % 2 != 0) throw std::domain_error("hyp: N and p must have equal parity");
}

// Exact pmf via the closed form with three binomial coefficients.
inline Rat hyp_pmf(long N, long p, long l, long k) {
    hyp_check(N, p, l);
    if ((l + k) % 2 != 0) return Rat(0);
    long ones_in_sample = (l + k) / 2;
    long rest = ((N - l) + (p - k)) / 2;
    if (ones_in_sample < 0 || ones_in_sample > l || rest < 0 || rest > N - l) return Rat(0);
    Rat r(binom_coeff(static_cast<unsigned long>(l), ones_in_sample) *
              binom_coeff(static_cast<unsigned long>(N - l), rest),
          binom_coeff(static_cast<unsigned long>(N), (N + p) / 2));
    r.canonicalize();
    return r;
}

inline Rat hyp_tail(long N, long p, long l, long k) {
    hyp_check(N, p, l);
    Rat acc(0);
    for (long t = std::max(k, -l); t <= l; ++t) acc += hyp_pmf(N, p, l, t);
    return acc;
}

inline double hyp_pmf_f(long N, long p, long l, long k) {
    hyp_check(N, p, l);
    if ((l + k) % 2 != 0) return 0.0;
    long a = (l + k) / 2;
    long b = ((N - l) + (p - k)) / 2;
    if (a < 0 || a > l || b < 0 || b > N - l) return 0.0;
    double ln = detail::log_choose(static_cast<double>(l), static_cast<double>(a)) +
                detail::log_choose(static_cast<double>(N - l), static_cast<double>(b)) -
                detail::log_choose(static_cast<double>(N), static_cast<double>((N + p) / 2));
    return std::exp(ln);
}

inline double hyp_tail_f(long N, long p, long l, long k) {
    hyp_check(N, p, l);
    // Sum the smaller side for accuracy.
    long lo = std::max(k, -l);
    double up = 0.0;
    for (long t = lo; t <= l; ++t) up += hyp_pmf_f(N, p, l, t);
    if (up < 0.5) return std::min(up, 1.0);
    double down = 0.0;
    for (long t = -l; t < lo; ++t) down += hyp_pmf_f(N, p, l, t);
    return std::clamp(1.0 - down, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Noise-bank size factors.
// ---------------------------------------------------------------------------
struct AlphaFactor {
    int m = 0;
    int ell = 0;
    int k = 0;
    Rat exponent;        // (2^{l-3}/(2^{l-2}-1)) * ((2^{k-2}-1)/2^{k-3})
    double value = 1.0;  // m^exponent
    long bank_size = 0;  // max(ceil(value * suffix_coins[1]), suffix_coins[1])
};

inline AlphaFactor alpha_factor(int m, int ell, int k) {
    if (m < 1) throw std::domain_error("alpha_factor: m must be positive");
    if (ell < 3) throw std::domain_error("alpha_factor: ell must be at least 3");
    if (k < 2 || k > ell) throw std::domain_error("alpha_factor: need 2 <= k <= ell");
    AlphaFactor a;
    a.m = m;
    a.ell = ell;
    a.k = k;
    // 2^{l-3}/(2^{l-2}-1): for l >= 3 both parts are integral.
    Rat lhs(pow_int(Int(2), static_cast<unsigned long>(ell - 3)), pow_int(Int(2), static_cast<unsigned long>(ell - 2)) - 1);
    // (2^{k-2}-1)/2^{k-3}: k = 2 gives 0 / (1/2) = 0.
    Rat rhs = (k == 2) ? Rat(0)
                       : Rat(pow_int(Int(2), static_cast<unsigned long>(k - 2)) - 1,
                             pow_int(Int(2), static_cast<unsigned long>(k - 3)));
    lhs.canonicalize();
    rhs.canonicalize();
    a.exponent = lhs * rhs;
    a.exponent.canonicalize();
    a.value = std::pow(static_cast<double>(m), to_double(a.exponent));

    long ms1 = weight_schedule(m).total();
    // Exact ceil(m^{p/q} * ms1): smallest N with N^q >= m^p * ms1^q.
    unsigned long pexp = a.exponent.get_num().get_ui();
    unsigned long qexp = a.exponent.get_den().get_ui();
    Int target = pow_int(Int(m), pexp) * pow_int(Int(ms1), qexp);
    long guess = static_cast<long>(std::floor(a.value * static_cast<double>(ms1))) - 2;
    if (guess < 1) guess = 1;
    while (pow_int(Int(guess), qexp) < target) ++guess;
    a.bank_size = std::max(guess, ms1);
    return a;
}

// Upper tail of the standard normal (the form used for sanity estimates only).
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace fairflip
