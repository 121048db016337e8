#include "talab/floatp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "talab/error.hpp"

namespace talab {

namespace mp = boost::multiprecision;
using mp::denominator;
using mp::numerator;

namespace {

std::int64_t pow2(int p) { return std::int64_t{1} << p; }

BigInt shl(const BigInt& v, std::int64_t s) {
    return s >= 0 ? BigInt(v << static_cast<unsigned>(s)) : BigInt(v >> static_cast<unsigned>(-s));
}

void check_same(const FloatP& a, const FloatP& b) {
    if (a.precision() != b.precision())
        fail(ErrorKind::PrecisionMismatch, a.debug_string() + " vs " + b.debug_string());
}

}  // namespace

void check_precision(int p) {
    if (p < kMinPrecision || p > kMaxPrecision)
        fail(ErrorKind::InvalidArgument, "precision " + std::to_string(p) + " outside [" +
                                             std::to_string(kMinPrecision) + ", " +
                                             std::to_string(kMaxPrecision) + "]");
}

std::int64_t max_exponent(int p) { return pow2(p) - 1; }
std::int64_t min_exponent(int p) { return -pow2(p); }

ExactRational max_magnitude(int p) {
    return ldexp(ExactRational(pow2(p) - 1), max_exponent(p));
}

ExactRational min_positive(int p) {
    return ldexp(ExactRational(pow2(p - 1)), min_exponent(p));
}

FloatP FloatP::make(std::int64_t r, std::int64_t k, int p) {
    check_precision(p);
    std::int64_t lo = pow2(p - 1);
    std::int64_t hi = pow2(p);
    std::int64_t mag = r < 0 ? -r : r;
    bool ok = (r == 0 && k == 0) || (mag >= lo && mag < hi);
    ok = ok && k >= min_exponent(p) && k <= max_exponent(p);
    if (!ok)
        fail(ErrorKind::InvalidArgument,
             "<" + std::to_string(r) + "," + std::to_string(k) + "> is not a " + std::to_string(p) +
                 "-bit float");
    return FloatP(r, k, p);
}

FloatP FloatP::zero(int p) {
    check_precision(p);
    return FloatP(0, 0, p);
}

ExactRational FloatP::value() const { return ldexp(ExactRational(r_), k_); }

double FloatP::to_double() const {
    if (r_ == 0) return 0.0;
    if (k_ > 2000) return r_ > 0 ? HUGE_VAL : -HUGE_VAL;
    if (k_ < -2000) return r_ > 0 ? 0.0 : -0.0;
    return std::ldexp(static_cast<double>(r_), static_cast<int>(k_));
}

std::string FloatP::debug_string() const {
    std::ostringstream os;
    os << "⟨" << r_ << "," << k_ << "⟩@" << p_;
    return os.str();
}

FloatP round_scaled(const BigInt& num, const BigInt& den, std::int64_t e, int p) {
    check_precision(p);
    require(den > 0, ErrorKind::InvalidArgument, "round_scaled needs a positive denominator");
    if (num == 0) return FloatP(0, 0, p);

    const bool negative = num < 0;
    BigInt n = mp::abs(num);
    BigInt d = den;

    std::int64_t l = bit_length(n) - bit_length(d);
    bool below = l >= 0 ? n < shl(d, l) : shl(n, -l) < d;
    if (below) --l;  // now 2^l <= n/d < 2^(l+1)

    const std::int64_t s = (p - 1) - l;
    if (s >= 0) n = shl(n, s);
    else d = shl(d, -s);
    BigInt rem;
    BigInt q;
    mp::divide_qr(n, d, q, rem);
    std::int64_t k = e - s;
    const std::int64_t binade = l + e;
    const std::int64_t top = pow2(p) - 1;
    const std::int64_t kmin = min_exponent(p);
    const std::int64_t kmax = max_exponent(p);
    const std::int64_t sign = negative ? -1 : 1;

    if (binade > p - 1 + kmax || (binade == p - 1 + kmax && q == top && rem > 0))
        fail(ErrorKind::PrecisionOverflow, "magnitude exceeds the largest " + std::to_string(p) +
                                               "-bit float");

    if (binade < p - 1 + kmin) {
        if (binade < p - 2 + kmin) return FloatP(0, 0, p);
        // Between half the smallest normal and the smallest normal.
        if (q == pow2(p - 1) && rem == 0) return FloatP(0, 0, p);
        return FloatP(sign * pow2(p - 1), kmin, p);
    }

    auto r = q.convert_to<std::int64_t>();
    BigInt twice = rem * 2;
    if (twice > d || (twice == d && (r & 1) != 0)) {
        ++r;
        if (r == pow2(p)) {
            r = pow2(p - 1);
            ++k;
        }
    }
    return FloatP(sign * r, k, p);
}

FloatP round_p(const ExactRational& x, int p) {
    return round_scaled(numerator(x), denominator(x), 0, p);
}

FloatP round_dyadic(const BigInt& m, std::int64_t e, int p) { return round_scaled(m, BigInt(1), e, p); }

FloatP from_double(double v, int p) { return round_p(rational_from_double(v), p); }

ExactRational int_div_special(const BigInt& x, const BigInt& y) {
    require(y != 0, ErrorKind::DivisionByZero, "int_div_special by zero");
    ExactRational q = ratio(x, y);
    if ((x * 4) % y == 0) return q;
    return q + ExactRational(1, 8);
}

FloatP neg(const FloatP& a) {
    if (a.is_zero()) return a;
    return FloatP::make(-a.significand(), a.exponent(), a.precision());
}

FloatP add(const FloatP& a, const FloatP& b) {
    check_same(a, b);
    // Canonical zero carries exponent 0, which would misalign the formula.
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const FloatP& hi = a.exponent() >= b.exponent() ? a : b;
    const FloatP& lo = a.exponent() >= b.exponent() ? b : a;
    const int p = a.precision();
    const std::int64_t shift = hi.exponent() - lo.exponent();
    // The aligned term lies in (0, 1/4): it cannot move the rounded result,
    // but it does push the top float past the largest magnitude.
    if (shift >= p + 3) {
        if (hi.significand() == pow2(p) - 1 && hi.exponent() == max_exponent(p))
            fail(ErrorKind::PrecisionOverflow, "sum exceeds the largest float");
        return hi;
    }
    ExactRational sum = ExactRational(hi.significand()) +
                        int_div_special(BigInt(lo.significand()), BigInt(1) << static_cast<unsigned>(shift));
    return round_scaled(numerator(sum), denominator(sum), hi.exponent(), p);
}

FloatP sub(const FloatP& a, const FloatP& b) { return add(a, neg(b)); }

FloatP mul(const FloatP& a, const FloatP& b) {
    check_same(a, b);
    if (a.is_zero() || b.is_zero()) return FloatP::zero(a.precision());
    return round_dyadic(BigInt(a.significand()) * b.significand(), a.exponent() + b.exponent(),
                        a.precision());
}

FloatP div(const FloatP& a, const FloatP& b) {
    check_same(a, b);
    if (b.is_zero()) fail(ErrorKind::DivisionByZero, a.debug_string() + " / 0");
    if (a.is_zero()) return a;
    const int p = a.precision();
    ExactRational q = int_div_special(BigInt(a.significand()) << (p - 1), BigInt(b.significand()));
    return round_scaled(numerator(q), denominator(q), a.exponent() - b.exponent() - p + 1, p);
}

bool less_equal(const FloatP& a, const FloatP& b) {
    check_same(a, b);
    if (a.is_zero() || b.is_zero()) return a.significand() <= b.significand();
    const int p = a.precision();
    if (a.exponent() >= b.exponent()) {
        const std::int64_t shift = a.exponent() - b.exponent();
        if (shift >= p + 3) return a.significand() < 0;
        return ExactRational(a.significand()) <=
               int_div_special(BigInt(b.significand()), BigInt(1) << static_cast<unsigned>(shift));
    }
    const std::int64_t shift = b.exponent() - a.exponent();
    if (shift >= p + 3) return b.significand() > 0;
    return int_div_special(BigInt(a.significand()), BigInt(1) << static_cast<unsigned>(shift)) <=
           ExactRational(b.significand());
}

std::strong_ordering compare(const FloatP& a, const FloatP& b) {
    bool le = less_equal(a, b);
    bool ge = less_equal(b, a);
    if (le && ge) return std::strong_ordering::equal;
    return le ? std::strong_ordering::less : std::strong_ordering::greater;
}

FloatP floor(const FloatP& a) {
    if (a.is_zero() || a.exponent() >= 0) return a;
    const std::int64_t shift = -a.exponent();
    std::int64_t q;
    if (shift >= 63) q = a.significand() < 0 ? -1 : 0;
    else q = a.significand() >> shift;  // arithmetic shift rounds toward -infinity
    return round_dyadic(BigInt(q), 0, a.precision());
}

FloatP iter_add(std::span<const FloatP> xs) {
    require(!xs.empty(), ErrorKind::InvalidArgument, "iter_add of an empty list");
    const int p = xs.front().precision();
    std::int64_t kmin = 0;
    std::int64_t kmax = 0;
    bool any = false;
    for (const auto& x : xs) {
        if (x.precision() != p) fail(ErrorKind::PrecisionMismatch, "iter_add operands differ in precision");
        if (x.is_zero()) continue;
        kmin = any ? std::min(kmin, x.exponent()) : x.exponent();
        kmax = any ? std::max(kmax, x.exponent()) : x.exponent();
        any = true;
    }
    if (!any) return FloatP::zero(p);
    if (kmax - kmin > (std::int64_t{1} << 26))
        fail(ErrorKind::RangeError, "exponent spread too large for exact aggregation");
    BigInt sum = 0;
    for (const auto& x : xs)
        if (!x.is_zero()) sum += BigInt(x.significand()) << static_cast<unsigned>(x.exponent() - kmin);
    return round_dyadic(sum, kmin, p);
}

FloatP iter_mul(std::span<const FloatP> xs) {
    require(!xs.empty(), ErrorKind::InvalidArgument, "iter_mul of an empty list");
    const int p = xs.front().precision();
    BigInt prod = 1;
    __int128 e = 0;
    bool zero = false;
    for (const auto& x : xs) {
        if (x.precision() != p) fail(ErrorKind::PrecisionMismatch, "iter_mul operands differ in precision");
        if (x.is_zero()) zero = true;
        prod *= x.significand();
        e += x.exponent();
    }
    if (zero) return FloatP::zero(p);
    const __int128 binade = static_cast<__int128>(bit_length(prod)) - 1 + e;
    if (binade > static_cast<__int128>(p - 1 + max_exponent(p)))
        fail(ErrorKind::PrecisionOverflow, "iterated product exceeds the largest float");
    if (binade < static_cast<__int128>(p - 2 + min_exponent(p))) return FloatP::zero(p);
    return round_dyadic(prod, static_cast<std::int64_t>(e), p);
}

std::vector<FloatP> enumerate_all(int p) {
    check_precision(p);
    require(p <= 8, ErrorKind::InvalidArgument, "enumeration limited to p <= 8");
    std::vector<FloatP> pos;
    for (std::int64_t k = min_exponent(p); k <= max_exponent(p); ++k)
        for (std::int64_t r = pow2(p - 1); r < pow2(p); ++r) pos.push_back(FloatP::make(r, k, p));
    std::vector<FloatP> out;
    out.reserve(2 * pos.size() + 1);
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) out.push_back(neg(*it));
    out.push_back(FloatP::zero(p));
    out.insert(out.end(), pos.begin(), pos.end());
    return out;
}

// ---------------------------------------------------------------------------
// Transcendentals. Each is evaluated in fixed point with a rigorous error
// bound; the working precision doubles until both ends of the enclosing
// interval round to the same p-bit float.

namespace {

constexpr std::int64_t kMaxWorkingBits = 1 << 15;

// floor(x * 2^w) up to one unit.
BigInt to_fixed(const FloatP& x, std::int64_t w) {
    return shl(BigInt(x.significand()), x.exponent() + w);
}

// Truncating division of a possibly negative numerator.
BigInt tdiv(const BigInt& a, const BigInt& b) { return a / b; }

const BigInt& ln2_fixed(std::int64_t w) {
    thread_local std::map<std::int64_t, BigInt> cache;
    auto it = cache.find(w);
    if (it != cache.end()) return it->second;
    // ln 2 = sum_{k>=1} 1 / (k 2^k)
    const std::int64_t guard = 32;
    BigInt one = BigInt(1) << static_cast<unsigned>(w + guard);
    BigInt sum = 0;
    for (std::int64_t k = 1;; ++k) {
        BigInt term = (one >> static_cast<unsigned>(k)) / k;
        if (term == 0) break;
        sum += term;
    }
    return cache.emplace(w, BigInt(sum >> static_cast<unsigned>(guard))).first->second;
}

BigInt atan_inv_fixed(std::int64_t x, std::int64_t scale_bits) {
    BigInt power = (BigInt(1) << static_cast<unsigned>(scale_bits)) / x;
    BigInt sum = 0;
    const std::int64_t x2 = x * x;
    for (std::int64_t k = 0; power != 0; ++k) {
        BigInt term = power / (2 * k + 1);
        if (k % 2 == 0) sum += term;
        else sum -= term;
        power /= x2;
    }
    return sum;
}

const BigInt& pi_fixed(std::int64_t w) {
    thread_local std::map<std::int64_t, BigInt> cache;
    auto it = cache.find(w);
    if (it != cache.end()) return it->second;
    const std::int64_t guard = 32;
    BigInt v = 16 * atan_inv_fixed(5, w + guard) - 4 * atan_inv_fixed(239, w + guard);
    return cache.emplace(w, BigInt(v >> static_cast<unsigned>(guard))).first->second;
}

FloatP one(int p) { return FloatP::make(pow2(p - 1), -(p - 1), p); }

bool same_rounding(const BigInt& lo, const BigInt& hi, std::int64_t e, int p, FloatP& out) {
    FloatP a = round_dyadic(lo, e, p);
    FloatP b = round_dyadic(hi, e, p);
    if (!(a == b)) return false;
    out = a;
    return true;
}

}  // namespace

FloatP exp_approx(const FloatP& x, ExpDomain domain) {
    const int p = x.precision();
    if (x.is_zero()) return one(p);
    ExactRational v = x.value();
    if (v < rational_from_double(domain.lo) || v > rational_from_double(domain.hi))
        fail(ErrorKind::RangeError, "exp argument " + x.debug_string() + " outside [" +
                                        std::to_string(domain.lo) + ", " + std::to_string(domain.hi) + "]");
    const std::int64_t n = std::llround(x.to_double() / std::log(2.0));
    const std::int64_t abs_n = n < 0 ? -n : n;
    for (std::int64_t w = p + 32;; w *= 2) {
        BigInt xf = to_fixed(x, w);
        BigInt y = xf - n * ln2_fixed(w);  // |y| <= ~0.35 * 2^w
        BigInt unit = BigInt(1) << static_cast<unsigned>(w);
        BigInt term = unit;
        BigInt sum = unit;
        std::int64_t i = 1;
        for (; term != 0; ++i) {
            term = tdiv(term * y, unit * i);
            sum += term;
        }
        BigInt err = 2 * i + 4 * (2 + abs_n) + 8;
        FloatP out;
        if (same_rounding(sum - err, sum + err, n - w, p, out) || w > kMaxWorkingBits)
            return round_dyadic(sum, n - w, p);
    }
}

FloatP sqrt_approx(const FloatP& x) {
    const int p = x.precision();
    if (x.is_zero()) return x;
    if (x.significand() < 0) fail(ErrorKind::DomainError, "sqrt of negative " + x.debug_string());
    const std::int64_t parity = ((x.exponent() % 2) + 2) % 2;
    const std::int64_t guard = p + 2;
    BigInt n = BigInt(x.significand()) << static_cast<unsigned>(2 * guard + parity);
    const std::int64_t e2 = x.exponent() - 2 * guard - parity;
    BigInt s = mp::sqrt(n);
    if (s * s == n) return round_dyadic(s, e2 / 2, p);
    // Any value strictly between s and s+1 rounds like s + 1/2.
    return round_dyadic(2 * s + 1, e2 / 2 - 1, p);
}

std::pair<FloatP, FloatP> sin_cos_floatp(const FloatP& x) {
    const int p = x.precision();
    if (x.is_zero()) return {x, one(p)};
    // |x| < 2^-p: sin x and cos x sit within half an ulp of x and 1.
    if (x.exponent() + bit_length(BigInt(x.significand())) <= -p) return {x, one(p)};
    if (x.exponent() + bit_length(BigInt(x.significand())) > kTrigMaxLog2)
        fail(ErrorKind::RangeError, "trig argument " + x.debug_string() + " too large");
    const double half_pi = std::acos(0.0);
    const std::int64_t q = std::llround(x.to_double() / half_pi);
    const std::int64_t abs_q = q < 0 ? -q : q;
    const int quadrant = static_cast<int>(((q % 4) + 4) % 4);
    for (std::int64_t w = p + 40;; w *= 2) {
        const std::int64_t wr = w + 64;
        BigInt unit = BigInt(1) << static_cast<unsigned>(wr);
        BigInt y = to_fixed(x, wr) - q * pi_fixed(wr - 1);
        BigInt s = y;
        BigInt c = unit;
        BigInt ts = y;
        BigInt tc = unit;
        std::int64_t steps = 0;
        for (std::int64_t i = 1; ts != 0 || tc != 0; ++i, ++steps) {
            ts = -tdiv(tdiv(ts * y, unit) * y, unit * ((2 * i) * (2 * i + 1)));
            tc = -tdiv(tdiv(tc * y, unit) * y, unit * ((2 * i - 1) * (2 * i)));
            s += ts;
            c += tc;
        }
        BigInt err = 6 * steps + 2 * (2 + abs_q) + 8;
        BigInt sv = s, cv = c;
        switch (quadrant) {
            case 1: sv = c; cv = -s; break;
            case 2: sv = -s; cv = -c; break;
            case 3: sv = -c; cv = s; break;
            default: break;
        }
        FloatP so, co;
        bool done = same_rounding(sv - err, sv + err, -wr, p, so) &&
                    same_rounding(cv - err, cv + err, -wr, p, co);
        if (done) return {so, co};
        if (w > kMaxWorkingBits) return {round_dyadic(sv, -wr, p), round_dyadic(cv, -wr, p)};
    }
}

}  // namespace talab
