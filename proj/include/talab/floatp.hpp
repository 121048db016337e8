#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "talab/rational.hpp"

namespace talab {

inline constexpr int kMinPrecision = 2;
inline constexpr int kMaxPrecision = 60;

// A p-bit float <r, k> with value r * 2^k.
//   r in (-2^p, -2^(p-1)] u {0} u [2^(p-1), 2^p),  k in [-2^p, 2^p),  zero is <0, 0>.
class FloatP {
public:
    FloatP() = default;

    // Validates the range invariants; throws InvalidArgument when violated.
    static FloatP make(std::int64_t r, std::int64_t k, int p);
    static FloatP zero(int p);

    std::int64_t significand() const noexcept { return r_; }
    std::int64_t exponent() const noexcept { return k_; }
    int precision() const noexcept { return p_; }
    bool is_zero() const noexcept { return r_ == 0; }

    ExactRational value() const;
    double to_double() const;
    // "⟨r,k⟩@p"
    std::string debug_string() const;

    friend bool operator==(const FloatP&, const FloatP&) = default;

private:
    FloatP(std::int64_t r, std::int64_t k, int p) : r_(r), k_(k), p_(p) {}

    std::int64_t r_ = 0;
    std::int64_t k_ = 0;
    int p_ = kMinPrecision;

    friend FloatP round_scaled(const BigInt&, const BigInt&, std::int64_t, int);
};

// Largest representable exponent 2^p - 1 and smallest -2^p.
std::int64_t max_exponent(int p);
std::int64_t min_exponent(int p);
ExactRational max_magnitude(int p);
ExactRational min_positive(int p);

void check_precision(int p);

// Nearest p-bit float to (num/den) * 2^e, den > 0. Ties go to the even
// significand; a tie between zero and the smallest normal goes to zero.
FloatP round_scaled(const BigInt& num, const BigInt& den, std::int64_t e, int p);

FloatP round_p(const ExactRational& x, int p);
FloatP round_dyadic(const BigInt& m, std::int64_t e, int p);
FloatP from_double(double v, int p);

// x/y when that is a multiple of 1/4, else 1/8 + x/y.
ExactRational int_div_special(const BigInt& x, const BigInt& y);

FloatP add(const FloatP& a, const FloatP& b);
FloatP sub(const FloatP& a, const FloatP& b);
FloatP neg(const FloatP& a);
FloatP mul(const FloatP& a, const FloatP& b);
FloatP div(const FloatP& a, const FloatP& b);
std::strong_ordering compare(const FloatP& a, const FloatP& b);
bool less_equal(const FloatP& a, const FloatP& b);
FloatP floor(const FloatP& a);

FloatP iter_add(std::span<const FloatP> xs);
FloatP iter_mul(std::span<const FloatP> xs);

struct ExpDomain {
    double lo = -64.0;
    double hi = 64.0;
};

FloatP exp_approx(const FloatP& x, ExpDomain domain = {});
FloatP sqrt_approx(const FloatP& x);

// Arguments with |x| >= 2^kTrigMaxLog2 are rejected with RangeError.
inline constexpr int kTrigMaxLog2 = 48;
std::pair<FloatP, FloatP> sin_cos_floatp(const FloatP& x);

// Every representable value for precision p in increasing order (p <= 6).
std::vector<FloatP> enumerate_all(int p);

}  // namespace talab
