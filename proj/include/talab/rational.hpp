#pragma once

#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace talab {

using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                             boost::multiprecision::et_off>;
using ExactRational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                                    boost::multiprecision::et_off>;

// Exact value of a finite double.
ExactRational rational_from_double(double v);

ExactRational make_rational(std::int64_t num, std::int64_t den = 1);

// num/den for any nonzero den; the two-argument constructor rejects negative denominators.
ExactRational ratio(const BigInt& num, const BigInt& den);

// Parses "a", "-a", or "a/b".
ExactRational parse_rational(const std::string& text);

std::string to_string(const ExactRational& q);

double to_double(const ExactRational& q);

// floor(log2 |q|) for q != 0.
std::int64_t floor_log2(const ExactRational& q);

// q * 2^e.
ExactRational ldexp(const ExactRational& q, std::int64_t e);

// Number of bits in |v|; zero for v == 0.
std::int64_t bit_length(const BigInt& v);

}  // namespace talab
