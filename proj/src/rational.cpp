#include "talab/rational.hpp"

#include <cmath>

#include "talab/error.hpp"

namespace talab {

using boost::multiprecision::denominator;
using boost::multiprecision::numerator;

std::int64_t bit_length(const BigInt& v) {
    if (v == 0) return 0;
    return static_cast<std::int64_t>(boost::multiprecision::msb(boost::multiprecision::abs(v))) + 1;
}

ExactRational rational_from_double(double v) {
    require(std::isfinite(v), ErrorKind::DomainError, "non-finite double has no exact value");
    if (v == 0.0) return ExactRational(0);
    int exp = 0;
    double frac = std::frexp(v, &exp);
    // frac * 2^53 is an integer for every finite double.
    auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
    return ldexp(ExactRational(mant), static_cast<std::int64_t>(exp) - 53);
}

ExactRational ratio(const BigInt& num, const BigInt& den) {
    require(den != 0, ErrorKind::DivisionByZero, "zero denominator");
    if (den < 0) return ExactRational(BigInt(-num), BigInt(-den));
    return ExactRational(num, den);
}

ExactRational make_rational(std::int64_t num, std::int64_t den) { return ratio(BigInt(num), BigInt(den)); }

ExactRational parse_rational(const std::string& text) {
    auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return ExactRational(BigInt(text));
        BigInt num(text.substr(0, slash));
        BigInt den(text.substr(slash + 1));
        require(den != 0, ErrorKind::DivisionByZero, "zero denominator in '" + text + "'");
        return ratio(num, den);
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const Error*>(&e)) throw;
        fail(ErrorKind::DataFormatError, "cannot parse rational '" + text + "'");
    }
}

std::string to_string(const ExactRational& q) {
    BigInt num = numerator(q);
    BigInt den = denominator(q);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

double to_double(const ExactRational& q) { return q.convert_to<double>(); }

std::int64_t floor_log2(const ExactRational& q) {
    BigInt num = boost::multiprecision::abs(numerator(q));
    BigInt den = denominator(q);
    std::int64_t l = bit_length(num) - bit_length(den);
    // 2^l <= num/den < 2^(l+1) or 2^(l-1) <= num/den < 2^l
    bool below = l >= 0 ? num < (den << static_cast<unsigned>(l))
                        : (num << static_cast<unsigned>(-l)) < den;
    return below ? l - 1 : l;
}

ExactRational ldexp(const ExactRational& q, std::int64_t e) {
    if (e >= 0) return q * ExactRational(BigInt(1) << static_cast<unsigned>(e));
    return q / ExactRational(BigInt(1) << static_cast<unsigned>(-e));
}

}  // namespace talab
