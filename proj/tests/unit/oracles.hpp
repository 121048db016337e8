#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond the value types.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "talab/floatp.hpp"
#include "talab/matrix.hpp"

namespace oracle {

using talab::ExactRational;
using talab::FloatP;
using Big = boost::multiprecision::cpp_bin_float_50;

inline ExactRational pow2(std::int64_t e) {
    ExactRational q = 1;
    for (; e > 0; --e) q *= 2;
    for (; e < 0; ++e) q /= 2;
    return q;
}

inline ExactRational value_of(std::int64_t r, std::int64_t k) { return ExactRational(r) * pow2(k); }

// Every representable value for small p, built straight from the definition.
inline std::vector<std::pair<ExactRational, FloatP>> representable(int p) {
    std::vector<std::pair<ExactRational, FloatP>> out;
    const std::int64_t lo = std::int64_t{1} << (p - 1), hi = std::int64_t{1} << p;
    out.emplace_back(ExactRational(0), FloatP::make(0, 0, p));
    for (std::int64_t k = -hi; k < hi; ++k)
        for (std::int64_t r = lo; r < hi; ++r) {
            out.emplace_back(value_of(r, k), FloatP::make(r, k, p));
            out.emplace_back(value_of(-r, k), FloatP::make(-r, k, p));
        }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

// Nearest representable value by linear scan; ties go to the even significand.
inline FloatP round_by_scan(const ExactRational& q, int p) {
    static thread_local int cached_p = -1;
    static thread_local std::vector<std::pair<ExactRational, FloatP>> table;
    if (cached_p != p) {
        table = representable(p);
        cached_p = p;
    }
    const auto* best = &table.front();
    ExactRational best_gap = abs(q - best->first);
    for (const auto& e : table) {
        ExactRational gap = abs(q - e.first);
        if (gap < best_gap || (gap == best_gap && e.second.significand() % 2 == 0 && best->second.significand() % 2 != 0)) {
            best = &e;
            best_gap = gap;
        }
    }
    return best->second;
}

inline Big to_big(const FloatP& x) {
    return ldexp(Big(x.significand()), static_cast<int>(x.exponent()));
}

inline double rel_error(const Big& approx, const Big& truth) {
    return static_cast<double>(abs(approx - truth) / abs(truth));
}

inline talab::Matrix<ExactRational> random_rational(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_int_distribution<int> num(-9, 9), den(1, 9);
    talab::Matrix<ExactRational> m(rows, cols, ExactRational(0));
    for (auto& v : m.data()) v = ExactRational(num(rng), den(rng));
    return m;
}

// Entries in [-2/3, 2/3], small enough to keep attention logits in range.
inline talab::Matrix<ExactRational> small_rational(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_int_distribution<int> num(-2, 2), den(3, 6);
    talab::Matrix<ExactRational> m(rows, cols, ExactRational(0));
    for (auto& v : m.data()) v = ExactRational(num(rng), den(rng));
    return m;
}

inline talab::Matrix<double> random_real(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    talab::Matrix<double> m(rows, cols, 0.0);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

}  // namespace oracle
