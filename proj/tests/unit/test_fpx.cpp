#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "talab/error.hpp"
#include "talab/floatp.hpp"
#include "talab/fp_audit.hpp"

using namespace talab;
using oracle::round_by_scan;

namespace {

FloatP f(std::int64_t r, std::int64_t k, int p = 3) { return FloatP::make(r, k, p); }

FloatP sample(std::mt19937_64& rng, int p, int kspan) {
    const std::int64_t lo = std::int64_t{1} << (p - 1);
    std::uniform_int_distribution<std::int64_t> sig(lo, 2 * lo - 1);
    std::uniform_int_distribution<int> exp(-kspan, kspan), sign(0, 1);
    const std::int64_t r = sig(rng);
    return FloatP::make(sign(rng) ? -r : r, exp(rng) - (p - 1), p);
}

}  // namespace

TEST_CASE("rounding picks the nearest value, ties to the even significand") {
    CHECK(round_p(ExactRational(0), 3) == f(0, 0));
    CHECK(round_p(ExactRational(3, 10), 3) == f(5, -4));
    CHECK(round_p(ExactRational(9, 32), 3) == f(4, -4));
    CHECK(round_p(ExactRational(3, 10), 3) == round_by_scan(ExactRational(3, 10), 3));
    CHECK(round_p(ExactRational(9, 32), 3) == round_by_scan(ExactRational(9, 32), 3));
}

TEST_CASE("rounding agrees with the scan oracle on random rationals") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> num(-20, 20), den(1, 300);
    for (int p : {2, 3, 4}) {
        for (int i = 0; i < 300; ++i) {
            ExactRational q(num(rng), den(rng));
            CHECK(round_p(q, p) == round_by_scan(q, p));
        }
    }
}

TEST_CASE("rounding is idempotent on representable values") {
    for (int p : {2, 3, 4}) {
        for (const auto& x : enumerate_all(p)) CHECK(round_p(x.value(), p) == x);
    }
}

TEST_CASE("rounding outside the exponent range overflows") {
    CHECK_THROWS_AS(round_p(oracle::pow2(20), 3), Error);
    CHECK_THROWS_AS(FloatP::make(3, 0, 3), Error);
    CHECK_THROWS_AS(FloatP::make(4, 0, 61), Error);
}

TEST_CASE("int_div_special") {
    CHECK(int_div_special(0, 7) == 0);
    CHECK(int_div_special(2, 4) == ExactRational(1, 2));
    CHECK(int_div_special(1, 3) == ExactRational(11, 24));
}

TEST_CASE("add") {
    CHECK(add(f(4, -2), FloatP::zero(3)) == f(4, -2));
    CHECK(add(f(4, -2), f(4, -2)) == f(4, -1));
    CHECK(add(f(5, -4), f(4, -2)) == f(5, -2));
    CHECK(add(f(5, -4), f(4, -2)) == round_by_scan(ExactRational(21, 16), 3));
    CHECK(add(f(4, -2), f(-4, -2)).is_zero());
}

TEST_CASE("mul") {
    CHECK(mul(f(4, -2), FloatP::zero(3)) == f(0, 0));
    CHECK(mul(f(4, -2), f(4, -2)) == f(4, -2));
    CHECK(mul(f(5, -4), f(6, -4)) == round_by_scan(ExactRational(30, 256), 3));
}

TEST_CASE("div") {
    CHECK(div(f(4, -2), f(4, -1)) == f(4, -3));
    const auto quotient = (ExactRational(1, 8) + ExactRational(8, 3)) / 4;
    CHECK(div(f(4, 0), f(6, 0)) == round_by_scan(quotient, 3));
    for (const auto& a : enumerate_all(3)) {
        if (a.is_zero()) continue;
        CHECK(div(a, a).value() == 1);
    }
    CHECK_THROWS_AS(div(f(4, 0), FloatP::zero(3)), Error);
}

TEST_CASE("compare is a total order consistent with value") {
    CHECK(compare(f(4, -2), f(4, -2)) == std::strong_ordering::equal);
    CHECK(compare(f(4, -2), f(5, -2)) == std::strong_ordering::less);
    CHECK(compare(f(-5, 0), f(4, -2)) == std::strong_ordering::less);
    const auto all = enumerate_all(3);
    for (std::size_t i = 0; i < all.size(); i += 7)
        for (std::size_t j = 0; j < all.size(); j += 5) {
            const auto& a = all[i];
            const auto& b = all[j];
            const auto expected = a.value() < b.value()   ? std::strong_ordering::less
                                 : a.value() == b.value() ? std::strong_ordering::equal
                                                          : std::strong_ordering::greater;
            CHECK(compare(a, b) == expected);
            CHECK(less_equal(a, b) == (a.value() <= b.value()));
        }
}

TEST_CASE("floor") {
    CHECK(floor(f(4, -2)).value() == 1);
    CHECK(floor(f(5, -4)).value() == 0);
    CHECK(floor(f(-5, -4)).value() == -1);
}

TEST_CASE("iterated sum and product round once") {
    const std::vector<FloatP> ones{f(4, -2), f(4, -2), f(4, -2)};
    CHECK(iter_add(ones) == f(6, -1));
    const std::vector<FloatP> cancel{f(4, -2), f(-4, -2)};
    CHECK(iter_add(cancel) == f(0, 0));
    const std::vector<FloatP> single{f(5, -4)};
    CHECK(iter_add(single) == f(5, -4));
    CHECK(iter_mul(single) == f(5, -4));
    CHECK(iter_mul(ones).value() == 1);
    const std::vector<FloatP> twos{f(4, -1), f(4, -1), f(4, -1)};
    CHECK(iter_mul(twos) == f(4, 1));

    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        std::vector<FloatP> xs;
        ExactRational exact = 0;
        for (int j = 0; j < 5; ++j) {
            xs.push_back(sample(rng, 4, 3));
            exact += xs.back().value();
        }
        CHECK(iter_add(xs) == round_by_scan(exact, 4));
    }
}

TEST_CASE("add and mul are commutative") {
    std::mt19937_64 rng(3);
    for (int p : {3, 8, 24}) {
        for (int i = 0; i < 500; ++i) {
            auto a = sample(rng, p, 2), b = sample(rng, p, 2);
            CHECK(add(a, b) == add(b, a));
            CHECK(mul(a, b) == mul(b, a));
        }
    }
}

TEST_CASE("exp and sqrt against a 50-digit oracle") {
    using oracle::Big;
    const int p = 16;
    const double bound = std::ldexp(1.0, -p);
    CHECK(exp_approx(FloatP::zero(p)).value() == 1);
    CHECK(oracle::rel_error(oracle::to_big(exp_approx(from_double(1.0, p))), exp(Big(1))) <= bound);
    CHECK(oracle::rel_error(oracle::to_big(exp_approx(from_double(-1.0, p))), exp(Big(-1))) <= bound);
    CHECK(sqrt_approx(FloatP::zero(p)).is_zero());
    CHECK(sqrt_approx(from_double(1.0, p)).value() == 1);
    CHECK(oracle::rel_error(oracle::to_big(sqrt_approx(from_double(2.0, p))), sqrt(Big(2))) <= bound);
    CHECK_THROWS_AS(sqrt_approx(from_double(-1.0, p)), Error);
}

TEST_CASE("sin and cos") {
    using oracle::Big;
    const int p = 16;
    auto [s0, c0] = sin_cos_floatp(FloatP::zero(p));
    CHECK(s0.is_zero());
    CHECK(c0.value() == 1);
    auto [s1, c1] = sin_cos_floatp(from_double(1.0, p));
    CHECK(oracle::rel_error(oracle::to_big(s1), sin(Big(1))) <= std::ldexp(1.0, -p));
    CHECK(oracle::rel_error(oracle::to_big(c1), cos(Big(1))) <= std::ldexp(1.0, -p));
    const FloatP half_pi = from_double(1.5707963267948966, p);
    auto [sh, ch] = sin_cos_floatp(half_pi);
    const Big x = oracle::to_big(half_pi);
    CHECK(oracle::rel_error(oracle::to_big(sh), sin(x)) <= std::ldexp(1.0, -p));
    CHECK(static_cast<double>(abs(oracle::to_big(ch) - cos(x))) <= std::ldexp(1.0, -p));
    CHECK_THROWS_AS(sin_cos_floatp(from_double(std::ldexp(1.0, 50), p)), Error);
}

TEST_CASE("exhaustive audit at p = 2 and p = 3") {
    for (int p : {2, 3}) {
        auto rep = run_fp_audit(p);
        CHECK(rep.passed());
        for (const auto& line : rep.lines) CHECK_MESSAGE(line.mismatches == 0, line.op);
    }
}
