#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "talab/error.hpp"
#include "talab/floatp.hpp"
#include "talab/matrix.hpp"
#include "talab/rational.hpp"

namespace talab {

// Scalar arithmetic used by every matrix and attention routine. barrier()
// marks the end of a computation stage and block() wraps a non-attention
// block; both only matter to the tracing backend.
template <class B>
concept Backend = requires(const B& b, const typename B::Scalar& x, std::span<const typename B::Scalar> xs,
                           const Matrix<typename B::Scalar>& m) {
    { b.constant(0.0) } -> std::same_as<typename B::Scalar>;
    { b.from_int(std::int64_t{0}) } -> std::same_as<typename B::Scalar>;
    { b.add(x, x) } -> std::same_as<typename B::Scalar>;
    { b.sub(x, x) } -> std::same_as<typename B::Scalar>;
    { b.mul(x, x) } -> std::same_as<typename B::Scalar>;
    { b.div(x, x) } -> std::same_as<typename B::Scalar>;
    { b.neg(x) } -> std::same_as<typename B::Scalar>;
    { b.iter_add(xs) } -> std::same_as<typename B::Scalar>;
    { b.iter_mul(xs) } -> std::same_as<typename B::Scalar>;
    { b.exp(x) } -> std::same_as<typename B::Scalar>;
    { b.sqrt(x) } -> std::same_as<typename B::Scalar>;
    { b.sin_cos(x) } -> std::same_as<std::pair<typename B::Scalar, typename B::Scalar>>;
    { b.to_double(x) } -> std::convertible_to<double>;
    { b.is_zero(x) } -> std::convertible_to<bool>;
    { b.layer_norm_epsilon() } -> std::same_as<typename B::Scalar>;
    b.barrier();
};

// Native doubles; sums fold left to right.
struct RealBackend {
    using Scalar = double;

    double constant(double v) const { return v; }
    double from_int(std::int64_t v) const { return static_cast<double>(v); }
    double add(double a, double b) const { return a + b; }
    double sub(double a, double b) const { return a - b; }
    double mul(double a, double b) const { return a * b; }
    double div(double a, double b) const {
        if (b == 0.0) fail(ErrorKind::DivisionByZero, "division by zero");
        return a / b;
    }
    double neg(double a) const { return -a; }
    double iter_add(std::span<const double> xs) const {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    double iter_mul(std::span<const double> xs) const {
        double s = 1.0;
        for (double x : xs) s *= x;
        return s;
    }
    double exp(double a) const { return std::exp(a); }
    double sqrt(double a) const {
        if (a < 0.0) fail(ErrorKind::DomainError, "sqrt of a negative value");
        return std::sqrt(a);
    }
    std::pair<double, double> sin_cos(double a) const { return {std::sin(a), std::cos(a)}; }
    double to_double(double a) const { return a; }
    bool is_zero(double a) const { return a == 0.0; }
    double layer_norm_epsilon() const { return 1e-5; }
    void barrier() const {}
    template <class F>
    Matrix<double> block(const Matrix<double>& x, F&& body) const {
        return body(x);
    }
};

// Exact rationals. Transcendentals go through a 60-bit float and return the
// exact value of that float.
struct RationalBackend {
    using Scalar = ExactRational;
    static constexpr int kTranscendentalPrecision = 60;

    ExactRational constant(double v) const { return rational_from_double(v); }
    ExactRational from_int(std::int64_t v) const { return ExactRational(v); }
    ExactRational add(const ExactRational& a, const ExactRational& b) const { return a + b; }
    ExactRational sub(const ExactRational& a, const ExactRational& b) const { return a - b; }
    ExactRational mul(const ExactRational& a, const ExactRational& b) const { return a * b; }
    ExactRational div(const ExactRational& a, const ExactRational& b) const {
        if (b == 0) fail(ErrorKind::DivisionByZero, "division by zero");
        return a / b;
    }
    ExactRational neg(const ExactRational& a) const { return -a; }
    ExactRational iter_add(std::span<const ExactRational> xs) const {
        ExactRational s = 0;
        for (const auto& x : xs) s += x;
        return s;
    }
    ExactRational iter_mul(std::span<const ExactRational> xs) const {
        ExactRational s = 1;
        for (const auto& x : xs) s *= x;
        return s;
    }
    ExactRational exp(const ExactRational& a) const {
        return exp_approx(round_p(a, kTranscendentalPrecision)).value();
    }
    ExactRational sqrt(const ExactRational& a) const {
        return sqrt_approx(round_p(a, kTranscendentalPrecision)).value();
    }
    std::pair<ExactRational, ExactRational> sin_cos(const ExactRational& a) const {
        auto [s, c] = sin_cos_floatp(round_p(a, kTranscendentalPrecision));
        return {s.value(), c.value()};
    }
    double to_double(const ExactRational& a) const { return talab::to_double(a); }
    bool is_zero(const ExactRational& a) const { return a == 0; }
    ExactRational layer_norm_epsilon() const { return ExactRational(1, 100000); }
    void barrier() const {}
    template <class F>
    Matrix<ExactRational> block(const Matrix<ExactRational>& x, F&& body) const {
        return body(x);
    }
};

// p-bit floats with the exact-then-round-once semantics.
struct FloatBackend {
    using Scalar = FloatP;

    int p = 24;
    ExpDomain domain{};

    explicit FloatBackend(int precision, ExpDomain d = {}) : p(precision), domain(d) { check_precision(p); }

    FloatP constant(double v) const { return from_double(v, p); }
    FloatP from_int(std::int64_t v) const { return round_dyadic(BigInt(v), 0, p); }
    FloatP add(const FloatP& a, const FloatP& b) const { return talab::add(a, b); }
    FloatP sub(const FloatP& a, const FloatP& b) const { return talab::sub(a, b); }
    FloatP mul(const FloatP& a, const FloatP& b) const { return talab::mul(a, b); }
    FloatP div(const FloatP& a, const FloatP& b) const { return talab::div(a, b); }
    FloatP neg(const FloatP& a) const { return talab::neg(a); }
    FloatP iter_add(std::span<const FloatP> xs) const { return talab::iter_add(xs); }
    FloatP iter_mul(std::span<const FloatP> xs) const { return talab::iter_mul(xs); }
    FloatP exp(const FloatP& a) const { return exp_approx(a, domain); }
    FloatP sqrt(const FloatP& a) const { return sqrt_approx(a); }
    std::pair<FloatP, FloatP> sin_cos(const FloatP& a) const { return sin_cos_floatp(a); }
    double to_double(const FloatP& a) const { return a.to_double(); }
    bool is_zero(const FloatP& a) const { return a.is_zero(); }
    // 2^-ceil(p/2)
    FloatP layer_norm_epsilon() const {
        return FloatP::make(std::int64_t{1} << (p - 1), -((p + 1) / 2) - (p - 1), p);
    }
    void barrier() const {}
    template <class F>
    Matrix<FloatP> block(const Matrix<FloatP>& x, F&& body) const {
        return body(x);
    }
};

template <Backend B>
Matrix<typename B::Scalar> lift(const B& be, const Matrix<double>& m) {
    return m.map([&](double v) { return be.constant(v); });
}

}  // namespace talab
