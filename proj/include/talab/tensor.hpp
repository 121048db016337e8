#pragma once

#include <vector>

#include "talab/backend.hpp"
#include "talab/matrix.hpp"

// Matrix product and the three Kronecker-style products. Index formulas are
// written 0-based: the 1-based i1 + (i2-1)n1 becomes i1 + i2*n1.

namespace talab {

namespace detail {

inline void check_kron_size(std::size_t rows, std::size_t cols) {
    require(rows <= kMaxSequence * kMaxSequence && cols <= kMaxSequence * kMaxSequence,
            ErrorKind::ShapeMismatch, "Kronecker result " + shape_string(rows, cols) + " exceeds desk limits");
}

}  // namespace detail

// Entry (i,j) is one iterated sum over k of A[i,k] * B[k,j].
template <Backend B>
Matrix<typename B::Scalar> matmul(const B& be, const Matrix<typename B::Scalar>& a,
                                  const Matrix<typename B::Scalar>& b) {
    using S = typename B::Scalar;
    require(a.cols() == b.rows(), ErrorKind::ShapeMismatch,
            "matmul " + shape_string(a) + " by " + shape_string(b));
    std::vector<S> out;
    out.reserve(a.rows() * b.cols());
    std::vector<S> terms;
    terms.reserve(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            terms.clear();
            for (std::size_t k = 0; k < a.cols(); ++k) terms.push_back(be.mul(a(i, k), b(k, j)));
            out.push_back(be.iter_add(std::span<const S>(terms)));
        }
    return Matrix<S>(a.rows(), b.cols(), std::move(out));
}

// K[i1 + i2*n1, j1 + j2*d1] = A[i1,j1] * B[i2,j2]
template <Backend B>
Matrix<typename B::Scalar> kron(const B& be, const Matrix<typename B::Scalar>& a,
                                const Matrix<typename B::Scalar>& b) {
    using S = typename B::Scalar;
    const std::size_t n1 = a.rows(), d1 = a.cols(), n2 = b.rows(), d2 = b.cols();
    detail::check_kron_size(n1 * n2, d1 * d2);
    Matrix<S> out(n1 * n2, d1 * d2, S{});
    for (std::size_t i2 = 0; i2 < n2; ++i2)
        for (std::size_t i1 = 0; i1 < n1; ++i1)
            for (std::size_t j2 = 0; j2 < d2; ++j2)
                for (std::size_t j1 = 0; j1 < d1; ++j1)
                    out(i1 + i2 * n1, j1 + j2 * d1) = be.mul(a(i1, j1), b(i2, j2));
    return out;
}

// K[i1 + i2*n1, j] = A[i1,j] * B[i2,j]
template <Backend B>
Matrix<typename B::Scalar> col_kron(const B& be, const Matrix<typename B::Scalar>& a,
                                    const Matrix<typename B::Scalar>& b) {
    using S = typename B::Scalar;
    require(a.cols() == b.cols(), ErrorKind::ShapeMismatch,
            "col_kron " + shape_string(a) + " with " + shape_string(b));
    const std::size_t n1 = a.rows(), n2 = b.rows(), d = a.cols();
    detail::check_kron_size(n1 * n2, d);
    Matrix<S> out(n1 * n2, d, S{});
    for (std::size_t i2 = 0; i2 < n2; ++i2)
        for (std::size_t i1 = 0; i1 < n1; ++i1)
            for (std::size_t j = 0; j < d; ++j) out(i1 + i2 * n1, j) = be.mul(a(i1, j), b(i2, j));
    return out;
}

// K[i, j1 + j2*d1] = A[i,j1] * B[i,j2]
template <Backend B>
Matrix<typename B::Scalar> row_kron(const B& be, const Matrix<typename B::Scalar>& a,
                                    const Matrix<typename B::Scalar>& b) {
    using S = typename B::Scalar;
    require(a.rows() == b.rows(), ErrorKind::ShapeMismatch,
            "row_kron " + shape_string(a) + " with " + shape_string(b));
    const std::size_t n = a.rows(), d1 = a.cols(), d2 = b.cols();
    detail::check_kron_size(n, d1 * d2);
    Matrix<S> out(n, d1 * d2, S{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j2 = 0; j2 < d2; ++j2)
            for (std::size_t j1 = 0; j1 < d1; ++j1) out(i, j1 + j2 * d1) = be.mul(a(i, j1), b(i, j2));
    return out;
}

// (A1 W1) col_kron (A2 W2), the cheap side of the swap rule
// (A1 kron A2)(W1 col_kron W2) = (A1 W1) col_kron (A2 W2).
template <Backend B>
Matrix<typename B::Scalar> fused_project(const B& be, const Matrix<typename B::Scalar>& a1,
                                         const Matrix<typename B::Scalar>& a2,
                                         const Matrix<typename B::Scalar>& w1,
                                         const Matrix<typename B::Scalar>& w2) {
    require(a1.cols() == w1.rows() && a2.cols() == w2.rows() && w1.cols() == w2.cols(),
            ErrorKind::ShapeMismatch, "fused_project operand shapes");
    auto p1 = matmul(be, a1, w1);
    auto p2 = matmul(be, a2, w2);
    be.barrier();
    return col_kron(be, p1, p2);
}

// The unfused side of the swap rule.
template <Backend B>
Matrix<typename B::Scalar> unfused_project(const B& be, const Matrix<typename B::Scalar>& a1,
                                           const Matrix<typename B::Scalar>& a2,
                                           const Matrix<typename B::Scalar>& w1,
                                           const Matrix<typename B::Scalar>& w2) {
    auto left = kron(be, a1, a2);
    auto right = col_kron(be, w1, w2);
    be.barrier();
    return matmul(be, left, right);
}

template <Backend B>
Matrix<typename B::Scalar> identity(const B& be, std::size_t n) {
    Matrix<typename B::Scalar> out(n, n, be.from_int(0));
    for (std::size_t i = 0; i < n; ++i) out(i, i) = be.from_int(1);
    return out;
}

template <Backend B>
Matrix<typename B::Scalar> zeros(const B& be, std::size_t rows, std::size_t cols) {
    return Matrix<typename B::Scalar>(rows, cols, be.from_int(0));
}

}  // namespace talab
