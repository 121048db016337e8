#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "talab/backend.hpp"
#include "talab/matrix.hpp"
#include "talab/rope.hpp"
#include "talab/tensor.hpp"

namespace talab {

inline constexpr double kMaxLogit = 64.0;
inline constexpr std::size_t kMaxRopeSequence = 32;

enum class LayerKind { Plain, Rope };
enum class GKind { Identity, Mlp, LayerNorm, MlpLayerNorm };

const char* to_string(LayerKind k);
const char* to_string(GKind k);
LayerKind parse_layer_kind(const std::string& s);
GKind parse_g_kind(const std::string& s);

template <class S>
struct AttnParams {
    Matrix<S> w_q, w_k1, w_k2, w_v1, w_v2;
};

template <class S>
struct GBlock {
    GKind kind = GKind::Identity;
    Matrix<S> w;  // d x d, used by the MLP kinds
    Matrix<S> b;  // 1 x d
};

template <class S>
struct LayerSpec {
    LayerKind kind = LayerKind::Plain;
    AttnParams<S> attn;
    GBlock<S> g;
};

// g_m o Attn_m o ... o g_1 o Attn_1 o g_0
template <class S>
struct Transformer {
    std::size_t d = 0;
    GBlock<S> g0;
    std::vector<LayerSpec<S>> layers;
    ThetaSchedule theta;
};

template <Backend B>
AttnParams<typename B::Scalar> lift(const B& be, const AttnParams<double>& p) {
    return {lift(be, p.w_q), lift(be, p.w_k1), lift(be, p.w_k2), lift(be, p.w_v1), lift(be, p.w_v2)};
}

template <Backend B>
GBlock<typename B::Scalar> lift(const B& be, const GBlock<double>& g) {
    GBlock<typename B::Scalar> out;
    out.kind = g.kind;
    if (!g.w.empty()) out.w = lift(be, g.w);
    if (!g.b.empty()) out.b = lift(be, g.b);
    return out;
}

template <Backend B>
LayerSpec<typename B::Scalar> lift(const B& be, const LayerSpec<double>& l) {
    return {l.kind, lift(be, l.attn), lift(be, l.g)};
}

template <Backend B>
Transformer<typename B::Scalar> lift(const B& be, const Transformer<double>& tf) {
    Transformer<typename B::Scalar> out;
    out.d = tf.d;
    out.theta = tf.theta;
    out.g0 = lift(be, tf.g0);
    for (const auto& l : tf.layers) out.layers.push_back(lift(be, l));
    return out;
}

namespace detail {

template <class S>
void check_attention_input(const Matrix<S>& x, const AttnParams<S>& p, std::size_t max_n) {
    const std::size_t d = x.cols();
    require(x.rows() >= 1 && d >= 1, ErrorKind::ShapeMismatch, "empty attention input");
    require(x.rows() <= max_n, ErrorKind::ShapeMismatch,
            "sequence length " + std::to_string(x.rows()) + " exceeds " + std::to_string(max_n));
    for (const Matrix<S>* w : {&p.w_q, &p.w_k1, &p.w_k2, &p.w_v1, &p.w_v2})
        require(w->rows() == d && w->cols() == d, ErrorKind::ShapeMismatch,
                "attention weight " + shape_string(*w) + " does not match d=" + std::to_string(d));
}

template <Backend B>
Matrix<typename B::Scalar> divide_by(const B& be, const Matrix<typename B::Scalar>& m, std::size_t d) {
    auto denom = be.from_int(static_cast<std::int64_t>(d));
    return m.map([&](const auto& v) { return be.div(v, denom); });
}

template <Backend B>
Matrix<typename B::Scalar> exp_logits(const B& be, const Matrix<typename B::Scalar>& m) {
    for (const auto& v : m.data()) {
        double x = be.to_double(v);
        if (!(std::fabs(x) <= kMaxLogit))
            fail(ErrorKind::RangeError, "attention logit " + std::to_string(x) + " outside [-64, 64]");
    }
    return m.map([&](const auto& v) { return be.exp(v); });
}

// D as the vector of row sums of A.
template <Backend B>
std::vector<typename B::Scalar> row_sums(const B& be, const Matrix<typename B::Scalar>& a) {
    using S = typename B::Scalar;
    std::vector<S> out;
    out.reserve(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto row = a.row(i);
        out.push_back(be.iter_add(std::span<const S>(row.data())));
        if (be.is_zero(out.back()))
            fail(ErrorKind::DegenerateRow, "attention row " + std::to_string(i) + " sums to zero");
    }
    return out;
}

// diag(D)^-1 M as a matrix product whose inner sum keeps only the diagonal term.
template <Backend B>
Matrix<typename B::Scalar> diag_divide(const B& be, const std::vector<typename B::Scalar>& dvec,
                                       const Matrix<typename B::Scalar>& m) {
    using S = typename B::Scalar;
    Matrix<S> out(m.rows(), m.cols(), S{});
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            S term = be.div(m(i, j), dvec[i]);
            out(i, j) = be.iter_add(std::span<const S>(&term, 1));
        }
    return out;
}

template <Backend B>
struct PlainPass {
    using S = typename B::Scalar;
    Matrix<S> a;  // n x n^2
    Matrix<S> v;  // n^2 x d, only when values were requested
};

template <Backend B>
PlainPass<B> plain_pass(const B& be, const Matrix<typename B::Scalar>& x,
                        const AttnParams<typename B::Scalar>& p, bool with_values) {
    check_attention_input(x, p, kMaxSequence);
    PlainPass<B> out;
    auto q = matmul(be, x, p.w_q);
    auto k1 = matmul(be, x, p.w_k1);
    auto k2 = matmul(be, x, p.w_k2);
    Matrix<typename B::Scalar> v1, v2;
    if (with_values) {
        v1 = matmul(be, x, p.w_v1);
        v2 = matmul(be, x, p.w_v2);
    }
    be.barrier();
    auto k = col_kron(be, k1, k2);
    if (with_values) out.v = col_kron(be, v1, v2);
    be.barrier();
    auto logits = matmul(be, q, k.transposed());
    be.barrier();
    logits = divide_by(be, logits, x.cols());
    be.barrier();
    out.a = exp_logits(be, logits);
    be.barrier();
    return out;
}

inline std::vector<std::int64_t> default_positions(std::size_t n) {
    std::vector<std::int64_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::int64_t{0});
    return pos;
}

}  // namespace detail

// A = exp(Q (K1 col_kron K2)^T / d), n x n^2.
template <Backend B>
Matrix<typename B::Scalar> attn_matrix_plain(const B& be, const Matrix<typename B::Scalar>& x,
                                             const AttnParams<typename B::Scalar>& p) {
    return detail::plain_pass(be, x, p, false).a;
}

// Entry (j1, j2 + j3*n) = exp(Q[j1,:] (R_{j1-j2} row_kron R_{j1-j3}) (K1 kron K2)[j2 + j3*n,:]^T / d).
// `positions` gives each row's position (0..n-1 when empty); only differences matter.
template <Backend B>
Matrix<typename B::Scalar> attn_matrix_rope(const B& be, const Matrix<typename B::Scalar>& x,
                                            const AttnParams<typename B::Scalar>& p, const ThetaSchedule& sched,
                                            std::vector<std::int64_t> positions = {}) {
    using S = typename B::Scalar;
    detail::check_attention_input(x, p, kMaxRopeSequence);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    require(d % 2 == 0, ErrorKind::BadDimension, "rotary attention needs even d, got " + std::to_string(d));
    require(sched.d == d, ErrorKind::ShapeMismatch, "theta schedule built for a different d");
    if (positions.empty()) positions = detail::default_positions(n);
    require(positions.size() == n, ErrorKind::ShapeMismatch, "one position per row required");

    auto q = matmul(be, x, p.w_q);
    be.barrier();
    auto k1 = matmul(be, x, p.w_k1);
    auto k2 = matmul(be, x, p.w_k2);
    be.barrier();

    std::map<std::int64_t, Matrix<S>> rot;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            std::int64_t off = positions[a] - positions[b];
            if (!rot.count(off)) rot.emplace(off, rel_rotation(be, off, sched));
        }
    be.barrier();

    // R for every (j1, j2, j3), flattened as j1 + n*(j2 + n*j3).
    std::vector<Matrix<S>> r(n * n * n);
    for (std::size_t j3 = 0; j3 < n; ++j3)
        for (std::size_t j2 = 0; j2 < n; ++j2)
            for (std::size_t j1 = 0; j1 < n; ++j1)
                r[j1 + n * (j2 + n * j3)] = row_kron(be, rot.at(positions[j1] - positions[j2]),
                                                     rot.at(positions[j1] - positions[j3]));
    be.barrier();
    auto k = kron(be, k1, k2);  // n^2 x d^2
    be.barrier();

    std::vector<Matrix<S>> qr(n * n * n);
    for (std::size_t t = 0; t < qr.size(); ++t) qr[t] = matmul(be, q.row(t % n), r[t]);
    be.barrier();

    Matrix<S> logits(n, n * n, S{});
    for (std::size_t j3 = 0; j3 < n; ++j3)
        for (std::size_t j2 = 0; j2 < n; ++j2)
            for (std::size_t j1 = 0; j1 < n; ++j1) {
                const std::size_t col = j2 + n * j3;
                auto s = matmul(be, qr[j1 + n * col], k.row(col).transposed());
                logits(j1, col) = s(0, 0);
            }
    be.barrier();
    logits = detail::divide_by(be, logits, d);
    be.barrier();
    auto a = detail::exp_logits(be, logits);
    be.barrier();
    return a;
}

// Row-normalized attention D^-1 A.
template <Backend B>
Matrix<typename B::Scalar> attention_weights(const B& be, const Matrix<typename B::Scalar>& x,
                                             const LayerSpec<typename B::Scalar>& spec, const ThetaSchedule& sched) {
    auto a = spec.kind == LayerKind::Plain ? attn_matrix_plain(be, x, spec.attn)
                                           : attn_matrix_rope(be, x, spec.attn, sched);
    auto dvec = detail::row_sums(be, a);
    be.barrier();
    return detail::diag_divide(be, dvec, a);
}

// D^-1 A V with V = V1 col_kron V2.
template <Backend B>
Matrix<typename B::Scalar> attn_layer(const B& be, const Matrix<typename B::Scalar>& x,
                                      const LayerSpec<typename B::Scalar>& spec, const ThetaSchedule& sched) {
    if (spec.kind == LayerKind::Plain) {
        auto pass = detail::plain_pass(be, x, spec.attn, true);
        auto dvec = detail::row_sums(be, pass.a);
        be.barrier();
        auto weights = detail::diag_divide(be, dvec, pass.a);
        be.barrier();
        auto out = matmul(be, weights, pass.v);
        be.barrier();
        return out;
    }
    auto a = attn_matrix_rope(be, x, spec.attn, sched);
    auto dvec = detail::row_sums(be, a);
    be.barrier();
    auto v = fused_project(be, x, x, spec.attn.w_v1, spec.attn.w_v2);
    be.barrier();
    auto av = matmul(be, a, v);
    be.barrier();
    auto out = detail::diag_divide(be, dvec, av);
    be.barrier();
    return out;
}

// Per row: (x - mean) / sqrt(var + eps).
template <Backend B>
Matrix<typename B::Scalar> layer_norm(const B& be, const Matrix<typename B::Scalar>& x) {
    using S = typename B::Scalar;
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    require(d >= 2, ErrorKind::BadDimension, "layer norm needs d >= 2");
    auto scaled = detail::divide_by(be, x, d);
    be.barrier();
    std::vector<S> mean;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = scaled.row(i);
        mean.push_back(be.iter_add(std::span<const S>(row.data())));
    }
    be.barrier();
    Matrix<S> diff(n, d, S{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) diff(i, j) = be.sub(x(i, j), mean[i]);
    be.barrier();
    auto sq = diff.map([&](const S& v) { return be.mul(v, v); });
    be.barrier();
    std::vector<S> var;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = sq.row(i);
        var.push_back(be.iter_add(std::span<const S>(row.data())));
    }
    be.barrier();
    auto dd = be.from_int(static_cast<std::int64_t>(d));
    for (auto& v : var) v = be.div(v, dd);
    be.barrier();
    auto eps = be.layer_norm_epsilon();
    for (auto& v : var) v = be.add(v, eps);
    be.barrier();
    std::vector<S> sigma;
    for (const auto& v : var) sigma.push_back(be.sqrt(v));
    be.barrier();
    Matrix<S> out(n, d, S{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out(i, j) = be.div(diff(i, j), sigma[i]);
    be.barrier();
    return out;
}

// Row i becomes W x_i + b.
template <Backend B>
Matrix<typename B::Scalar> mlp(const B& be, const Matrix<typename B::Scalar>& x, const Matrix<typename B::Scalar>& w,
                               const Matrix<typename B::Scalar>& b) {
    using S = typename B::Scalar;
    require(w.rows() == x.cols() && w.cols() == x.cols(), ErrorKind::ShapeMismatch,
            "mlp weight " + shape_string(w) + " for d=" + std::to_string(x.cols()));
    require(b.rows() == 1 && b.cols() == x.cols(), ErrorKind::ShapeMismatch, "mlp bias shape " + shape_string(b));
    auto y = matmul(be, x, w.transposed());
    be.barrier();
    Matrix<S> out(y.rows(), y.cols(), S{});
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) = be.add(y(i, j), b(0, j));
    be.barrier();
    return out;
}

template <Backend B>
Matrix<typename B::Scalar> apply_g(const B& be, const Matrix<typename B::Scalar>& x,
                                   const GBlock<typename B::Scalar>& g) {
    return be.block(x, [&](const Matrix<typename B::Scalar>& in) {
        switch (g.kind) {
            case GKind::Identity: return in;
            case GKind::Mlp: return mlp(be, in, g.w, g.b);
            case GKind::LayerNorm: return layer_norm(be, in);
            case GKind::MlpLayerNorm: return layer_norm(be, mlp(be, in, g.w, g.b));
        }
        return in;
    });
}

template <Backend B>
Matrix<typename B::Scalar> tf_forward(const B& be, const Matrix<typename B::Scalar>& x,
                                      const Transformer<typename B::Scalar>& tf) {
    require(x.cols() == tf.d, ErrorKind::ShapeMismatch,
            "input width " + std::to_string(x.cols()) + " for a d=" + std::to_string(tf.d) + " model");
    auto h = apply_g(be, x, tf.g0);
    be.barrier();
    for (const auto& layer : tf.layers) {
        h = attn_layer(be, h, layer, tf.theta);
        be.barrier();
        h = apply_g(be, h, layer.g);
        be.barrier();
    }
    return h;
}

}  // namespace talab
