#pragma once

#include <initializer_list>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "talab/backend.hpp"
#include "talab/depth.hpp"

namespace talab {

template <class T>
struct Traced {
    T value{};
    DepthExpr depth{};

    friend bool operator==(const Traced&, const Traced&) = default;
};

template <class T>
struct is_traced : std::false_type {};
template <class T>
struct is_traced<Traced<T>> : std::true_type {};

// Depth bookkeeping for one traced evaluation; not shared across threads.
//
// In staged mode an operation starts no earlier than the deepest value
// produced before the last barrier, so a computation is accounted as a
// sequence of layers in the order it was written. In dataflow mode barriers
// are ignored and depth is the critical path through operand dependencies.
class TraceContext {
public:
    explicit TraceContext(bool staged = true) : staged_(staged) {}

    bool staged() const { return staged_; }

    // Depth of a result of primitive `op` applied to operands of the given depths.
    DepthExpr apply(DepthSymbol op, std::initializer_list<const DepthExpr*> inputs) {
        DepthExpr d = floor_;
        for (const DepthExpr* in : inputs) d = par(d, *in);
        return record(seq(d, DepthExpr::unit(op)));
    }

    template <class T>
    DepthExpr apply_all(DepthSymbol op, std::span<const Traced<T>> inputs) {
        DepthExpr d = floor_;
        for (const auto& in : inputs) d = par(d, in.depth);
        return record(seq(d, DepthExpr::unit(op)));
    }

    // A free operation such as negation.
    DepthExpr pass(const DepthExpr& input) { return record(par(floor_, input)); }

    void barrier() {
        if (staged_) floor_ = par(floor_, stage_max_);
    }

    struct BlockMark {
        DepthExpr floor;
        DepthExpr stage_max;
        DepthExpr input;
    };

    bool opaque_blocks() const { return opaque_blocks_; }
    void set_opaque_blocks(bool on) { opaque_blocks_ = on; }

    BlockMark begin_block(const DepthExpr& input_depth) { return {floor_, stage_max_, input_depth}; }

    // Discards the depths recorded inside the block and charges a single d_g.
    DepthExpr end_block(const BlockMark& mark) {
        floor_ = mark.floor;
        stage_max_ = mark.stage_max;
        return record(seq(par(floor_, mark.input), DepthExpr::unit(DepthSymbol::G)));
    }

    const DepthExpr& deepest() const { return stage_max_; }
    std::size_t operations() const { return operations_; }

private:
    DepthExpr record(DepthExpr d) {
        stage_max_ = par(stage_max_, d);
        ++operations_;
        return d;
    }

    bool staged_;
    bool opaque_blocks_ = false;
    DepthExpr floor_{};
    DepthExpr stage_max_{};
    std::size_t operations_ = 0;
};

template <Backend Inner>
class TracedBackend {
public:
    using Value = typename Inner::Scalar;
    using Scalar = Traced<Value>;

    TracedBackend(Inner inner, TraceContext& ctx) : inner_(std::move(inner)), ctx_(&ctx) {}

    const Inner& inner() const { return inner_; }
    TraceContext& context() const { return *ctx_; }

    static Scalar leaf(Value v) { return Scalar{std::move(v), DepthExpr{}}; }

    Scalar constant(double v) const { return leaf(inner_.constant(v)); }
    Scalar from_int(std::int64_t v) const { return leaf(inner_.from_int(v)); }
    Scalar add(const Scalar& a, const Scalar& b) const {
        return {inner_.add(a.value, b.value), ctx_->apply(DepthSymbol::Std, {&a.depth, &b.depth})};
    }
    Scalar sub(const Scalar& a, const Scalar& b) const {
        return {inner_.sub(a.value, b.value), ctx_->apply(DepthSymbol::Std, {&a.depth, &b.depth})};
    }
    Scalar mul(const Scalar& a, const Scalar& b) const {
        return {inner_.mul(a.value, b.value), ctx_->apply(DepthSymbol::Std, {&a.depth, &b.depth})};
    }
    Scalar div(const Scalar& a, const Scalar& b) const {
        return {inner_.div(a.value, b.value), ctx_->apply(DepthSymbol::Std, {&a.depth, &b.depth})};
    }
    Scalar neg(const Scalar& a) const { return {inner_.neg(a.value), ctx_->pass(a.depth)}; }
    Scalar iter_add(std::span<const Scalar> xs) const {
        return {inner_.iter_add(values(xs)), ctx_->apply_all(DepthSymbol::Oplus, xs)};
    }
    Scalar iter_mul(std::span<const Scalar> xs) const {
        return {inner_.iter_mul(values(xs)), ctx_->apply_all(DepthSymbol::Otimes, xs)};
    }
    Scalar exp(const Scalar& a) const {
        return {inner_.exp(a.value), ctx_->apply(DepthSymbol::Exp, {&a.depth})};
    }
    Scalar sqrt(const Scalar& a) const {
        return {inner_.sqrt(a.value), ctx_->apply(DepthSymbol::Sqrt, {&a.depth})};
    }
    std::pair<Scalar, Scalar> sin_cos(const Scalar& a) const {
        auto [s, c] = inner_.sin_cos(a.value);
        DepthExpr d = ctx_->apply(DepthSymbol::Tri, {&a.depth});
        return {Scalar{std::move(s), d}, Scalar{std::move(c), d}};
    }
    double to_double(const Scalar& a) const { return inner_.to_double(a.value); }
    bool is_zero(const Scalar& a) const { return inner_.is_zero(a.value); }
    Scalar layer_norm_epsilon() const { return leaf(inner_.layer_norm_epsilon()); }
    void barrier() const { ctx_->barrier(); }

    // With opaque blocks enabled the body is evaluated for its values only
    // and its outputs are charged one d_g beyond the block input.
    template <class F>
    Matrix<Scalar> block(const Matrix<Scalar>& x, F&& body) const {
        if (!ctx_->opaque_blocks()) return body(x);
        DepthExpr in;
        for (const auto& s : x.data()) in = par(in, s.depth);
        auto mark = ctx_->begin_block(in);
        Matrix<Scalar> out = body(x);
        DepthExpr d = ctx_->end_block(mark);
        for (auto& s : out.data()) s.depth = d;
        return out;
    }

private:
    static std::vector<Value> values(std::span<const Scalar> xs) {
        std::vector<Value> out;
        out.reserve(xs.size());
        for (const auto& x : xs) out.push_back(x.value);
        return out;
    }

    Inner inner_;
    TraceContext* ctx_;
};

// Wraps every entry as an input leaf of depth zero.
template <class T>
Matrix<Traced<T>> trace_inputs(const Matrix<T>& m) {
    return m.map([](const T& v) { return Traced<T>{v, DepthExpr{}}; });
}

template <class T>
Matrix<T> untrace(const Matrix<Traced<T>>& m) {
    return m.map([](const Traced<T>& v) { return v.value; });
}

// Maximum depth over all entries; TraceUnavailable for untraced matrices.
template <class S>
DepthExpr max_depth(const Matrix<S>& m) {
    if constexpr (is_traced<S>::value) {
        DepthExpr d;
        for (const auto& s : m.data()) d = par(d, s.depth);
        return d;
    } else {
        fail(ErrorKind::TraceUnavailable, "matrix was evaluated without tracing");
    }
}

}  // namespace talab
