#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace talab {

enum class DepthSymbol : std::uint8_t { Std, Oplus, Otimes, Exp, Sqrt, Tri, G };

inline constexpr std::size_t kDepthSymbolCount = 7;

using DepthVector = std::array<std::uint32_t, kDepthSymbolCount>;

const char* symbol_name(DepthSymbol s, bool ascii = false);

// Circuit depth as a maximum over linear forms in the primitive depth
// symbols. The stored set is an antichain under coefficient-wise order, so a
// single element means the expression is linear and more than one element is
// a residual max node.
class DepthExpr {
public:
    DepthExpr();  // zero

    static DepthExpr zero() { return DepthExpr(); }
    static DepthExpr unit(DepthSymbol s, std::uint32_t count = 1);
    static DepthExpr linear(const DepthVector& v);
    // Sum of coefficient * symbol terms.
    static DepthExpr of(std::initializer_list<std::pair<std::uint32_t, DepthSymbol>> terms);

    const std::vector<DepthVector>& terms() const { return terms_; }
    bool is_linear() const { return terms_.size() == 1; }
    bool is_zero() const;
    std::uint32_t coefficient(DepthSymbol s) const;  // requires is_linear()

    // Already normalized; kept for symmetry with the algebraic laws.
    DepthExpr normalize() const { return *this; }

    std::string to_string(bool ascii = false) const;

    friend bool operator==(const DepthExpr&, const DepthExpr&) = default;

private:
    explicit DepthExpr(std::vector<DepthVector> terms);
    static std::vector<DepthVector> reduce(std::vector<DepthVector> terms);

    std::vector<DepthVector> terms_;

    friend DepthExpr seq(const DepthExpr&, const DepthExpr&);
    friend DepthExpr par(const DepthExpr&, const DepthExpr&);
};

// Sequential composition: depths add.
DepthExpr seq(const DepthExpr& a, const DepthExpr& b);
// Parallel composition: depth is the maximum.
DepthExpr par(const DepthExpr& a, const DepthExpr& b);
DepthExpr par(std::span<const DepthExpr> es);
DepthExpr scale(const DepthExpr& e, std::uint32_t times);

}  // namespace talab
