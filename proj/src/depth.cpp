#include "talab/depth.hpp"

#include <algorithm>

#include "talab/error.hpp"

namespace talab {

namespace {

bool dominated(const DepthVector& a, const DepthVector& b) {
    for (std::size_t i = 0; i < kDepthSymbolCount; ++i)
        if (a[i] > b[i]) return false;
    return true;
}

std::string render_linear(const DepthVector& v, bool ascii) {
    std::string out;
    for (std::size_t i = 0; i < kDepthSymbolCount; ++i) {
        if (v[i] == 0) continue;
        if (!out.empty()) out += " + ";
        if (v[i] != 1) out += std::to_string(v[i]) + (ascii ? "*" : "·");
        out += symbol_name(static_cast<DepthSymbol>(i), ascii);
    }
    return out.empty() ? "0" : out;
}

}  // namespace

const char* symbol_name(DepthSymbol s, bool ascii) {
    switch (s) {
        case DepthSymbol::Std: return "d_std";
        case DepthSymbol::Oplus: return ascii ? "d_oplus" : "d_⊕";
        case DepthSymbol::Otimes: return ascii ? "d_otimes" : "d_⊗";
        case DepthSymbol::Exp: return "d_exp";
        case DepthSymbol::Sqrt: return "d_sqrt";
        case DepthSymbol::Tri: return ascii ? "d_tri" : "d_△";
        case DepthSymbol::G: return "d_g";
    }
    return "?";
}

DepthExpr::DepthExpr() : terms_{DepthVector{}} {}

DepthExpr::DepthExpr(std::vector<DepthVector> terms) : terms_(reduce(std::move(terms))) {}

std::vector<DepthVector> DepthExpr::reduce(std::vector<DepthVector> terms) {
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    std::vector<DepthVector> kept;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        bool covered = false;
        for (std::size_t j = 0; j < terms.size() && !covered; ++j)
            covered = j != i && dominated(terms[i], terms[j]);
        if (!covered) kept.push_back(terms[i]);
    }
    return kept;
}

DepthExpr DepthExpr::unit(DepthSymbol s, std::uint32_t count) {
    DepthVector v{};
    v[static_cast<std::size_t>(s)] = count;
    return DepthExpr(std::vector<DepthVector>{v});
}

DepthExpr DepthExpr::linear(const DepthVector& v) { return DepthExpr(std::vector<DepthVector>{v}); }

DepthExpr DepthExpr::of(std::initializer_list<std::pair<std::uint32_t, DepthSymbol>> terms) {
    DepthVector v{};
    for (const auto& [c, s] : terms) v[static_cast<std::size_t>(s)] += c;
    return linear(v);
}

bool DepthExpr::is_zero() const { return is_linear() && terms_.front() == DepthVector{}; }

std::uint32_t DepthExpr::coefficient(DepthSymbol s) const {
    require(is_linear(), ErrorKind::InvalidArgument, "coefficient of a max expression");
    return terms_.front()[static_cast<std::size_t>(s)];
}

std::string DepthExpr::to_string(bool ascii) const {
    if (is_linear()) return render_linear(terms_.front(), ascii);
    std::string out = "max(";
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        if (i) out += ", ";
        out += render_linear(terms_[i], ascii);
    }
    return out + ")";
}

DepthExpr seq(const DepthExpr& a, const DepthExpr& b) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return b;
    std::vector<DepthVector> out;
    out.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& x : a.terms_)
        for (const auto& y : b.terms_) {
            DepthVector s{};
            for (std::size_t i = 0; i < kDepthSymbolCount; ++i) s[i] = x[i] + y[i];
            out.push_back(s);
        }
    return DepthExpr(std::move(out));
}

DepthExpr par(const DepthExpr& a, const DepthExpr& b) {
    if (a == b) return a;
    if (a.is_linear() && b.is_linear()) {
        if (dominated(a.terms_.front(), b.terms_.front())) return b;
        if (dominated(b.terms_.front(), a.terms_.front())) return a;
    }
    std::vector<DepthVector> out = a.terms_;
    out.insert(out.end(), b.terms_.begin(), b.terms_.end());
    return DepthExpr(std::move(out));
}

DepthExpr par(std::span<const DepthExpr> es) {
    require(!es.empty(), ErrorKind::InvalidArgument, "par of an empty list");
    DepthExpr out = es.front();
    for (std::size_t i = 1; i < es.size(); ++i) out = par(out, es[i]);
    return out;
}

DepthExpr scale(const DepthExpr& e, std::uint32_t times) {
    DepthExpr out;
    for (std::uint32_t i = 0; i < times; ++i) out = seq(out, e);
    return out;
}

}  // namespace talab
