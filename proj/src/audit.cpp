#include "talab/audit.hpp"

#include <random>
#include <sstream>

#include "talab/attention.hpp"
#include "talab/error.hpp"
#include "talab/trace.hpp"

namespace talab {

namespace {

using S = DepthSymbol;
using TB = TracedBackend<RealBackend>;

struct Named {
    AuditComponent c;
    const char* name;
};

constexpr Named kNames[] = {
    {AuditComponent::Matmul, "matmul"},          {AuditComponent::Kron, "kron"},
    {AuditComponent::ColKron, "col-kron"},       {AuditComponent::RowKron, "row-kron"},
    {AuditComponent::PlainLayer, "plain-layer"}, {AuditComponent::RopeMatrix, "rope-matrix"},
    {AuditComponent::RopeLayer, "rope-layer"},   {AuditComponent::Mlp, "mlp"},
    {AuditComponent::LayerNorm, "layernorm"},    {AuditComponent::Tf, "tf"},
    {AuditComponent::TfPlain, "tf-plain"},
};

Matrix<double> random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix<double> m(r, c, 0.0);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

AttnParams<double> random_params(std::mt19937_64& rng, std::size_t d) {
    return {random_matrix(rng, d, d, 0.5), random_matrix(rng, d, d, 0.5), random_matrix(rng, d, d, 0.5),
            random_matrix(rng, d, d, 0.5), random_matrix(rng, d, d, 0.5)};
}

LayerSpec<double> random_layer(std::mt19937_64& rng, LayerKind kind, GKind g, std::size_t d) {
    LayerSpec<double> l;
    l.kind = kind;
    l.attn = random_params(rng, d);
    l.g.kind = g;
    l.g.w = random_matrix(rng, d, d, 0.5);
    l.g.b = random_matrix(rng, 1, d, 0.5);
    return l;
}

}  // namespace

const char* component_name(AuditComponent c) {
    for (const auto& n : kNames)
        if (n.c == c) return n.name;
    return "?";
}

AuditComponent parse_component(const std::string& name) {
    for (const auto& n : kNames)
        if (name == n.name) return n.c;
    fail(ErrorKind::InvalidArgument, "unknown audit component '" + name + "'");
}

std::vector<AuditComponent> all_components() {
    std::vector<AuditComponent> out;
    for (const auto& n : kNames) out.push_back(n.c);
    return out;
}

DepthExpr audit(AuditComponent c, const AuditShape& shape, bool staged) {
    const std::size_t n = shape.n;
    const std::size_t d = shape.d;
    require(n >= 1 && n <= 16 && d >= 2, ErrorKind::ShapeMismatch, "audit shape outside desk limits");
    TraceContext ctx(staged);
    TB be(RealBackend{}, ctx);
    std::mt19937_64 rng(0x5eedULL + n * 131 + d);
    auto x = trace_inputs(random_matrix(rng, n, d, 1.0));
    auto w = trace_inputs(random_matrix(rng, d, d, 0.5));

    auto traced_layer = [&](LayerKind kind) {
        auto l = random_layer(rng, kind, GKind::Identity, d);
        return lift(be, l);
    };

    switch (c) {
        case AuditComponent::Matmul: return max_depth(matmul(be, x, w));
        case AuditComponent::Kron: return max_depth(kron(be, x, w));
        case AuditComponent::ColKron: return max_depth(col_kron(be, x, trace_inputs(random_matrix(rng, n, d, 1.0))));
        case AuditComponent::RowKron: return max_depth(row_kron(be, x, trace_inputs(random_matrix(rng, n, d, 1.0))));
        case AuditComponent::PlainLayer:
            return max_depth(attn_layer(be, x, traced_layer(LayerKind::Plain), ThetaSchedule{}));
        case AuditComponent::RopeMatrix: {
            require(d % 2 == 0, ErrorKind::BadDimension, "rotary audit needs even d");
            auto l = traced_layer(LayerKind::Rope);
            return max_depth(attn_matrix_rope(be, x, l.attn, theta_schedule(d)));
        }
        case AuditComponent::RopeLayer: {
            require(d % 2 == 0, ErrorKind::BadDimension, "rotary audit needs even d");
            return max_depth(attn_layer(be, x, traced_layer(LayerKind::Rope), theta_schedule(d)));
        }
        case AuditComponent::Mlp:
            return max_depth(mlp(be, x, w, trace_inputs(random_matrix(rng, 1, d, 0.5))));
        case AuditComponent::LayerNorm: return max_depth(layer_norm(be, x));
        case AuditComponent::Tf:
        case AuditComponent::TfPlain: {
            const LayerKind kind = c == AuditComponent::Tf ? LayerKind::Rope : LayerKind::Plain;
            if (kind == LayerKind::Rope)
                require(d % 2 == 0, ErrorKind::BadDimension, "rotary audit needs even d");
            Transformer<double> tf;
            tf.d = d;
            tf.theta = kind == LayerKind::Rope ? theta_schedule(d) : ThetaSchedule{};
            tf.g0.kind = GKind::Identity;
            for (std::size_t i = 0; i < shape.m; ++i)
                tf.layers.push_back(random_layer(rng, kind, i % 2 ? GKind::MlpLayerNorm : GKind::Mlp, d));
            ctx.set_opaque_blocks(true);
            return max_depth(tf_forward(be, x, lift(be, tf)));
        }
    }
    fail(ErrorKind::InvalidArgument, "unhandled audit component");
}

DepthExpr reference_depth(AuditComponent c, std::size_t m) {
    const auto k = static_cast<std::uint32_t>(m);
    switch (c) {
        case AuditComponent::Matmul: return DepthExpr::of({{1, S::Std}, {1, S::Oplus}});
        case AuditComponent::Kron:
        case AuditComponent::ColKron:
        case AuditComponent::RowKron: return DepthExpr::unit(S::Std);
        case AuditComponent::PlainLayer: return DepthExpr::of({{6, S::Std}, {5, S::Oplus}, {1, S::Exp}});
        case AuditComponent::RopeMatrix:
            return DepthExpr::of({{7, S::Std}, {4, S::Oplus}, {1, S::Tri}, {1, S::Exp}});
        case AuditComponent::RopeLayer:
            return DepthExpr::of({{11, S::Std}, {8, S::Oplus}, {1, S::Tri}, {1, S::Exp}});
        case AuditComponent::Mlp: return DepthExpr::of({{2, S::Std}, {1, S::Oplus}});
        case AuditComponent::LayerNorm: return DepthExpr::of({{6, S::Std}, {2, S::Oplus}, {1, S::Sqrt}});
        case AuditComponent::Tf:
            return DepthExpr::of({{k + 1, S::G}, {11 * k, S::Std}, {8 * k, S::Oplus}, {k, S::Tri}, {k, S::Exp}});
        case AuditComponent::TfPlain:
            return DepthExpr::of({{k + 1, S::G}, {6 * k, S::Std}, {5 * k, S::Oplus}, {k, S::Exp}});
    }
    fail(ErrorKind::InvalidArgument, "unhandled audit component");
}

std::optional<DepthExpr> stated_depth(AuditComponent c) {
    if (c == AuditComponent::PlainLayer) return DepthExpr::of({{5, S::Std}, {5, S::Oplus}, {1, S::Exp}});
    if (c == AuditComponent::LayerNorm) return DepthExpr::of({{5, S::Std}, {2, S::Oplus}, {1, S::Sqrt}});
    return std::nullopt;
}

std::vector<AuditRow> run_depth_audit(std::optional<AuditComponent> only, const std::vector<std::size_t>& ms) {
    std::vector<AuditRow> rows;
    auto one = [&](AuditComponent c, std::size_t m) {
        const bool tf = c == AuditComponent::Tf || c == AuditComponent::TfPlain;
        const AuditShape small{2, 2, m};
        const AuditShape large{3, 4, m};
        AuditRow row;
        row.component = component_name(c);
        row.m = tf ? m : 0;
        row.traced = audit(c, small, true);
        row.shape_invariant = audit(c, large, true) == row.traced;
        row.dataflow = audit(c, small, false);
        row.reference = reference_depth(c, m);
        row.stated = stated_depth(c);
        rows.push_back(row);
    };
    for (AuditComponent c : all_components()) {
        if (only && *only != c) continue;
        if (c == AuditComponent::Tf || c == AuditComponent::TfPlain) {
            for (std::size_t m : ms) one(c, m);
        } else {
            one(c, 1);
        }
    }
    return rows;
}

std::string render_audit_text(const std::vector<AuditRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"component", "m", "traced", "reference", "match", "dataflow", "note"});
    for (const auto& r : rows) {
        std::string note;
        if (!r.shape_invariant) note = "shape-dependent";
        if (r.stated && !(*r.stated == r.traced)) note = "stated total " + r.stated->to_string() + " differs";
        cells.push_back({r.component, r.m ? std::to_string(r.m) : "-", r.traced.to_string(), r.reference.to_string(),
                         r.matches() ? "yes" : "NO", r.dataflow.to_string(), note});
    }
    // Width by code points so the symbol glyphs line up.
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s)
            if ((ch & 0xC0) != 0x80) ++w;
        return w;
    };
    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
    std::ostringstream os;
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << row[i];
            if (i + 1 < row.size()) os << std::string(widths[i] - width(row[i]) + 2, ' ');
        }
        os << "\n";
    }
    return os.str();
}

std::string render_audit_csv(const std::vector<AuditRow>& rows) {
    std::ostringstream os;
    os << "component,m,traced,reference,match,dataflow,stated,stated_match\n";
    for (const auto& r : rows) {
        os << r.component << "," << r.m << "," << r.traced.to_string(true) << "," << r.reference.to_string(true) << ","
           << (r.matches() ? "yes" : "no") << "," << r.dataflow.to_string(true) << ","
           << (r.stated ? r.stated->to_string(true) : "") << ","
           << (r.stated ? (*r.stated == r.traced ? "yes" : "no") : "") << "\n";
    }
    return os.str();
}

}  // namespace talab
