#pragma once

#include <optional>
#include <string>
#include <vector>

#include "talab/depth.hpp"

namespace talab {

enum class AuditComponent {
    Matmul,
    Kron,
    ColKron,
    RowKron,
    PlainLayer,
    RopeMatrix,
    RopeLayer,
    Mlp,
    LayerNorm,
    Tf,       // RoPE layers
    TfPlain,  // plain layers
};

struct AuditShape {
    std::size_t n = 2;
    std::size_t d = 2;
    std::size_t m = 1;
};

const char* component_name(AuditComponent c);
AuditComponent parse_component(const std::string& name);
std::vector<AuditComponent> all_components();

// Runs the component on traced inputs and returns the maximum output depth.
// Staged accounting charges each computation stage after the previous one;
// dataflow accounting follows operand dependencies only.
DepthExpr audit(AuditComponent c, const AuditShape& shape, bool staged = true);

// Reference totals for each component (m only matters for the Transformers).
DepthExpr reference_depth(AuditComponent c, std::size_t m = 1);

// Totals stated in the lemma headers where those differ from the worked proofs.
std::optional<DepthExpr> stated_depth(AuditComponent c);

struct AuditRow {
    std::string component;
    std::size_t m = 0;
    DepthExpr traced;
    DepthExpr reference;
    DepthExpr dataflow;
    bool shape_invariant = false;
    std::optional<DepthExpr> stated;

    bool matches() const { return traced == reference && traced.is_linear() && shape_invariant; }
};

// Every component, or only `only`; Transformers are audited for each m in ms.
std::vector<AuditRow> run_depth_audit(std::optional<AuditComponent> only, const std::vector<std::size_t>& ms);

std::string render_audit_text(const std::vector<AuditRow>& rows);
std::string render_audit_csv(const std::vector<AuditRow>& rows);

}  // namespace talab
