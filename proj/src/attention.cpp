#include "talab/attention.hpp"

namespace talab {

const char* to_string(LayerKind k) { return k == LayerKind::Plain ? "plain" : "rope"; }

const char* to_string(GKind k) {
    switch (k) {
        case GKind::Identity: return "identity";
        case GKind::Mlp: return "mlp";
        case GKind::LayerNorm: return "layernorm";
        case GKind::MlpLayerNorm: return "mlp+layernorm";
    }
    return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
    if (s == "plain") return LayerKind::Plain;
    if (s == "rope") return LayerKind::Rope;
    fail(ErrorKind::InvalidArgument, "unknown layer kind '" + s + "' (plain|rope)");
}

GKind parse_g_kind(const std::string& s) {
    for (GKind k : {GKind::Identity, GKind::Mlp, GKind::LayerNorm, GKind::MlpLayerNorm})
        if (s == to_string(k)) return k;
    fail(ErrorKind::InvalidArgument, "unknown block kind '" + s + "'");
}

}  // namespace talab
