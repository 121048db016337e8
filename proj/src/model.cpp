#include "talab/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "talab/error.hpp"

namespace talab {

using nlohmann::json;

void ModelConfig::validate() const {
    require(vocab >= 1, ErrorKind::InvalidArgument, "vocabulary must be nonempty");
    require(d >= 1, ErrorKind::BadDimension, "model width must be positive");
    require(kind == LayerKind::Plain || d % 2 == 0, ErrorKind::BadDimension,
            "rotary layers need even d, got " + std::to_string(d));
    const std::size_t cap = kind == LayerKind::Rope ? kMaxRopeSequence : kMaxSequence;
    require(max_len >= 1 && max_len <= cap, ErrorKind::ShapeMismatch,
            "max_len must be in [1, " + std::to_string(cap) + "]");
    for (GKind k : {g0, g})
        require(d >= 2 || (k != GKind::LayerNorm && k != GKind::MlpLayerNorm), ErrorKind::BadDimension,
                "layer norm needs d >= 2");
}

json ModelConfig::to_json() const {
    return json{{"vocab", vocab},
                {"d", d},
                {"layers", layers},
                {"kind", to_string(kind)},
                {"g0", to_string(g0)},
                {"g", to_string(g)},
                {"position_embedding", position_embedding},
                {"max_len", max_len},
                {"theta_base", theta_base}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    try {
        c.vocab = j.value("vocab", c.vocab);
        c.d = j.value("d", c.d);
        c.layers = j.value("layers", c.layers);
        c.kind = parse_layer_kind(j.value("kind", std::string(to_string(c.kind))));
        c.g0 = parse_g_kind(j.value("g0", std::string(to_string(c.g0))));
        c.g = parse_g_kind(j.value("g", std::string(to_string(c.g))));
        c.position_embedding = j.value("position_embedding", c.position_embedding);
        c.max_len = j.value("max_len", c.max_len);
        c.theta_base = j.value("theta_base", c.theta_base);
    } catch (const json::exception& e) {
        fail(ErrorKind::DataFormatError, std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

bool has_mlp(GKind k) { return k == GKind::Mlp || k == GKind::MlpLayerNorm; }

std::vector<Tensor> shapes(const ModelConfig& c) {
    std::vector<Tensor> out;
    auto add = [&](std::string name, std::size_t r, std::size_t cols) {
        out.push_back(Tensor{std::move(name), r, cols, std::vector<double>(r * cols, 0.0)});
    };
    add("embedding", c.vocab, c.d);
    if (c.position_embedding) add("position", c.max_len, c.d);
    if (has_mlp(c.g0)) {
        add("g0.w", c.d, c.d);
        add("g0.b", 1, c.d);
    }
    for (std::size_t i = 0; i < c.layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        for (const char* w : {"w_q", "w_k1", "w_k2", "w_v1", "w_v2"}) add(p + w, c.d, c.d);
        if (has_mlp(c.g)) {
            add(p + "g.w", c.d, c.d);
            add(p + "g.b", 1, c.d);
        }
    }
    add("readout.w", 2, c.d);
    add("readout.b", 1, 2);
    return out;
}

bool is_bias(const std::string& name) { return name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0; }

}  // namespace

double uniform_draw(std::uint64_t bits, double lo, double hi) {
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

Model Model::zeros(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    m.params_ = shapes(cfg);
    m.build_layout();
    return m;
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
    Model m = zeros(cfg);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    std::mt19937_64 rng(seed);
    for (auto& t : m.params_) {
        if (is_bias(t.name)) continue;
        for (auto& v : t.w) v = uniform_draw(rng(), -bound, bound);
    }
    return m;
}

void Model::build_layout() {
    layout_ = ParamLayout{};
    auto find = [&](const std::string& name) {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return i;
        return kNoParam;
    };
    layout_.embedding = find("embedding");
    layout_.position = find("position");
    layout_.g0 = {find("g0.w"), find("g0.b")};
    for (std::size_t i = 0; i < cfg_.layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        layout_.layers.push_back({find(p + "w_q"), find(p + "w_k1"), find(p + "w_k2"), find(p + "w_v1"),
                                  find(p + "w_v2"), {find(p + "g.w"), find(p + "g.b")}});
    }
    layout_.readout_w = find("readout.w");
    layout_.readout_b = find("readout.b");
}

const Tensor& Model::param(const std::string& name) const {
    for (const auto& t : params_)
        if (t.name == name) return t;
    fail(ErrorKind::InvalidArgument, "no parameter named '" + name + "'");
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : params_) n += t.w.size();
    return n;
}

Gradients Model::zero_gradients() const {
    Gradients g;
    g.reserve(params_.size());
    for (const auto& t : params_) g.emplace_back(t.w.size(), 0.0);
    return g;
}

Transformer<double> Model::transformer() const {
    Transformer<double> tf;
    tf.d = cfg_.d;
    if (cfg_.kind == LayerKind::Rope) tf.theta = theta_schedule(cfg_.d, cfg_.theta_base);
    auto block = [&](GKind kind, const ParamLayout::Block& b) {
        GBlock<double> g;
        g.kind = kind;
        if (b.w != kNoParam) g.w = params_[b.w].matrix();
        if (b.b != kNoParam) g.b = params_[b.b].matrix();
        return g;
    };
    tf.g0 = block(cfg_.g0, layout_.g0);
    for (const auto& l : layout_.layers) {
        LayerSpec<double> spec;
        spec.kind = cfg_.kind;
        spec.attn = {params_[l.w_q].matrix(), params_[l.w_k1].matrix(), params_[l.w_k2].matrix(),
                     params_[l.w_v1].matrix(), params_[l.w_v2].matrix()};
        spec.g = block(cfg_.g, l.g);
        tf.layers.push_back(std::move(spec));
    }
    return tf;
}

Matrix<double> Model::embed(const std::vector<std::uint32_t>& tokens) const {
    const std::size_t n = tokens.size();
    const std::size_t d = cfg_.d;
    require(n >= 1, ErrorKind::ShapeMismatch, "empty token sequence");
    require(n <= cfg_.max_len, ErrorKind::ShapeMismatch,
            "sequence length " + std::to_string(n) + " exceeds model cap " + std::to_string(cfg_.max_len));
    const Tensor& emb = params_[layout_.embedding];
    Matrix<double> x(n, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        require(tokens[i] < cfg_.vocab, ErrorKind::ShapeMismatch,
                "token id " + std::to_string(tokens[i]) + " outside a vocabulary of " + std::to_string(cfg_.vocab));
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = emb.at(tokens[i], j);
            if (layout_.position != kNoParam) x(i, j) += params_[layout_.position].at(i, j);
        }
    }
    return x;
}

json Model::to_json() const {
    json params = json::array();
    for (const auto& t : params_)
        params.push_back(json{{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"data", t.w}});
    return json{{"format", "talab-model"}, {"version", 1}, {"config", cfg_.to_json()}, {"params", params}};
}

Model Model::from_json(const json& j) {
    try {
        require(j.value("format", std::string()) == "talab-model", ErrorKind::DataFormatError,
                "not a talab model document");
        Model m = zeros(ModelConfig::from_json(j.at("config")));
        const auto& ps = j.at("params");
        require(ps.size() == m.params_.size(), ErrorKind::DataFormatError, "parameter count mismatch");
        for (std::size_t i = 0; i < ps.size(); ++i) {
            auto& t = m.params_[i];
            require(ps[i].at("name").get<std::string>() == t.name && ps[i].at("rows").get<std::size_t>() == t.rows &&
                        ps[i].at("cols").get<std::size_t>() == t.cols,
                    ErrorKind::DataFormatError, "parameter " + t.name + " has an unexpected name or shape");
            t.w = ps[i].at("data").get<std::vector<double>>();
            require(t.w.size() == t.rows * t.cols, ErrorKind::DataFormatError, "parameter " + t.name + " data size");
        }
        return m;
    } catch (const json::exception& e) {
        fail(ErrorKind::DataFormatError, std::string("model JSON: ") + e.what());
    }
}

void Model::save(const std::string& path) const {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorKind::DataFormatError, "cannot write " + path);
    os << to_json().dump(1) << "\n";
}

Model Model::load(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::DataFormatError, "cannot open " + path);
    json j = json::parse(is, nullptr, false);
    require(!j.is_discarded(), ErrorKind::DataFormatError, path + ": invalid JSON");
    return from_json(j);
}

bool operator==(const Tensor& a, const Tensor& b) {
    return a.name == b.name && a.rows == b.rows && a.cols == b.cols && a.w == b.w;
}

bool operator==(const Model& a, const Model& b) {
    return a.cfg_.to_json() == b.cfg_.to_json() && a.params_ == b.params_;
}

}  // namespace talab
