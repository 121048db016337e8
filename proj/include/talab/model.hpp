#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "talab/attention.hpp"

namespace talab {

struct ModelConfig {
    std::size_t vocab = 2;
    std::size_t d = 4;
    std::size_t layers = 1;
    LayerKind kind = LayerKind::Plain;
    GKind g0 = GKind::Identity;
    GKind g = GKind::Identity;  // block after every attention layer
    bool position_embedding = false;
    std::size_t max_len = 16;
    double theta_base = kDefaultThetaBase;

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> w;

    double& at(std::size_t i, std::size_t j) { return w[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return w[i * cols + j]; }
    Matrix<double> matrix() const { return Matrix<double>(rows, cols, w); }
};

inline constexpr std::size_t kNoParam = std::numeric_limits<std::size_t>::max();

// Positions of each tensor in Model::params().
struct ParamLayout {
    struct Block {
        std::size_t w = kNoParam;
        std::size_t b = kNoParam;
    };
    struct Layer {
        std::size_t w_q, w_k1, w_k2, w_v1, w_v2;
        Block g;
    };
    std::size_t embedding = kNoParam;
    std::size_t position = kNoParam;
    Block g0;
    std::vector<Layer> layers;
    std::size_t readout_w = kNoParam;  // 2 x d
    std::size_t readout_b = kNoParam;  // 1 x 2
};

using Gradients = std::vector<std::vector<double>>;  // aligned with Model::params()

// Token embedding, optional learned position embedding, the Transformer
// stack, and a two-way linear readout of the last position.
class Model {
public:
    Model() = default;

    // Weights uniform in [-1/sqrt(d), 1/sqrt(d)] from the seed; biases zero.
    static Model init(const ModelConfig& cfg, std::uint64_t seed);
    static Model zeros(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }
    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    const Tensor& param(std::size_t i) const { return params_[i]; }
    const Tensor& param(const std::string& name) const;
    std::size_t parameter_count() const;

    Gradients zero_gradients() const;

    // The attention stack as a generic Transformer for backend evaluation.
    Transformer<double> transformer() const;
    // Embedded input rows for a token sequence.
    Matrix<double> embed(const std::vector<std::uint32_t>& tokens) const;

    nlohmann::json to_json() const;
    static Model from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static Model load(const std::string& path);

    friend bool operator==(const Model& a, const Model& b);

private:
    void build_layout();

    ModelConfig cfg_;
    std::vector<Tensor> params_;
    ParamLayout layout_;
};

bool operator==(const Tensor& a, const Tensor& b);

// Uniform double in [lo, hi) from the top 53 bits of one draw.
double uniform_draw(std::uint64_t bits, double lo, double hi);

}  // namespace talab
