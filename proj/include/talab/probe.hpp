#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "talab/hardlang.hpp"
#include "talab/model.hpp"

namespace talab {

using Logits = std::array<double, 2>;

struct BlockCache {
    Matrix<double> in;
    Matrix<double> mlp_out;
    Matrix<double> out;
    std::vector<double> inv_std;  // layer norm, per row
};

struct LayerCache {
    Matrix<double> in;
    Matrix<double> q, k1, k2, v1, v2;
    Matrix<double> keys;     // plain: n^2 x d rows K1[a] * K2[b] at a + b*n
    Matrix<double> k1_rot;   // rotary: row j1*n + j2 holds R_{j1-j2} K1[j2]
    Matrix<double> k2_rot;   // rotary: row j1*n + j3 holds R_{j1-j3} K2[j3]
    Matrix<double> values;   // n^2 x d
    Matrix<double> probs;    // n x n^2, rows of D^-1 A
    Matrix<double> out;
    BlockCache g;
};

struct ForwardCache {
    std::vector<std::uint32_t> tokens;
    Matrix<double> x;
    BlockCache g0;
    std::vector<LayerCache> layers;
    Logits logits{};
};

// Dense double forward pass; equal to tf_forward on RealBackend up to summation order.
Logits classify_forward(const Model& model, const std::vector<std::uint32_t>& tokens, ForwardCache* cache = nullptr);

double cross_entropy(const Logits& z, int label);

// Gradients of cross_entropy(logits, label) for every parameter tensor.
Gradients backward(const Model& model, const ForwardCache& cache, int label);

struct GradCheckLine {
    std::string name;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckLine> lines;
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    bool passed() const { return max_rel_error <= tolerance; }
    std::string render() const;
};

// (f(x + h) - f(x - h)) / 2h
template <class F>
double central_difference(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Relative error |analytic - central| / max(1, |central|) per tensor.
GradCheckReport grad_check(const Model& model, const std::vector<std::uint32_t>& tokens, int label, double h,
                           double tolerance);

enum class EvalBackend { Real64, FloatP };

struct EvalOptions {
    EvalBackend backend = EvalBackend::Real64;
    int precision = 24;
};

// Predicted class (argmax, ties to 0) under the chosen arithmetic.
int predict(const Model& model, const std::vector<std::uint32_t>& tokens, const EvalOptions& opts = {});

// Fraction of examples whose argmax matches the label; EmptyDataset on no data.
double evaluate(const Model& model, const std::vector<Example>& data, const EvalOptions& opts = {});

// Mean cross-entropy over a dataset (Real64).
double dataset_loss(const Model& model, const std::vector<Example>& data);

struct OptimizerConfig {
    std::string name = "adam";  // adam | sgd
    double lr = 0.01;
    std::size_t steps = 100;
    std::size_t batch_size = 16;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    ModelConfig model;
    OptimizerConfig optimizer;
    std::string train_data;
    std::string eval_data;  // optional
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::size_t log_every = 25;
    std::optional<double> target_acc;  // stop at the first log row reaching it

    void validate() const;
    nlohmann::json to_json() const;
    // Relative data and output paths resolve against `base_dir`.
    static TrainConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
    static TrainConfig load(const std::string& path);
};

struct MetricsRow {
    std::size_t step = 0;
    double loss = 0.0;  // mean batch loss since the previous row
    double train_acc = 0.0;
    std::optional<double> eval_acc;
    double wall_ms = 0.0;
};

struct TrainResult {
    std::vector<MetricsRow> rows;
    std::size_t steps_run = 0;
    bool diverged = false;
    std::string divergence;
    double train_acc = 0.0;
    std::optional<double> eval_acc;
};

inline constexpr const char* kMetricsHeader = "step,loss,train_acc,eval_acc,wall_ms";

std::string metrics_csv(const std::vector<MetricsRow>& rows);

// Trains `model` in place. Deterministic in (config, data, initial model);
// the thread count only changes wall time.
TrainResult train_model(const TrainConfig& cfg, Model& model, const std::vector<Example>& train,
                        const std::vector<Example>& eval);

// Loads data, initialises from the seed, trains, and writes metrics.csv,
// model.json and summary.json into out_dir.
TrainResult train(const TrainConfig& cfg);

// TALAB_THREADS, else hardware concurrency; at least 1.
std::size_t worker_threads();

}  // namespace talab
