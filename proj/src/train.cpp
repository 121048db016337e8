#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "talab/error.hpp"
#include "talab/probe.hpp"

namespace talab {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t worker_threads() {
    if (const char* env = std::getenv("TALAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void TrainConfig::validate() const {
    model.validate();
    require(optimizer.name == "adam" || optimizer.name == "sgd", ErrorKind::InvalidArgument,
            "optimizer must be adam or sgd");
    require(optimizer.steps >= 1, ErrorKind::InvalidArgument, "steps must be at least 1");
    require(optimizer.batch_size >= 1, ErrorKind::InvalidArgument, "batch size must be at least 1");
    require(std::isfinite(optimizer.lr) && optimizer.lr >= 0.0, ErrorKind::InvalidArgument,
            "learning rate must be finite and non-negative");
    require(log_every >= 1, ErrorKind::InvalidArgument, "log_every must be at least 1");
}

json TrainConfig::to_json() const {
    json j{{"model", model.to_json()},
           {"optimizer",
            {{"name", optimizer.name},
             {"lr", optimizer.lr},
             {"steps", optimizer.steps},
             {"batch_size", optimizer.batch_size},
             {"beta1", optimizer.beta1},
             {"beta2", optimizer.beta2},
             {"eps", optimizer.eps}}},
           {"train_data", train_data},
           {"eval_data", eval_data},
           {"seed", seed},
           {"out_dir", out_dir},
           {"log_every", log_every}};
    if (target_acc) j["target_acc"] = *target_acc;
    return j;
}

TrainConfig TrainConfig::from_json(const json& j, const std::string& base_dir) {
    TrainConfig c;
    auto resolve = [&](const std::string& p) {
        if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
        return (fs::path(base_dir) / p).string();
    };
    try {
        if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            c.optimizer.name = o.value("name", c.optimizer.name);
            c.optimizer.lr = o.value("lr", c.optimizer.lr);
            c.optimizer.steps = o.value("steps", c.optimizer.steps);
            c.optimizer.batch_size = o.value("batch_size", c.optimizer.batch_size);
            c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
            c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
            c.optimizer.eps = o.value("eps", c.optimizer.eps);
        }
        c.train_data = resolve(j.value("train_data", std::string()));
        c.eval_data = resolve(j.value("eval_data", std::string()));
        c.seed = j.value("seed", c.seed);
        c.out_dir = resolve(j.value("out_dir", c.out_dir));
        c.log_every = j.value("log_every", c.log_every);
        if (j.contains("target_acc") && !j.at("target_acc").is_null()) c.target_acc = j.at("target_acc").get<double>();
    } catch (const json::exception& e) {
        fail(ErrorKind::DataFormatError, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::DataFormatError, "cannot open " + path);
    json j = json::parse(is, nullptr, false);
    require(!j.is_discarded(), ErrorKind::DataFormatError, path + ": invalid JSON");
    return from_json(j, fs::path(path).parent_path().string());
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << kMetricsHeader << "\n";
    char buf[64];
    for (const auto& r : rows) {
        os << r.step << ",";
        std::snprintf(buf, sizeof buf, "%.17g", r.loss);
        os << buf << ",";
        std::snprintf(buf, sizeof buf, "%.6f", r.train_acc);
        os << buf << ",";
        if (r.eval_acc) {
            std::snprintf(buf, sizeof buf, "%.6f", *r.eval_acc);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%.1f", r.wall_ms);
        os << "," << buf << "\n";
    }
    return os.str();
}

namespace {

struct Optimizer {
    OptimizerConfig cfg;
    Gradients m, v;
    std::size_t t = 0;

    Optimizer(const OptimizerConfig& c, const Model& model) : cfg(c) {
        if (cfg.name == "adam") {
            m = model.zero_gradients();
            v = model.zero_gradients();
        }
    }

    void step(Model& model, const Gradients& g) {
        ++t;
        auto& params = model.params();
        if (cfg.name == "sgd") {
            for (std::size_t k = 0; k < params.size(); ++k)
                for (std::size_t i = 0; i < g[k].size(); ++i) params[k].w[i] -= cfg.lr * g[k][i];
            return;
        }
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < params.size(); ++k)
            for (std::size_t i = 0; i < g[k].size(); ++i) {
                m[k][i] = cfg.beta1 * m[k][i] + (1.0 - cfg.beta1) * g[k][i];
                v[k][i] = cfg.beta2 * v[k][i] + (1.0 - cfg.beta2) * g[k][i] * g[k][i];
                const double mhat = m[k][i] / c1;
                const double vhat = v[k][i] / c2;
                params[k].w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
    }
};

struct ExampleResult {
    Gradients grads;
    double loss = 0.0;
    bool correct = false;
    std::string error;
};

// Runs `body(i)` for i in [0, count) on up to `threads` workers; rethrows
// the exception of the lowest failing index.
template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += threads) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double accuracy(const Model& model, const std::vector<Example>& data, std::size_t threads) {
    std::vector<char> ok(data.size(), 0);
    parallel_for(data.size(), threads, [&](std::size_t i) {
        auto z = classify_forward(model, data[i].tokens);
        ok[i] = ((z[1] > z[0] ? 1 : 0) == data[i].label) ? 1 : 0;
    });
    std::size_t correct = 0;
    for (char c : ok) correct += static_cast<std::size_t>(c);
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

TrainResult train_model(const TrainConfig& cfg, Model& model, const std::vector<Example>& train,
                        const std::vector<Example>& eval) {
    cfg.validate();
    require(!train.empty(), ErrorKind::EmptyDataset, "training set is empty");
    for (const auto* set : {&train, &eval})
        for (const auto& ex : *set) {
            require(ex.label == 0 || ex.label == 1, ErrorKind::DataFormatError, "labels must be 0 or 1");
            require(!ex.tokens.empty() && ex.tokens.size() <= cfg.model.max_len, ErrorKind::DataFormatError,
                    "example length " + std::to_string(ex.tokens.size()) + " outside [1, max_len]");
            for (auto t : ex.tokens)
                require(t < cfg.model.vocab, ErrorKind::DataFormatError,
                        "token " + std::to_string(t) + " outside the model vocabulary");
        }

    const auto start = std::chrono::steady_clock::now();
    const std::size_t threads = worker_threads();
    const std::size_t batch = std::min(cfg.optimizer.batch_size, train.size());
    Optimizer opt(cfg.optimizer, model);
    std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x7261696eULL));
    std::vector<std::size_t> order(train.size());
    std::size_t cursor = order.size();

    TrainResult res;
    double window_loss = 0.0;
    std::size_t window_steps = 0;
    std::vector<ExampleResult> results(batch);

    for (std::size_t step = 1; step <= cfg.optimizer.steps; ++step) {
        std::vector<std::size_t> idx;
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                for (std::size_t i = order.size(); i > 1; --i) {
                    const std::size_t j = static_cast<std::size_t>(
                        (static_cast<unsigned __int128>(rng()) * i) >> 64);
                    std::swap(order[i - 1], order[j]);
                }
                cursor = 0;
            }
            idx.push_back(order[cursor++]);
        }

        parallel_for(batch, threads, [&](std::size_t b) {
            auto& r = results[b];
            r.error.clear();
            try {
                ForwardCache cache;
                const auto& ex = train[idx[b]];
                auto z = classify_forward(model, ex.tokens, &cache);
                r.loss = cross_entropy(z, ex.label);
                r.correct = (z[1] > z[0] ? 1 : 0) == ex.label;
                r.grads = backward(model, cache, ex.label);
            } catch (const Error& e) {
                r.error = e.what();
            }
        });

        // Fixed summation order over the batch.
        Gradients total = model.zero_gradients();
        double loss = 0.0;
        for (const auto& r : results) {
            if (!r.error.empty()) {
                res.diverged = true;
                res.divergence = "step " + std::to_string(step) + ": " + r.error;
                break;
            }
            loss += r.loss;
            for (std::size_t k = 0; k < total.size(); ++k)
                for (std::size_t i = 0; i < total[k].size(); ++i) total[k][i] += r.grads[k][i];
        }
        if (res.diverged) break;
        loss /= static_cast<double>(batch);
        if (!std::isfinite(loss)) {
            res.diverged = true;
            res.divergence = "step " + std::to_string(step) + ": non-finite loss";
        }
        const double scale = 1.0 / static_cast<double>(batch);
        for (auto& g : total)
            for (auto& x : g) x *= scale;
        if (!res.diverged) opt.step(model, total);
        res.steps_run = step;
        window_loss += loss;
        ++window_steps;

        const bool last = step == cfg.optimizer.steps || res.diverged;
        if (step % cfg.log_every == 0 || last) {
            MetricsRow row;
            row.step = step;
            row.loss = window_loss / static_cast<double>(window_steps);
            try {
                row.train_acc = accuracy(model, train, threads);
                if (!eval.empty()) row.eval_acc = accuracy(model, eval, threads);
            } catch (const Error& e) {
                res.diverged = true;
                res.divergence = "step " + std::to_string(step) + " evaluation: " + e.what();
            }
            row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            res.rows.push_back(row);
            res.train_acc = row.train_acc;
            res.eval_acc = row.eval_acc;
            window_loss = 0.0;
            window_steps = 0;
            if (cfg.target_acc && row.train_acc >= *cfg.target_acc) break;
        }
        if (res.diverged) break;
    }
    return res;
}

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    require(!cfg.train_data.empty(), ErrorKind::DataFormatError, "train_data is not set");
    auto train_set = read_jsonl(cfg.train_data);
    std::vector<Example> eval_set;
    if (!cfg.eval_data.empty()) eval_set = read_jsonl(cfg.eval_data);

    Model model = Model::init(cfg.model, cfg.seed);
    TrainResult res = train_model(cfg, model, train_set, eval_set);

    fs::create_directories(cfg.out_dir);
    {
        std::ofstream os(fs::path(cfg.out_dir) / "metrics.csv");
        require(static_cast<bool>(os), ErrorKind::DataFormatError, "cannot write metrics in " + cfg.out_dir);
        os << metrics_csv(res.rows);
    }
    model.save((fs::path(cfg.out_dir) / "model.json").string());
    json summary{{"steps_run", res.steps_run},
                 {"train_acc", res.train_acc},
                 {"diverged", res.diverged},
                 {"config", cfg.to_json()}};
    if (res.eval_acc) summary["eval_acc"] = *res.eval_acc;
    if (res.diverged) summary["divergence"] = res.divergence;
    std::ofstream(fs::path(cfg.out_dir) / "summary.json") << summary.dump(2) << "\n";
    return res;
}

}  // namespace talab
