#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "talab/probe.hpp"

using namespace talab;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config(LayerKind kind, std::size_t layers, GKind g = GKind::Mlp) {
    ModelConfig c;
    c.vocab = 3;
    c.d = 4;
    c.layers = layers;
    c.kind = kind;
    c.g0 = g;
    c.g = g;
    c.max_len = 4;
    return c;
}

ModelConfig smoke_model() {
    ModelConfig c;
    c.vocab = 2;
    c.d = 8;
    c.layers = 2;
    c.g0 = GKind::LayerNorm;
    c.g = GKind::MlpLayerNorm;
    c.position_embedding = true;
    c.max_len = 16;
    return c;
}

std::vector<Example> smoke_data(std::size_t count, std::uint64_t seed) {
    GenParams p;
    p.min_len = 1;
    p.max_len = 16;
    return gen_dataset(builtin_morphism("z2"), p, count, seed);
}

TrainConfig smoke_train(double lr, std::size_t steps, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.model = smoke_model();
    cfg.optimizer.lr = lr;
    cfg.optimizer.steps = steps;
    cfg.seed = seed;
    cfg.log_every = 5;
    return cfg;
}

// Rows without the wall-clock column.
std::string timeless(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& r : rows) os << r.step << "," << r.loss << "," << r.train_acc << "," << r.eval_acc.value_or(-1) << "\n";
    return os.str();
}

}  // namespace

TEST_CASE("zero model and empty stack") {
    auto zero = Model::zeros(small_config(LayerKind::Plain, 1, GKind::Identity));
    auto z = classify_forward(zero, {0, 1, 2});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);

    auto c = small_config(LayerKind::Plain, 0, GKind::Identity);
    auto m = Model::init(c, 3);
    auto logits = classify_forward(m, {2, 0, 1});
    const auto& emb = m.param("embedding");
    const auto& rw = m.param("readout.w");
    for (int k = 0; k < 2; ++k) {
        double expected = 0.0;
        for (std::size_t j = 0; j < c.d; ++j) expected += rw.at(k, j) * emb.at(1, j);
        CHECK(logits[k] == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("forward pass is deterministic and matches the generic stack") {
    for (LayerKind kind : {LayerKind::Plain, LayerKind::Rope}) {
        for (GKind g : {GKind::Identity, GKind::Mlp, GKind::LayerNorm, GKind::MlpLayerNorm}) {
            auto c = small_config(kind, 2, g);
            c.position_embedding = true;
            auto m = Model::init(c, 5);
            const std::vector<std::uint32_t> tokens{1, 0, 2, 2};
            auto z = classify_forward(m, tokens);
            auto again = classify_forward(m, tokens);
            CHECK(z == again);

            RealBackend be;
            auto h = tf_forward(be, m.embed(tokens), m.transformer());
            const auto& rw = m.param("readout.w");
            const auto& rb = m.param("readout.b");
            for (int k = 0; k < 2; ++k) {
                double expected = rb.w[k];
                for (std::size_t j = 0; j < c.d; ++j) expected += rw.at(k, j) * h(tokens.size() - 1, j);
                CHECK(z[k] == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("readout gradient at symmetric logits") {
    auto c = small_config(LayerKind::Plain, 1, GKind::LayerNorm);
    auto m = Model::init(c, 2);
    auto& params = m.params();
    for (auto& t : params)
        if (t.name.rfind("readout", 0) == 0) std::fill(t.w.begin(), t.w.end(), 0.0);
    ForwardCache cache;
    auto z = classify_forward(m, {0, 1}, &cache);
    REQUIRE(z[0] == 0.0);
    REQUIRE(z[1] == 0.0);
    CHECK(cross_entropy(z, 0) == doctest::Approx(std::log(2.0)));
    auto g = backward(m, cache, 0);
    const auto& lay = m.layout();
    CHECK(g[lay.readout_b][0] == -0.5);
    CHECK(g[lay.readout_b][1] == 0.5);
    const auto& feat = cache.layers.back().g.out;
    for (std::size_t j = 0; j < c.d; ++j) {
        CHECK(g[lay.readout_w][j] == doctest::Approx(-0.5 * feat(1, j)));
        CHECK(g[lay.readout_w][c.d + j] == doctest::Approx(0.5 * feat(1, j)));
    }
}

TEST_CASE("central difference is exact for a quadratic") {
    auto sq = [](double x) { return x * x; };
    CHECK(central_difference(sq, 3.0, std::ldexp(1.0, -10)) == 6.0);
    CHECK(central_difference(sq, 3.0, 1e-5) == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("gradients match central differences") {
    SUBCASE("plain, n = 3, m = 1") {
        auto rep = grad_check(Model::init(small_config(LayerKind::Plain, 1), 1), {0, 2, 1}, 1, 1e-5, 1e-5);
        CHECK(rep.passed());
        CHECK(rep.lines.size() == Model::init(small_config(LayerKind::Plain, 1), 1).params().size());
    }
    SUBCASE("rotary, d = 4") {
        for (std::size_t m : {1u, 2u}) {
            auto rep = grad_check(Model::init(small_config(LayerKind::Rope, m), 4), {1, 1, 0, 2}, 0, 1e-5, 1e-5);
            CHECK_MESSAGE(rep.passed(), rep.render());
        }
    }
    SUBCASE("layer norm blocks") {
        auto c = small_config(LayerKind::Plain, 2, GKind::LayerNorm);
        c.position_embedding = true;
        auto rep = grad_check(Model::init(c, 6), {2, 0, 1}, 1, 1e-5, 1e-5);
        CHECK_MESSAGE(rep.passed(), rep.render());
    }
    SUBCASE("all-zero parameters") {
        auto rep = grad_check(Model::zeros(small_config(LayerKind::Plain, 1, GKind::MlpLayerNorm)), {0, 1}, 0, 1e-5,
                              1e-5);
        CHECK(std::isfinite(rep.max_rel_error));
        CHECK(rep.render().find("max") != std::string::npos);
    }
}

TEST_CASE("finite-difference error with layer norm after the mlp shrinks as h^2") {
    auto c = small_config(LayerKind::Plain, 2, GKind::MlpLayerNorm);
    auto m = Model::init(c, 1);
    const std::vector<std::uint32_t> t{0, 2, 1};
    const double coarse = grad_check(m, t, 1, 1e-4, 1.0).max_rel_error;
    const double fine = grad_check(m, t, 1, 1e-5, 1.0).max_rel_error;
    CHECK(fine < coarse / 50.0);
    CHECK(grad_check(m, t, 1, 1e-6, 1e-5).passed());
}

TEST_CASE("FloatP evaluation follows Real64 at high precision") {
    auto c = small_config(LayerKind::Rope, 1, GKind::LayerNorm);
    auto m = Model::init(c, 8);
    std::mt19937_64 rng(1);
    std::vector<Example> data;
    for (int i = 0; i < 20; ++i) {
        Example e;
        e.tokens.resize(1 + i % 4);
        for (auto& x : e.tokens) x = static_cast<std::uint32_t>(rng() % 3);
        e.label = predict(m, e.tokens);
        data.push_back(e);
    }
    CHECK(evaluate(m, data) == 1.0);
    CHECK(evaluate(m, data, {EvalBackend::FloatP, 48}) == 1.0);
}

TEST_CASE("evaluation") {
    auto c = small_config(LayerKind::Plain, 1);
    auto m = Model::zeros(c);
    CHECK_THROWS_AS(evaluate(m, {}), Error);
    m.params()[m.layout().readout_b].w = {1.0, 0.0};  // always predicts 0
    GenParams p;
    p.min_len = 2;
    p.max_len = 4;
    auto balanced = gen_dataset(builtin_morphism("s3"), p, 40, 2);
    CHECK(evaluate(m, balanced) == 0.5);
    CHECK_THROWS_AS(predict(m, {7}), Error);
    CHECK_THROWS_AS(predict(m, {0, 0, 0, 0, 0}), Error);
}

TEST_CASE("model JSON round trip") {
    auto c = small_config(LayerKind::Rope, 2, GKind::MlpLayerNorm);
    c.position_embedding = true;
    auto m = Model::init(c, 12);
    CHECK(Model::from_json(m.to_json()) == m);
    auto j = m.to_json();
    j["params"][0]["rows"] = 99;
    CHECK_THROWS_AS(Model::from_json(j), Error);
    auto bad = c.to_json();
    bad["d"] = 3;
    CHECK_THROWS_AS(ModelConfig::from_json(bad), Error);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    auto data = smoke_data(64, 1);
    for (const char* opt : {"adam", "sgd"}) {
        auto cfg = smoke_train(0.0, 3, 1);
        cfg.optimizer.name = opt;
        Model m = Model::init(cfg.model, 1);
        const Model before = m;
        auto res = train_model(cfg, m, data, {});
        CHECK_FALSE(res.diverged);
        CHECK(m == before);
    }
}

TEST_CASE("a single step logs a single row") {
    auto data = smoke_data(32, 1);
    auto cfg = smoke_train(1e-3, 1, 1);
    Model m = Model::init(cfg.model, 1);
    auto res = train_model(cfg, m, data, {});
    REQUIRE(res.rows.size() == 1);
    CHECK(res.rows[0].step == 1);
    CHECK(res.steps_run == 1);
    CHECK_FALSE(res.rows[0].eval_acc.has_value());
    const auto csv = metrics_csv(res.rows);
    CHECK(csv.rfind(std::string(kMetricsHeader) + "\n1,", 0) == 0);
}

TEST_CASE("training is deterministic per seed") {
    auto data = smoke_data(96, 1);
    auto eval = smoke_data(32, 99);
    auto cfg = smoke_train(3e-3, 20, 4);
    Model a = Model::init(cfg.model, cfg.seed), b = Model::init(cfg.model, cfg.seed);
    auto ra = train_model(cfg, a, data, eval);
    auto rb = train_model(cfg, b, data, eval);
    CHECK(timeless(ra.rows) == timeless(rb.rows));
    CHECK(a == b);
    CHECK(ra.rows.size() == 4);
}

TEST_CASE("ten small steps do not increase the loss") {
    auto data = smoke_data(512, 1);
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = smoke_train(1e-3, 10, seed);
        Model m = Model::init(cfg.model, seed);
        const double before = dataset_loss(m, data);
        train_model(cfg, m, data, {});
        ok += dataset_loss(m, data) <= before ? 1 : 0;
    }
    CHECK(ok >= 4);
}

TEST_CASE("training rejects bad data") {
    auto cfg = smoke_train(1e-3, 1, 1);
    Model m = Model::init(cfg.model, 1);
    CHECK_THROWS_AS(train_model(cfg, m, {}, {}), Error);
    auto data = smoke_data(4, 1);
    data[0].label = 2;
    CHECK_THROWS_AS(train_model(cfg, m, data, {}), Error);
    data = smoke_data(4, 1);
    data[1].tokens.assign(17, 0);
    CHECK_THROWS_AS(train_model(cfg, m, data, {}), Error);
    cfg.optimizer.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("train writes metrics, weights and a summary") {
    const fs::path dir = fs::temp_directory_path() / "talab_unit_train";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_jsonl((dir / "train.jsonl").string(), smoke_data(32, 1));
    auto cfg_json = smoke_train(1e-3, 3, 1).to_json();
    cfg_json["train_data"] = "train.jsonl";
    cfg_json["eval_data"] = "";
    cfg_json["out_dir"] = "run";
    {
        std::ofstream os(dir / "cfg.json");
        os << cfg_json.dump();
    }
    auto cfg = TrainConfig::load((dir / "cfg.json").string());
    CHECK(cfg.train_data == (dir / "train.jsonl").string());
    auto res = train(cfg);
    CHECK(res.steps_run == 3);
    std::ifstream metrics(dir / "run" / "metrics.csv");
    std::string header;
    std::getline(metrics, header);
    CHECK(header == kMetricsHeader);
    CHECK(fs::exists(dir / "run" / "summary.json"));
    auto saved = Model::load((dir / "run" / "model.json").string());
    CHECK(saved.config().to_json() == cfg.model.to_json());
    fs::remove_all(dir);
}
