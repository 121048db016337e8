// talab: float audits, depth audits, dataset generation, training and evaluation.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "talab/audit.hpp"
#include "talab/error.hpp"
#include "talab/fp_audit.hpp"
#include "talab/hardlang.hpp"
#include "talab/probe.hpp"
#include "talab/swap_check.hpp"

namespace {

using namespace talab;

constexpr int kExitCheckFailed = 1;
constexpr int kExitError = 2;

std::set<Element> parse_elements(const std::string& s) {
    std::set<Element> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            const unsigned long v = std::stoul(item, &used);
            require(used == item.size(), ErrorKind::InvalidArgument, "bad element '" + item + "'");
            out.insert(static_cast<Element>(v));
        } catch (const std::logic_error&) {
            fail(ErrorKind::InvalidArgument, "bad element '" + item + "'");
        }
    }
    return out;
}

int cmd_fp_audit(int p) {
    auto rep = run_fp_audit(p);
    std::cout << rep.render();
    return rep.passed() ? 0 : kExitCheckFailed;
}

int cmd_depth_audit(const std::string& component, std::size_t m, bool csv) {
    std::optional<AuditComponent> only;
    if (!component.empty() && component != "all") only = parse_component(component);
    std::vector<std::size_t> ms = m ? std::vector<std::size_t>{m} : std::vector<std::size_t>{1, 2, 3};
    auto rows = run_depth_audit(only, ms);
    std::cout << (csv ? render_audit_csv(rows) : render_audit_text(rows));
    for (const auto& r : rows)
        if (!r.matches()) return kExitCheckFailed;
    return 0;
}

int cmd_swap_check(std::size_t trials, std::uint64_t seed) {
    auto res = run_swap_check(trials, seed);
    std::cout << "swap rule: " << res.trials - res.failures << "/" << res.trials << " exact";
    if (!res.passed()) std::cout << "; first failure " << res.first_failure;
    std::cout << "\n";
    return res.passed() ? 0 : kExitCheckFailed;
}

struct GenArgs {
    std::string task = "closure";
    std::string monoid = "z2";
    std::string accept;
    std::size_t r = 2;
    std::size_t len = 8;
    std::size_t min_len = 0;
    std::size_t count = 100;
    std::uint64_t seed = 1;
    double balance = 0.5;
    double tolerance = 0.1;
    std::string out;
};

int cmd_gen(const GenArgs& a) {
    Morphism h = load_morphism(a.monoid);
    GenParams p;
    p.task = parse_task(a.task);
    p.accept = parse_elements(a.accept);
    p.r = a.r;
    p.max_len = a.len;
    p.min_len = a.min_len ? a.min_len : a.len;
    p.balance = a.balance;
    p.tolerance = a.tolerance;
    auto data = gen_dataset(h, p, a.count, a.seed);
    write_jsonl(a.out, data);
    std::size_t pos = 0;
    for (const auto& e : data) pos += static_cast<std::size_t>(e.label);
    std::cout << "wrote " << data.size() << " " << to_string(p.task) << " examples (" << pos << " positive) to "
              << a.out << "\n";
    return 0;
}

int cmd_train(const std::string& config, const std::string& out_dir) {
    TrainConfig cfg = TrainConfig::load(config);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    auto res = train(cfg);
    std::printf("steps %zu  train_acc %.4f", res.steps_run, res.train_acc);
    if (res.eval_acc) std::printf("  eval_acc %.4f", *res.eval_acc);
    std::printf("  -> %s\n", cfg.out_dir.c_str());
    if (res.diverged) {
        std::cerr << "diverged: " << res.divergence << "\n";
        return kExitCheckFailed;
    }
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& backend, int p) {
    Model model = Model::load(model_path);
    auto data = read_jsonl(data_path);
    EvalOptions opts;
    if (backend == "floatp") {
        opts.backend = EvalBackend::FloatP;
        opts.precision = p;
    } else {
        require(backend == "real64", ErrorKind::InvalidArgument, "backend must be real64 or floatp");
    }
    const double acc = evaluate(model, data, opts);
    std::printf("accuracy %.6f on %zu examples (%s", acc, data.size(), backend.c_str());
    if (opts.backend == EvalBackend::FloatP) std::printf(", p=%d", p);
    std::printf(")\n");
    return 0;
}

int cmd_grad_check(const std::string& config, double h, double tol, std::size_t n, int label) {
    TrainConfig cfg;
    {
        std::ifstream is(config);
        require(static_cast<bool>(is), ErrorKind::DataFormatError, "cannot open " + config);
        auto j = nlohmann::json::parse(is, nullptr, false);
        require(!j.is_discarded(), ErrorKind::DataFormatError, config + ": invalid JSON");
        cfg.model = ModelConfig::from_json(j.value("model", nlohmann::json::object()));
        cfg.seed = j.value("seed", cfg.seed);
    }
    require(n >= 1 && n <= cfg.model.max_len, ErrorKind::ShapeMismatch, "n must be in [1, max_len]");
    Model model = Model::init(cfg.model, cfg.seed);
    std::mt19937_64 rng(splitmix64(cfg.seed));
    std::vector<std::uint32_t> tokens(n);
    for (auto& t : tokens) t = static_cast<std::uint32_t>(rng() % cfg.model.vocab);
    auto rep = grad_check(model, tokens, label, h, tol);
    std::cout << rep.render();
    return rep.passed() ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"talab: finite-precision tensor attention toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    int fp_p = 3;
    auto* fp = app.add_subcommand("fp-audit", "Exhaustive p-bit float oracle comparison");
    fp->add_option("--p", fp_p, "Precision (2..6)")->check(CLI::Range(2, 6));
    fp->callback([&] { rc = cmd_fp_audit(fp_p); });

    std::string component;
    std::size_t audit_m = 0;
    bool audit_csv = false;
    auto* da = app.add_subcommand("depth-audit", "Traced circuit depth versus the reference totals");
    da->add_option("--component", component,
                   "matmul|kron|col-kron|row-kron|plain-layer|rope-matrix|rope-layer|mlp|layernorm|tf|tf-plain");
    da->add_option("--m", audit_m, "Transformer layer count (default: 1, 2 and 3)");
    da->add_flag("--csv", audit_csv, "CSV output");
    da->callback([&] { rc = cmd_depth_audit(component, audit_m, audit_csv); });

    std::size_t trials = 1000;
    std::uint64_t swap_seed = 1;
    auto* sw = app.add_subcommand("swap-check", "Exact swap-rule identity trials");
    sw->add_option("--trials", trials);
    sw->add_option("--seed", swap_seed);
    sw->callback([&] { rc = cmd_swap_check(trials, swap_seed); });

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "Generate a labelled dataset (JSON lines)");
    gen->add_option("--task", ga.task, "closure|membership");
    gen->add_option("--monoid", ga.monoid, "z2|s3|s5 or a {size, table, identity} JSON file");
    gen->add_option("--accept", ga.accept, "Comma-separated accepted elements (default: the identity)");
    gen->add_option("--r", ga.r, "Chunk length bound");
    gen->add_option("--len", ga.len, "Maximum string length (closure) or |u|, |v| (membership)");
    gen->add_option("--min-len", ga.min_len, "Minimum length (default: --len)");
    gen->add_option("--count", ga.count);
    gen->add_option("--seed", ga.seed);
    gen->add_option("--balance", ga.balance, "Target positive fraction");
    gen->add_option("--tolerance", ga.tolerance, "Allowed deviation from the target fraction");
    gen->add_option("--out", ga.out)->required();
    gen->callback([&] { rc = cmd_gen(ga); });

    std::string train_config, train_out;
    auto* tr = app.add_subcommand("train", "Train a Real64 model from a JSON config");
    tr->add_option("--config", train_config)->required();
    tr->add_option("--out-dir", train_out, "Override the output directory");
    tr->callback([&] { rc = cmd_train(train_config, train_out); });

    std::string model_path, data_path, backend = "real64";
    int eval_p = 24;
    auto* ev = app.add_subcommand("eval", "Accuracy of a saved model on a dataset");
    ev->add_option("--model", model_path)->required();
    ev->add_option("--data", data_path)->required();
    ev->add_option("--backend", backend, "real64|floatp");
    ev->add_option("--precision", eval_p, "FloatP precision")->check(CLI::Range(2, 60));
    ev->callback([&] { rc = cmd_eval(model_path, data_path, backend, eval_p); });

    std::string gc_config;
    double gc_h = 1e-5, gc_tol = 1e-5;
    std::size_t gc_n = 3;
    int gc_label = 1;
    auto* gc = app.add_subcommand("grad-check", "Analytic gradients versus central differences");
    gc->set_help_flag("--help", "Print this help message and exit");  // frees --h for the step size
    gc->add_option("--config", gc_config)->required();
    gc->add_option("--h", gc_h);
    gc->add_option("--tol", gc_tol);
    gc->add_option("--n", gc_n, "Sequence length");
    gc->add_option("--label", gc_label)->check(CLI::Range(0, 1));
    gc->callback([&] { rc = cmd_grad_check(gc_config, gc_h, gc_tol, gc_n, gc_label); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const talab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return rc;
}
