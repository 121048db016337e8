#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "talab/audit.hpp"
#include "talab/fp_audit.hpp"
#include "talab/hardlang.hpp"
#include "talab/probe.hpp"
#include "talab/swap_check.hpp"

namespace py = pybind11;
using namespace talab;

namespace {

using Rows = std::vector<std::vector<double>>;

Matrix<double> to_matrix(const Rows& rows) { return Matrix<double>::from_rows(rows); }

Rows to_rows(const Matrix<double>& m) {
    Rows out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

// Python ints, fractions.Fraction and "a/b" strings all become exact rationals.
ExactRational to_rational(const py::handle& v) {
    if (py::isinstance<py::str>(v)) return parse_rational(v.cast<std::string>());
    if (py::isinstance<py::int_>(v)) return parse_rational(py::str(py::handle(v)).cast<std::string>());
    if (py::hasattr(v, "numerator") && py::hasattr(v, "denominator"))
        return parse_rational(py::str(v.attr("numerator")).cast<std::string>() + "/" +
                              py::str(v.attr("denominator")).cast<std::string>());
    return rational_from_double(v.cast<double>());
}

py::object to_fraction(const ExactRational& q) {
    return py::module_::import("fractions").attr("Fraction")(to_string(q));
}

py::dict example_dict(const Example& e) {
    return py::module_::import("json").attr("loads")(example_to_json(e).dump());
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

AttnParams<double> attn_params(const py::dict& w) {
    return {to_matrix(w["w_q"].cast<Rows>()), to_matrix(w["w_k1"].cast<Rows>()), to_matrix(w["w_k2"].cast<Rows>()),
            to_matrix(w["w_v1"].cast<Rows>()), to_matrix(w["w_v2"].cast<Rows>())};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Finite-precision tensor attention toolkit";

    static py::exception<Error> error(m, "TalabError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetObject(error.ptr(), py::make_tuple(e.what(), to_string(e.kind())).ptr());
        }
    });

    // Floats -----------------------------------------------------------------
    py::class_<FloatP>(m, "FloatP", "A p-bit float <r, k> with value r * 2^k")
        .def(py::init(&FloatP::make), py::arg("r"), py::arg("k"), py::arg("p"))
        .def_static("zero", &FloatP::zero, py::arg("p"))
        .def_static("round", [](const py::object& v, int p) { return round_p(to_rational(v), p); }, py::arg("value"),
                    py::arg("p"), "Nearest p-bit float, ties to the even significand")
        .def_property_readonly("significand", &FloatP::significand)
        .def_property_readonly("exponent", &FloatP::exponent)
        .def_property_readonly("precision", &FloatP::precision)
        .def_property_readonly("value", [](const FloatP& x) { return to_fraction(x.value()); })
        .def("__float__", &FloatP::to_double)
        .def("__repr__", &FloatP::debug_string)
        .def("__eq__", [](const FloatP& a, const FloatP& b) { return a == b; })
        .def("__hash__", [](const FloatP& a) { return py::hash(py::make_tuple(a.significand(), a.exponent(), a.precision())); })
        .def("__add__", [](const FloatP& a, const FloatP& b) { return add(a, b); })
        .def("__sub__", [](const FloatP& a, const FloatP& b) { return sub(a, b); })
        .def("__mul__", [](const FloatP& a, const FloatP& b) { return mul(a, b); })
        .def("__truediv__", [](const FloatP& a, const FloatP& b) { return div(a, b); })
        .def("__neg__", [](const FloatP& a) { return neg(a); })
        .def("__lt__", [](const FloatP& a, const FloatP& b) { return compare(a, b) < 0; })
        .def("__le__", [](const FloatP& a, const FloatP& b) { return less_equal(a, b); });

    m.def("int_div_special", [](const py::object& x, const py::object& y) {
        auto big = [](const py::object& v) { return BigInt(py::str(py::handle(v)).cast<std::string>()); };
        return to_fraction(int_div_special(big(x), big(y)));
    }, "Literal integer quotient used by add and div, as a Fraction");
    m.def("compare", [](const FloatP& a, const FloatP& b) {
        const auto c = compare(a, b);
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
    });
    m.def("floor", [](const FloatP& a) { return talab::floor(a); });
    m.def("iter_add", [](const std::vector<FloatP>& xs) { return iter_add(std::span<const FloatP>(xs)); });
    m.def("iter_mul", [](const std::vector<FloatP>& xs) { return iter_mul(std::span<const FloatP>(xs)); });
    m.def("exp_approx", [](const FloatP& x) { return exp_approx(x); });
    m.def("sqrt_approx", &sqrt_approx);
    m.def("sin_cos", &sin_cos_floatp, "(sin x, cos x) rounded to the precision of x");
    m.def("from_double", &from_double, py::arg("value"), py::arg("p"));
    m.def("fp_audit", [](int p) {
        auto rep = run_fp_audit(p);
        return py::make_tuple(rep.passed(), rep.render());
    }, py::arg("p") = 3, "Exhaustive operand-pair audit; returns (passed, report)");

    // Depth ------------------------------------------------------------------
    m.def("audit", [](const std::string& component, std::size_t n, std::size_t d, std::size_t layers, bool staged) {
        return audit(parse_component(component), {n, d, layers}, staged).to_string(true);
    }, py::arg("component"), py::arg("n") = 2, py::arg("d") = 2, py::arg("m") = 1, py::arg("staged") = true);
    m.def("reference_depth", [](const std::string& component, std::size_t layers) {
        return reference_depth(parse_component(component), layers).to_string(true);
    }, py::arg("component"), py::arg("m") = 1);
    m.def("depth_audit_csv", [](const std::vector<std::size_t>& ms) {
        return render_audit_csv(run_depth_audit(std::nullopt, ms));
    }, py::arg("ms") = std::vector<std::size_t>{1, 2, 3});

    m.def("swap_check", [](std::size_t trials, std::uint64_t seed) {
        auto r = run_swap_check(trials, seed);
        return py::make_tuple(r.trials, r.failures);
    }, py::arg("trials") = 1000, py::arg("seed") = 1, "Returns (trials, failures)");

    // Attention (Real64) -----------------------------------------------------
    m.def("attention_layer", [](const Rows& x, const py::dict& weights, const std::string& kind, double theta_base) {
        LayerSpec<double> spec;
        spec.kind = parse_layer_kind(kind);
        spec.attn = attn_params(weights);
        auto xm = to_matrix(x);
        ThetaSchedule sched;
        if (spec.kind == LayerKind::Rope) sched = theta_schedule(xm.cols(), theta_base);
        return to_rows(attn_layer(RealBackend{}, xm, spec, sched));
    }, py::arg("x"), py::arg("weights"), py::arg("kind") = "plain", py::arg("theta_base") = kDefaultThetaBase,
       "weights: dict with w_q, w_k1, w_k2, w_v1, w_v2 as d x d nested lists");
    m.def("layer_norm", [](const Rows& x) { return to_rows(layer_norm(RealBackend{}, to_matrix(x))); });
    m.def("theta_schedule", [](std::size_t d, double base) { return theta_schedule(d, base).thetas; }, py::arg("d"),
          py::arg("base") = kDefaultThetaBase);

    // Languages --------------------------------------------------------------
    m.def("builtin_monoids", &builtin_names);
    m.def("monoid_size", [](const std::string& name) { return load_morphism(name).target.size(); });
    m.def("monoid_eval", [](const std::string& name, const std::string& word) {
        auto h = load_morphism(name);
        return monoid_eval(h, h.parse(word));
    }, py::arg("monoid"), py::arg("word"));
    m.def("closure_decide", [](const std::string& name, const std::set<Element>& accept, std::size_t r,
                               const std::string& word, bool brute) {
        auto h = load_morphism(name);
        ClosureInstance inst{h, accept, r, h.parse(word)};
        return brute ? closure_brute(inst) : closure_decide(inst);
    }, py::arg("monoid"), py::arg("accept"), py::arg("r"), py::arg("word"), py::arg("brute") = false);
    m.def("linked_pairs", [](const std::string& name, const std::string& u, const std::string& v) {
        auto h = load_morphism(name);
        return omega_pairs(h, h.parse(u), h.parse(v));
    }, py::arg("monoid"), py::arg("u"), py::arg("v"));
    m.def("membership_decide", [](const std::string& name, const std::set<LinkedPair>& accept, const std::string& u,
                                  const std::string& v) {
        auto h = load_morphism(name);
        return membership_decide({h, accept, h.parse(u), h.parse(v)});
    }, py::arg("monoid"), py::arg("accept"), py::arg("u"), py::arg("v"));
    m.def("gen_dataset", [](const std::string& task, const std::string& name, const std::set<Element>& accept,
                            std::size_t r, std::size_t min_len, std::size_t max_len, std::size_t count,
                            std::uint64_t seed, double balance, double tolerance) {
        GenParams p;
        p.task = parse_task(task);
        p.accept = accept;
        p.r = r;
        p.min_len = min_len;
        p.max_len = max_len;
        p.balance = balance;
        p.tolerance = tolerance;
        py::list out;
        for (const auto& e : gen_dataset(load_morphism(name), p, count, seed)) out.append(example_dict(e));
        return out;
    }, py::arg("task") = "closure", py::arg("monoid") = "z2", py::arg("accept") = std::set<Element>{},
       py::arg("r") = 2, py::arg("min_len") = 1, py::arg("max_len") = 8, py::arg("count") = 100, py::arg("seed") = 1,
       py::arg("balance") = 0.5, py::arg("tolerance") = 0.1);

    // Probe ------------------------------------------------------------------
    py::class_<Model>(m, "Model")
        .def_static("init", [](const py::object& cfg, std::uint64_t seed) {
            return Model::init(ModelConfig::from_json(py_to_json(cfg)), seed);
        }, py::arg("config"), py::arg("seed") = 1)
        .def_static("load", &Model::load)
        .def_static("from_json", [](const std::string& s) { return Model::from_json(nlohmann::json::parse(s)); })
        .def("save", &Model::save)
        .def("to_json", [](const Model& mdl) { return mdl.to_json().dump(); })
        .def_property_readonly("config", [](const Model& mdl) { return json_to_py(mdl.config().to_json()); })
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def("logits", [](const Model& mdl, const std::vector<std::uint32_t>& tokens) {
            auto z = classify_forward(mdl, tokens);
            return py::make_tuple(z[0], z[1]);
        })
        .def("predict", [](const Model& mdl, const std::vector<std::uint32_t>& tokens, const std::string& backend,
                           int precision) {
            EvalOptions o;
            if (backend == "floatp") o.backend = EvalBackend::FloatP;
            o.precision = precision;
            return predict(mdl, tokens, o);
        }, py::arg("tokens"), py::arg("backend") = "real64", py::arg("precision") = 24)
        .def("grad_check", [](const Model& mdl, const std::vector<std::uint32_t>& tokens, int label, double h,
                              double tol) {
            auto rep = grad_check(mdl, tokens, label, h, tol);
            py::dict per;
            for (const auto& l : rep.lines) per[py::str(l.name)] = l.max_rel_error;
            return py::make_tuple(rep.passed(), rep.max_rel_error, per);
        }, py::arg("tokens"), py::arg("label"), py::arg("h") = 1e-5, py::arg("tol") = 1e-5,
           "Returns (passed, max_rel_error, per-tensor errors)");

    m.def("evaluate", [](const Model& mdl, const std::string& data_path, const std::string& backend, int precision) {
        EvalOptions o;
        if (backend == "floatp") o.backend = EvalBackend::FloatP;
        o.precision = precision;
        return evaluate(mdl, read_jsonl(data_path), o);
    }, py::arg("model"), py::arg("data"), py::arg("backend") = "real64", py::arg("precision") = 24);
    m.def("train", [](const std::string& config_path) {
        auto res = train(TrainConfig::load(config_path));
        py::dict out;
        out["steps_run"] = res.steps_run;
        out["train_acc"] = res.train_acc;
        out["eval_acc"] = res.eval_acc ? py::object(py::float_(*res.eval_acc)) : py::none();
        out["diverged"] = res.diverged;
        out["metrics_csv"] = metrics_csv(res.rows);
        return out;
    }, py::arg("config"), "Runs `talab train` in process; writes metrics.csv, model.json and summary.json");
}
