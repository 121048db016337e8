#include "talab/probe.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "talab/error.hpp"

namespace talab {

namespace {

using Mat = Matrix<double>;

constexpr double kLayerNormEps = 1e-5;

// x (n x k) times w (k x m)
Mat mm(const Mat& x, const std::vector<double>& w, std::size_t m) {
    const std::size_t n = x.rows(), k = x.cols();
    Mat out(n, m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            const double a = x(i, t);
            for (std::size_t j = 0; j < m; ++j) out(i, j) += a * w[t * m + j];
        }
    return out;
}

// grad_w += x^T g ; dx += g w^T  (w is k x m)
void mm_backward(const Mat& x, const std::vector<double>& w, const Mat& g, std::vector<double>& grad_w, Mat& dx) {
    const std::size_t n = x.rows(), k = x.cols(), m = g.cols();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            double acc = 0.0;
            const double a = x(i, t);
            for (std::size_t j = 0; j < m; ++j) {
                grad_w[t * m + j] += a * g(i, j);
                acc += g(i, j) * w[t * m + j];
            }
            dx(i, t) += acc;
        }
}

bool has_mlp(GKind k) { return k == GKind::Mlp || k == GKind::MlpLayerNorm; }
bool has_norm(GKind k) { return k == GKind::LayerNorm || k == GKind::MlpLayerNorm; }

Mat block_forward(GKind kind, const Tensor* w, const Tensor* b, const Mat& x, BlockCache& c) {
    c.in = x;
    Mat cur = x;
    const std::size_t n = x.rows(), d = x.cols();
    if (has_mlp(kind)) {
        Mat y(n, d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += w->at(j, k) * x(i, k);
                y(i, j) = acc + b->w[j];
            }
        c.mlp_out = y;
        cur = std::move(y);
    }
    if (has_norm(kind)) {
        c.inv_std.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += cur(i, j);
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                cur(i, j) -= mean;
                var += cur(i, j) * cur(i, j);
            }
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            c.inv_std[i] = inv;
            for (std::size_t j = 0; j < d; ++j) cur(i, j) *= inv;
        }
    }
    c.out = cur;
    return cur;
}

Mat block_backward(GKind kind, const Tensor* w, const BlockCache& c, Mat g, std::vector<double>* dw,
                   std::vector<double>* db) {
    const std::size_t n = c.in.rows(), d = c.in.cols();
    if (has_norm(kind)) {
        for (std::size_t i = 0; i < n; ++i) {
            double mg = 0.0, mgy = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                mg += g(i, j);
                mgy += g(i, j) * c.out(i, j);
            }
            mg /= static_cast<double>(d);
            mgy /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) g(i, j) = c.inv_std[i] * (g(i, j) - mg - c.out(i, j) * mgy);
        }
    }
    if (has_mlp(kind)) {
        Mat dx(n, d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double gij = g(i, j);
                (*db)[j] += gij;
                for (std::size_t k = 0; k < d; ++k) {
                    (*dw)[j * d + k] += gij * c.in(i, k);
                    dx(i, k) += gij * w->at(j, k);
                }
            }
        return dx;
    }
    return g;
}

struct Rotations {
    std::size_t n = 0;
    std::vector<double> cos, sin;  // (offset + n - 1) * half + f

    Rotations(std::size_t n_, const ThetaSchedule& sched) : n(n_) {
        const std::size_t half = sched.thetas.size();
        cos.resize((2 * n - 1) * half);
        sin.resize((2 * n - 1) * half);
        for (std::size_t o = 0; o < 2 * n - 1; ++o) {
            const double off = static_cast<double>(o) - static_cast<double>(n - 1);
            for (std::size_t f = 0; f < half; ++f) {
                const double angle = off * sched.thetas[f];
                cos[o * half + f] = std::cos(angle);
                sin[o * half + f] = std::sin(angle);
            }
        }
    }

    // out = R_{a-b} v  (transpose = true applies R^T)
    void apply(std::size_t a, std::size_t b, const double* v, double* out, std::size_t d, bool transpose) const {
        const std::size_t half = d / 2;
        const std::size_t o = a + n - 1 - b;
        for (std::size_t f = 0; f < half; ++f) {
            const double c = cos[o * half + f];
            const double s = transpose ? -sin[o * half + f] : sin[o * half + f];
            const double x0 = v[2 * f], x1 = v[2 * f + 1];
            out[2 * f] = c * x0 - s * x1;
            out[2 * f + 1] = s * x0 + c * x1;
        }
    }
};

Mat attention_forward(const Model& model, const ParamLayout::Layer& l, const ThetaSchedule& sched, const Mat& h,
                      LayerCache& c) {
    const auto& P = model.params();
    const std::size_t n = h.rows(), d = h.cols(), nn = n * n;
    const bool rope = model.config().kind == LayerKind::Rope;
    c.in = h;
    c.q = mm(h, P[l.w_q].w, d);
    c.k1 = mm(h, P[l.w_k1].w, d);
    c.k2 = mm(h, P[l.w_k2].w, d);
    c.v1 = mm(h, P[l.w_v1].w, d);
    c.v2 = mm(h, P[l.w_v2].w, d);

    c.values = Mat(nn, d, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t j = 0; j < d; ++j) c.values(a + b * n, j) = c.v1(a, j) * c.v2(b, j);

    Mat logits(n, nn, 0.0);
    if (!rope) {
        c.keys = Mat(nn, d, 0.0);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t j = 0; j < d; ++j) c.keys(a + b * n, j) = c.k1(a, j) * c.k2(b, j);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t col = 0; col < nn; ++col) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += c.q(i, j) * c.keys(col, j);
                logits(i, col) = acc / static_cast<double>(d);
            }
    } else {
        Rotations rot(n, sched);
        c.k1_rot = Mat(nn, d, 0.0);
        c.k2_rot = Mat(nn, d, 0.0);
        for (std::size_t j1 = 0; j1 < n; ++j1)
            for (std::size_t j = 0; j < n; ++j) {
                rot.apply(j1, j, &c.k1.data()[j * d], &c.k1_rot.data()[(j1 * n + j) * d], d, false);
                rot.apply(j1, j, &c.k2.data()[j * d], &c.k2_rot.data()[(j1 * n + j) * d], d, false);
            }
        for (std::size_t j1 = 0; j1 < n; ++j1)
            for (std::size_t j3 = 0; j3 < n; ++j3)
                for (std::size_t j2 = 0; j2 < n; ++j2) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < d; ++i)
                        acc += c.q(j1, i) * c.k1_rot(j1 * n + j2, i) * c.k2_rot(j1 * n + j3, i);
                    logits(j1, j2 + n * j3) = acc / static_cast<double>(d);
                }
    }

    c.probs = Mat(n, nn, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t col = 0; col < nn; ++col) {
            const double z = logits(i, col);
            if (!(std::fabs(z) <= kMaxLogit))
                fail(ErrorKind::RangeError, "attention logit " + std::to_string(z) + " outside [-64, 64]");
            mx = std::max(mx, z);
        }
        double sum = 0.0;
        for (std::size_t col = 0; col < nn; ++col) sum += (c.probs(i, col) = std::exp(logits(i, col) - mx));
        for (std::size_t col = 0; col < nn; ++col) c.probs(i, col) /= sum;
    }

    c.out = Mat(n, d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t col = 0; col < nn; ++col) {
            const double p = c.probs(i, col);
            for (std::size_t j = 0; j < d; ++j) c.out(i, j) += p * c.values(col, j);
        }
    return c.out;
}

Mat attention_backward(const Model& model, const ParamLayout::Layer& l, const ThetaSchedule& sched,
                       const LayerCache& c, const Mat& dout, Gradients& grads) {
    const auto& P = model.params();
    const std::size_t n = c.in.rows(), d = c.in.cols(), nn = n * n;
    const bool rope = model.config().kind == LayerKind::Rope;

    Mat dvalues(nn, d, 0.0);
    Mat g(n, nn, 0.0);  // d loss / d logit
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t col = 0; col < nn; ++col) {
            double dp = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                dp += dout(i, j) * c.values(col, j);
                dvalues(col, j) += c.probs(i, col) * dout(i, j);
            }
            g(i, col) = dp;
            dot += c.probs(i, col) * dp;
        }
        for (std::size_t col = 0; col < nn; ++col)
            g(i, col) = c.probs(i, col) * (g(i, col) - dot) / static_cast<double>(d);
    }

    Mat dq(n, d, 0.0), dk1(n, d, 0.0), dk2(n, d, 0.0), dv1(n, d, 0.0), dv2(n, d, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t j = 0; j < d; ++j) {
                const double gv = dvalues(a + b * n, j);
                dv1(a, j) += gv * c.v2(b, j);
                dv2(b, j) += gv * c.v1(a, j);
            }

    if (!rope) {
        Mat dkeys(nn, d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t col = 0; col < nn; ++col) {
                const double gi = g(i, col);
                for (std::size_t j = 0; j < d; ++j) {
                    dq(i, j) += gi * c.keys(col, j);
                    dkeys(col, j) += gi * c.q(i, j);
                }
            }
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t j = 0; j < d; ++j) {
                    const double gk = dkeys(a + b * n, j);
                    dk1(a, j) += gk * c.k2(b, j);
                    dk2(b, j) += gk * c.k1(a, j);
                }
    } else {
        Mat dk1r(nn, d, 0.0), dk2r(nn, d, 0.0);
        for (std::size_t j1 = 0; j1 < n; ++j1)
            for (std::size_t j3 = 0; j3 < n; ++j3)
                for (std::size_t j2 = 0; j2 < n; ++j2) {
                    const double gg = g(j1, j2 + n * j3);
                    for (std::size_t i = 0; i < d; ++i) {
                        const double t1 = c.k1_rot(j1 * n + j2, i);
                        const double t2 = c.k2_rot(j1 * n + j3, i);
                        dq(j1, i) += gg * t1 * t2;
                        dk1r(j1 * n + j2, i) += gg * c.q(j1, i) * t2;
                        dk2r(j1 * n + j3, i) += gg * c.q(j1, i) * t1;
                    }
                }
        Rotations rot(n, sched);
        std::vector<double> tmp(d);
        for (std::size_t j1 = 0; j1 < n; ++j1)
            for (std::size_t j = 0; j < n; ++j) {
                rot.apply(j1, j, &dk1r.data()[(j1 * n + j) * d], tmp.data(), d, true);
                for (std::size_t i = 0; i < d; ++i) dk1(j, i) += tmp[i];
                rot.apply(j1, j, &dk2r.data()[(j1 * n + j) * d], tmp.data(), d, true);
                for (std::size_t i = 0; i < d; ++i) dk2(j, i) += tmp[i];
            }
    }

    Mat dh(n, d, 0.0);
    mm_backward(c.in, P[l.w_q].w, dq, grads[l.w_q], dh);
    mm_backward(c.in, P[l.w_k1].w, dk1, grads[l.w_k1], dh);
    mm_backward(c.in, P[l.w_k2].w, dk2, grads[l.w_k2], dh);
    mm_backward(c.in, P[l.w_v1].w, dv1, grads[l.w_v1], dh);
    mm_backward(c.in, P[l.w_v2].w, dv2, grads[l.w_v2], dh);
    return dh;
}

const Tensor* tensor_or_null(const Model& m, std::size_t i) { return i == kNoParam ? nullptr : &m.param(i); }

ThetaSchedule schedule_for(const Model& model) {
    const auto& cfg = model.config();
    return cfg.kind == LayerKind::Rope ? theta_schedule(cfg.d, cfg.theta_base) : ThetaSchedule{};
}

}  // namespace

Logits classify_forward(const Model& model, const std::vector<std::uint32_t>& tokens, ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    const auto& cfg = model.config();
    const auto& lay = model.layout();
    const ThetaSchedule sched = schedule_for(model);

    c.tokens = tokens;
    c.x = model.embed(tokens);
    Mat h = block_forward(cfg.g0, tensor_or_null(model, lay.g0.w), tensor_or_null(model, lay.g0.b), c.x, c.g0);
    c.layers.assign(lay.layers.size(), LayerCache{});
    for (std::size_t i = 0; i < lay.layers.size(); ++i) {
        const auto& l = lay.layers[i];
        h = attention_forward(model, l, sched, h, c.layers[i]);
        h = block_forward(cfg.g, tensor_or_null(model, l.g.w), tensor_or_null(model, l.g.b), h, c.layers[i].g);
    }
    const Tensor& rw = model.param(lay.readout_w);
    const Tensor& rb = model.param(lay.readout_b);
    const std::size_t last = h.rows() - 1;
    for (std::size_t k = 0; k < 2; ++k) {
        double acc = rb.w[k];
        for (std::size_t j = 0; j < cfg.d; ++j) acc += rw.at(k, j) * h(last, j);
        c.logits[k] = acc;
    }
    return c.logits;
}

double cross_entropy(const Logits& z, int label) {
    require(label == 0 || label == 1, ErrorKind::InvalidArgument, "label must be 0 or 1");
    const double m = std::max(z[0], z[1]);
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    return lse - z[static_cast<std::size_t>(label)];
}

Gradients backward(const Model& model, const ForwardCache& c, int label) {
    require(label == 0 || label == 1, ErrorKind::InvalidArgument, "label must be 0 or 1");
    const auto& cfg = model.config();
    const auto& lay = model.layout();
    const ThetaSchedule sched = schedule_for(model);
    Gradients grads = model.zero_gradients();

    const std::size_t n = c.x.rows(), d = cfg.d;
    const Mat& h = c.layers.empty() ? c.g0.out : c.layers.back().g.out;
    const double m = std::max(c.logits[0], c.logits[1]);
    const double e0 = std::exp(c.logits[0] - m), e1 = std::exp(c.logits[1] - m);
    std::array<double, 2> dz{e0 / (e0 + e1), e1 / (e0 + e1)};
    dz[static_cast<std::size_t>(label)] -= 1.0;

    const Tensor& rw = model.param(lay.readout_w);
    Mat dh(n, d, 0.0);
    for (std::size_t k = 0; k < 2; ++k) {
        grads[lay.readout_b][k] += dz[k];
        for (std::size_t j = 0; j < d; ++j) {
            grads[lay.readout_w][k * d + j] += dz[k] * h(n - 1, j);
            dh(n - 1, j) += dz[k] * rw.at(k, j);
        }
    }

    auto grad_ptr = [&](std::size_t i) { return i == kNoParam ? nullptr : &grads[i]; };
    for (std::size_t li = lay.layers.size(); li-- > 0;) {
        const auto& l = lay.layers[li];
        const auto& lc = c.layers[li];
        dh = block_backward(cfg.g, tensor_or_null(model, l.g.w), lc.g, std::move(dh), grad_ptr(l.g.w),
                            grad_ptr(l.g.b));
        dh = attention_backward(model, l, sched, lc, dh, grads);
    }
    dh = block_backward(cfg.g0, tensor_or_null(model, lay.g0.w), c.g0, std::move(dh), grad_ptr(lay.g0.w),
                        grad_ptr(lay.g0.b));

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            grads[lay.embedding][c.tokens[i] * d + j] += dh(i, j);
            if (lay.position != kNoParam) grads[lay.position][i * d + j] += dh(i, j);
        }
    return grads;
}

std::string GradCheckReport::render() const {
    std::ostringstream os;
    std::size_t w = 9;
    for (const auto& l : lines) w = std::max(w, l.name.size());
    os << std::left << std::setw(static_cast<int>(w) + 2) << "parameter" << std::setw(9) << "entries"
       << "max_rel_error\n";
    for (const auto& l : lines)
        os << std::left << std::setw(static_cast<int>(w) + 2) << l.name << std::setw(9) << l.entries
           << std::scientific << std::setprecision(3) << l.max_rel_error << std::defaultfloat << "\n";
    os << "max " << std::scientific << std::setprecision(3) << max_rel_error << " tolerance " << tolerance << " -> "
       << (passed() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

GradCheckReport grad_check(const Model& model, const std::vector<std::uint32_t>& tokens, int label, double h,
                           double tolerance) {
    require(h > 0.0, ErrorKind::InvalidArgument, "step h must be positive");
    ForwardCache cache;
    classify_forward(model, tokens, &cache);
    const Gradients analytic = backward(model, cache, label);

    GradCheckReport rep;
    rep.tolerance = tolerance;
    Model probe = model;
    for (std::size_t t = 0; t < probe.params().size(); ++t) {
        GradCheckLine line;
        line.name = probe.params()[t].name;
        auto& w = probe.params()[t].w;
        line.entries = w.size();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            const double central = central_difference(
                [&](double v) {
                    w[i] = v;
                    return cross_entropy(classify_forward(probe, tokens), label);
                },
                saved, h);
            w[i] = saved;
            const double err = std::fabs(analytic[t][i] - central) / std::max(1.0, std::fabs(central));
            line.max_rel_error = std::max(line.max_rel_error, err);
        }
        rep.max_rel_error = std::max(rep.max_rel_error, line.max_rel_error);
        rep.lines.push_back(line);
    }
    return rep;
}

int predict(const Model& model, const std::vector<std::uint32_t>& tokens, const EvalOptions& opts) {
    if (opts.backend == EvalBackend::Real64) {
        auto z = classify_forward(model, tokens);
        return z[1] > z[0] ? 1 : 0;
    }
    FloatBackend be(opts.precision);
    const auto& lay = model.layout();
    auto h = tf_forward(be, lift(be, model.embed(tokens)), lift(be, model.transformer()));
    auto rw = lift(be, model.param(lay.readout_w).matrix());
    auto rb = lift(be, model.param(lay.readout_b).matrix());
    auto z = matmul(be, h.row(h.rows() - 1), rw.transposed());
    const FloatP z0 = be.add(z(0, 0), rb(0, 0));
    const FloatP z1 = be.add(z(0, 1), rb(0, 1));
    return compare(z1, z0) == std::strong_ordering::greater ? 1 : 0;
}

double evaluate(const Model& model, const std::vector<Example>& data, const EvalOptions& opts) {
    require(!data.empty(), ErrorKind::EmptyDataset, "cannot evaluate on an empty dataset");
    std::size_t correct = 0;
    for (const auto& ex : data) correct += predict(model, ex.tokens, opts) == ex.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double dataset_loss(const Model& model, const std::vector<Example>& data) {
    require(!data.empty(), ErrorKind::EmptyDataset, "cannot score an empty dataset");
    double total = 0.0;
    for (const auto& ex : data) total += cross_entropy(classify_forward(model, ex.tokens), ex.label);
    return total / static_cast<double>(data.size());
}

}  // namespace talab
