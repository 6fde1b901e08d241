#include "pakan/kan.hpp"

#include <cmath>

#include "pakan/error.hpp"

namespace pakan {

namespace {

Tensor uniform_tensor(Shape dims, double bound, Rng& rng) {
    Tensor t(std::move(dims));
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

void check_input(const Var& f, const KanLayerConfig& cfg, const char* op) {
    if (f.dims().size() != 4 || f.dim(1) != cfg.c_in) {
        throw ShapeError(std::string(op) + ": expected input [B," + std::to_string(cfg.c_in) + ",H,W], got " +
                         shape_str(f.dims()));
    }
}

Var ones_like(const Var& f) { return Var::constant(Tensor::ones(f.dims())); }

Var mix_edges(const Var& per_channel, const EdgeMixWeights& edges) { return conv2d(per_channel, edges.scales, Var(), 0); }

// Cubic fast path. Coefficients are per pixel ([B,K,H,W], stride plane) or
// per channel ([B,C*K,1,1], stride 1).
template <bool PerPixel>
void cubic_contract_fwd(const double* t, const double* w, double* out, std::size_t batch, std::size_t c,
                        std::size_t plane, std::size_t k, std::size_t grid) {
    const std::size_t st = PerPixel ? plane : 1;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i0 = (b * c + ch) * plane;
            const double* wb = w + (PerPixel ? b * k * plane : (b * c + ch) * k);
            for (std::size_t p = 0; p < plane; ++p) {
                const auto cs = cubic_support(t[i0 + p], grid);
                const double* wp = wb + (PerPixel ? p : 0) + cs.first * st;
                out[i0 + p] = wp[0] * cs.value[0] + wp[st] * cs.value[1] + wp[2 * st] * cs.value[2] + wp[3 * st] * cs.value[3];
            }
        }
}

template <bool PerPixel>
void cubic_contract_bwd(const double* t, const double* w, const double* g, double* gt, double* gw, std::size_t batch,
                        std::size_t c, std::size_t plane, std::size_t k, std::size_t grid) {
    const std::size_t st = PerPixel ? plane : 1;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i0 = (b * c + ch) * plane;
            const std::size_t o = PerPixel ? b * k * plane : (b * c + ch) * k;
            for (std::size_t p = 0; p < plane; ++p) {
                const auto cs = cubic_support(t[i0 + p], grid);
                const std::size_t o0 = o + (PerPixel ? p : 0) + cs.first * st;
                const double gv = g[i0 + p];
                const double* wp = w + o0;
                double* gp = gw + o0;
                gt[i0 + p] = gv * (wp[0] * cs.grad[0] + wp[st] * cs.grad[1] + wp[2 * st] * cs.grad[2] + wp[3 * st] * cs.grad[3]);
                gp[0] += gv * cs.value[0];
                gp[st] += gv * cs.value[1];
                gp[2 * st] += gv * cs.value[2];
                gp[3 * st] += gv * cs.value[3];
            }
        }
}

// Gated tanh: every feature is t/K, so the contraction is t * mean_j(w_j).
template <bool PerPixel>
void gated_contract(const double* t, const double* w, const double* g, double* out, double* gt, double* gw,
                    std::size_t batch, std::size_t c, std::size_t plane, std::size_t k) {
    const std::size_t st = PerPixel ? plane : 1;
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i0 = (b * c + ch) * plane;
            const std::size_t o = PerPixel ? b * k * plane : (b * c + ch) * k;
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t o0 = o + (PerPixel ? p : 0);
                if (!g) {
                    double ws = 0.0;
                    for (std::size_t j = 0; j < k; ++j) ws += w[o0 + j * st];
                    out[i0 + p] = t[i0 + p] * ws * inv_k;
                    continue;
                }
                const double gv = g[i0 + p];
                double ws = 0.0;
                for (std::size_t j = 0; j < k; ++j) ws += w[o0 + j * st];
                gt[i0 + p] = gv * ws * inv_k;
                const double d = gv * t[i0 + p] * inv_k;
                for (std::size_t j = 0; j < k; ++j) gw[o0 + j * st] += d;
            }
        }
}

}  // namespace

KanLayerConfig KanLayerConfig::one_to_one(std::size_t channels, SplineBasisSpec basis) {
    return {channels, channels, basis, OperatorMode::one_to_one};
}

KanLayerConfig KanLayerConfig::two_to_one(std::size_t out_channels, SplineBasisSpec basis) {
    return {2 * out_channels, out_channels, basis, OperatorMode::two_to_one};
}

void KanLayerConfig::validate() const {
    basis.validate();
    if (c_in == 0 || c_out == 0) throw ConfigError("KAN layer widths must be positive");
    if (mode == OperatorMode::one_to_one && c_in != c_out) {
        throw ConfigError("one_to_one mode needs c_in == c_out, got " + std::to_string(c_in) + " -> " +
                          std::to_string(c_out));
    }
    if (mode == OperatorMode::two_to_one && c_in != 2 * c_out) {
        throw ConfigError("two_to_one mode needs c_in == 2*c_out, got " + std::to_string(c_in) + " -> " +
                          std::to_string(c_out));
    }
}

StaticKanWeights make_static_kan(ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t k = cfg.num_basis();
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.c_in * k));
    return {store.add(prefix + ".coef", uniform_tensor({cfg.c_out, cfg.c_in, k}, bound, rng))};
}

Var static_kan_forward(const Var& u, const Var& weights, const KanLayerConfig& cfg) {
    cfg.validate();
    check_input(u, cfg, "static_kan_forward");
    const std::size_t k = cfg.num_basis();
    if (weights.dims() != Shape{cfg.c_out, cfg.c_in, k}) {
        throw ShapeError("static_kan_forward: weights must be " + shape_str({cfg.c_out, cfg.c_in, k}) + ", got " +
                         shape_str(weights.dims()));
    }
    Var stack = basis_stack(tanh(u), cfg.basis);
    return conv2d(stack, reshape(weights, {cfg.c_out, cfg.c_in * k, 1, 1}), Var(), 0);
}

std::size_t static_kan_param_count(const KanLayerConfig& cfg) { return cfg.c_out * cfg.c_in * cfg.num_basis(); }

std::size_t generator2d_param_count(std::size_t c_in, std::size_t k, std::size_t hidden) {
    if (hidden == 0) return c_in * k + k;
    return c_in * hidden + hidden + hidden * k + k;
}

std::size_t generator1d_param_count(std::size_t c_in, std::size_t k, std::size_t hidden) {
    if (hidden == 0) return 2 * c_in * k;
    return c_in * hidden + hidden + hidden * c_in * k + c_in * k;
}

std::size_t adaptive_kan2d_param_count(const KanLayerConfig& cfg, std::size_t hidden) {
    return cfg.c_out * cfg.c_in + generator2d_param_count(cfg.c_in, cfg.num_basis(), hidden);
}

std::size_t adaptive_kan1d_param_count(const KanLayerConfig& cfg, std::size_t hidden) {
    return cfg.c_out * cfg.c_in + generator1d_param_count(cfg.c_in, cfg.num_basis(), hidden);
}

AdaptiveKan2D make_adaptive_kan2d(ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg,
                                  const GeneratorOptions& gen, Activation act, Rng& rng) {
    cfg.validate();
    const std::size_t k = cfg.num_basis();
    AdaptiveKan2D op{cfg, act, {}, {}};
    op.edges.scales = store.add(prefix + ".edge", uniform_tensor({cfg.c_out, cfg.c_in, 1, 1},
                                                                 1.0 / std::sqrt(static_cast<double>(cfg.c_in * k)), rng));
    op.gen.options = gen;
    std::size_t width = cfg.c_in;
    if (gen.hidden > 0) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.c_in));
        op.gen.hidden_weight = store.add(prefix + ".gen.hidden.weight", uniform_tensor({gen.hidden, cfg.c_in, 1, 1}, bound, rng));
        op.gen.hidden_bias = store.add(prefix + ".gen.hidden.bias", uniform_tensor({gen.hidden}, bound, rng));
        width = gen.hidden;
    }
    op.gen.weight = store.add(prefix + ".gen.weight", Tensor::zeros({k, width, 1, 1}));
    op.gen.bias = store.add(prefix + ".gen.bias", Tensor::zeros({k}));
    return op;
}

AdaptiveKan1D make_adaptive_kan1d(ParamStore& store, const std::string& prefix, const KanLayerConfig& cfg,
                                  const GeneratorOptions& gen, Activation act, Rng& rng) {
    cfg.validate();
    const std::size_t k = cfg.num_basis();
    AdaptiveKan1D op{cfg, act, {}, {}};
    op.edges.scales = store.add(prefix + ".edge", uniform_tensor({cfg.c_out, cfg.c_in, 1, 1},
                                                                 1.0 / std::sqrt(static_cast<double>(cfg.c_in * k)), rng));
    op.gen.options = gen;
    op.gen.channels = cfg.c_in;
    op.gen.num_basis = k;
    if (gen.hidden > 0) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.c_in));
        op.gen.hidden_weight = store.add(prefix + ".gen.hidden.weight", uniform_tensor({gen.hidden, cfg.c_in, 1, 1}, bound, rng));
        op.gen.hidden_bias = store.add(prefix + ".gen.hidden.bias", uniform_tensor({gen.hidden}, bound, rng));
        op.gen.weight = store.add(prefix + ".gen.weight", Tensor::zeros({cfg.c_in * k, gen.hidden, 1, 1}));
        op.gen.bias = store.add(prefix + ".gen.bias", Tensor::zeros({cfg.c_in * k}));
    } else {
        op.gen.weight = store.add(prefix + ".gen.weight", Tensor::zeros({1, cfg.c_in * k, 1, 1}));
        op.gen.bias = store.add(prefix + ".gen.bias", Tensor::zeros({1, cfg.c_in * k, 1, 1}));
    }
    return op;
}

Var gen2d_weights(const Var& features, const WeightGenerator2D& gen) {
    Var ctx = gen.options.adaptive ? features : ones_like(features);
    if (gen.options.hidden > 0) ctx = tanh(conv2d(ctx, gen.hidden_weight, gen.hidden_bias, 0));
    return sigmoid(conv2d(ctx, gen.weight, gen.bias, 0));
}

Var gen1d_weights(const Var& features, const WeightGenerator1D& gen) {
    if (features.dims().size() != 4 || features.dim(1) != gen.channels) {
        throw ShapeError("gen1d_weights: expected [B," + std::to_string(gen.channels) + ",H,W], got " +
                         shape_str(features.dims()));
    }
    Var ctx = gen.options.adaptive ? global_avg_pool(features)
                                   : Var::constant(Tensor::ones({features.dim(0), gen.channels, 1, 1}));
    if (gen.options.hidden > 0) {
        Var hidden = tanh(conv2d(ctx, gen.hidden_weight, gen.hidden_bias, 0));
        return sigmoid(conv2d(hidden, gen.weight, gen.bias, 0));
    }
    return sigmoid(add(mul(repeat_channels(ctx, gen.num_basis), gen.weight), gen.bias));
}

Var activation_features(const Var& features, const KanLayerConfig& cfg, Activation act) {
    Var squashed = tanh(features);
    if (act == Activation::spline) return basis_stack(squashed, cfg.basis);
    const std::size_t k = cfg.num_basis();
    return scale(repeat_channels(squashed, k), 1.0 / static_cast<double>(k));
}

Var activation_contract(const Var& squashed, const Var& coef, const KanLayerConfig& cfg, Activation act) {
    const auto& d = squashed.dims();
    if (d.size() != 4) throw ShapeError("activation_contract: input must be [B,C,H,W], got " + shape_str(d));
    const std::size_t batch = d[0], c = d[1], plane = d[2] * d[3], k = cfg.num_basis();
    const auto& cd = coef.dims();
    const bool per_pixel = cd == Shape{batch, k, d[2], d[3]};
    if (!per_pixel && cd != Shape{batch, c * k, 1, 1}) {
        throw ShapeError("activation_contract: coefficients " + shape_str(cd) + " fit neither [B,K,H,W] nor [B,C*K,1,1] for input " +
                         shape_str(d));
    }
    const SplineBasisSpec spec = cfg.basis;
    const bool cubic = act == Activation::spline && spec.family == BasisFamily::cubic_bspline;
    // Coefficient j of element (b, ch, p) lives at w[base + j * step].
    const std::size_t step = per_pixel ? plane : 1;
    auto base = [=](std::size_t b, std::size_t ch, std::size_t p) {
        return per_pixel ? b * k * plane + p : (b * c + ch) * k;
    };
    // Remaining families go through the full K-wide basis.
    auto features_at = [=](double t, double* phi, double* dphi) {
        basis_eval_into(t, spec, phi);
        if (dphi) basis_grad_into(t, spec, dphi);
    };

    Tensor out(d);
    if (cubic) {
        (per_pixel ? cubic_contract_fwd<true> : cubic_contract_fwd<false>)(squashed.value().raw(), coef.value().raw(), out.raw(),
                                                                          batch, c, plane, k, spec.grid_size);
    } else if (act == Activation::gated_tanh) {
        (per_pixel ? gated_contract<true> : gated_contract<false>)(squashed.value().raw(), coef.value().raw(), nullptr, out.raw(),
                                                                  nullptr, nullptr, batch, c, plane, k);
    } else {
        std::vector<double> phi(k);
        const double* t = squashed.value().raw();
        const double* w = coef.value().raw();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < plane; ++p) {
                    const std::size_t i = (b * c + ch) * plane + p;
                    const double* wp = w + base(b, ch, p);
                    features_at(t[i], phi.data(), nullptr);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < k; ++j) acc += wp[j * step] * phi[j];
                    out[i] = acc;
                }
    }
    return record(std::move(out), {squashed, coef}, [=](Node& self) {
        Node& nt = *self.parents[0];
        Node& nw = *self.parents[1];
        const double* t = nt.value.raw();
        const double* w = nw.value.raw();
        const double* g = self.grad.raw();
        Tensor gt(nt.value.dims()), gw(nw.value.dims(), 0.0);
        if (cubic) {
            (per_pixel ? cubic_contract_bwd<true> : cubic_contract_bwd<false>)(t, w, g, gt.raw(), gw.raw(), batch, c, plane, k,
                                                                              spec.grid_size);
        } else if (act == Activation::gated_tanh) {
            (per_pixel ? gated_contract<true> : gated_contract<false>)(t, w, g, nullptr, gt.raw(), gw.raw(), batch, c, plane, k);
        } else {
            std::vector<double> phi(k), dphi(k);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t p = 0; p < plane; ++p) {
                        const std::size_t i = (b * c + ch) * plane + p;
                        const std::size_t o = base(b, ch, p);
                        const double gv = g[i];
                        features_at(t[i], phi.data(), dphi.data());
                        double dt = 0.0;
                        for (std::size_t j = 0; j < k; ++j) {
                            dt += w[o + j * step] * dphi[j];
                            gw[o + j * step] += gv * phi[j];
                        }
                        gt[i] = gv * dt;
                    }
        }
        accumulate_grad(nt, gt);
        accumulate_grad(nw, gw);
    });
}

Var adaptive_kan2d_forward(const Var& features, const AdaptiveKan2D& op) {
    check_input(features, op.cfg, "adaptive_kan2d_forward");
    return adaptive_kan2d_forward(features, tanh(features), op);
}

Var adaptive_kan2d_forward(const Var& features, const Var& squashed, const AdaptiveKan2D& op) {
    check_input(features, op.cfg, "adaptive_kan2d_forward");
    Var coef = gen2d_weights(features, op.gen);
    return mix_edges(activation_contract(squashed, coef, op.cfg, op.activation), op.edges);
}

Var adaptive_kan1d_forward(const Var& features, const AdaptiveKan1D& op) {
    check_input(features, op.cfg, "adaptive_kan1d_forward");
    return adaptive_kan1d_forward(features, tanh(features), op);
}

Var adaptive_kan1d_forward(const Var& features, const Var& squashed, const AdaptiveKan1D& op) {
    check_input(features, op.cfg, "adaptive_kan1d_forward");
    Var coef = gen1d_weights(features, op.gen);
    return mix_edges(activation_contract(squashed, coef, op.cfg, op.activation), op.edges);
}

}  // namespace pakan
