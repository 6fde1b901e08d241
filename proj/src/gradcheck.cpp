#include "pakan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pakan/blocks.hpp"
#include "pakan/network.hpp"
#include "pakan/rng.hpp"

namespace pakan {

namespace {

Tensor random_tensor(Shape dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(dims));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Values bounded away from zero, for ops with a kink there.
Tensor offset_tensor(Shape dims, Rng& rng) {
    Tensor t(std::move(dims));
    for (auto& v : t.data()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
    return t;
}

// Smooth scalar readout with a fixed random weight per output entry.
struct Readout {
    Var weights;
    Var operator()(const Var& out) const { return sum(mul(out, weights)); }
};

Readout readout_for(const Shape& dims, Rng& rng) { return {Var::constant(random_tensor(dims, rng))}; }

void randomize(ParamStore& store, Rng& rng, double bound) {
    for (const auto& entry : store.entries()) {
        Var p = entry.second;
        for (auto& v : p.mutable_value().data()) v = rng.uniform(-bound, bound);
    }
}

std::vector<Var> leaves_of(const ParamStore& store, std::vector<Var> extra = {}) {
    for (const auto& e : store.entries()) extra.push_back(e.second);
    return extra;
}

}  // namespace

GradcheckResult gradcheck(const std::string& name, const std::function<Var()>& loss_fn, const std::vector<Var>& leaves,
                          std::uint64_t seed, std::size_t probes_per_leaf, double step) {
    for (const auto& l : leaves) {
        l.node().grad = Tensor(l.dims(), 0.0);
        l.node().touched = false;
    }
    backward(loss_fn());
    std::vector<Tensor> analytic;
    for (const auto& l : leaves) analytic.push_back(l.grad());

    GradcheckResult res{name, 0.0, 0, true};
    Rng rng(seed);
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Var leaf = leaves[li];
        const std::size_t n = leaf.value().numel();
        std::vector<std::size_t> idx;
        if (n <= probes_per_leaf) {
            for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        } else {
            for (std::size_t i = 0; i < probes_per_leaf; ++i) idx.push_back(rng.below(n));
        }
        for (std::size_t i : idx) {
            const double orig = leaf.value()[i];
            const double a = analytic[li][i];
            auto rel_error = [&](double h) {
                leaf.mutable_value()[i] = orig + h;
                const double fp = loss_fn().value().item();
                leaf.mutable_value()[i] = orig - h;
                const double fm = loss_fn().value().item();
                leaf.mutable_value()[i] = orig;
                const double num = (fp - fm) / (2 * h);
                return std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-3});
            };
            double rel = rel_error(step);
            // a relu kink inside [x-h, x+h] spoils the central difference; retry on a window 100x narrower
            if (!(rel < kGradcheckTolerance)) rel = std::min(rel, rel_error(step * 0.01));
            res.max_rel_error = std::max(res.max_rel_error, rel);
            ++res.checked;
        }
    }
    res.passed = res.max_rel_error < kGradcheckTolerance && std::isfinite(res.max_rel_error);
    return res;
}

std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed) {
    std::vector<GradcheckResult> out;
    Rng rng(mix_seed(seed, 0x67726164));
    std::uint64_t probe_seed = seed;
    auto check = [&](const std::string& name, const std::function<Var()>& fn, const std::vector<Var>& leaves) {
        out.push_back(gradcheck(name, fn, leaves, ++probe_seed));
    };

    // primitives
    {
        Var x = Var::leaf(random_tensor({2, 3, 5, 5}, rng));
        Var k = Var::leaf(random_tensor({4, 3, 3, 3}, rng));
        Var b = Var::leaf(random_tensor({4}, rng));
        Readout r = readout_for({2, 4, 5, 5}, rng);
        check("conv2d", [=] { return r(conv2d(x, k, b, 1)); }, {x, k, b});
    }
    {
        Var x = Var::leaf(random_tensor({2, 3, 4, 4}, rng));
        Var y = Var::leaf(random_tensor({2, 1, 4, 4}, rng));
        Var z = Var::leaf(random_tensor({1, 3, 1, 1}, rng));
        Readout r = readout_for({2, 3, 4, 4}, rng);
        check("elementwise_add_sub_mul", [=] { return r(mul(sub(add(x, y), z), add(x, z))); }, {x, y, z});
        check("elementwise_sigmoid_tanh", [=] { return r(mul(sigmoid(x), tanh(scale(x, 1.7)))); }, {x});
        Var w = Var::leaf(offset_tensor({2, 3, 4, 4}, rng));
        check("elementwise_relu", [=] { return r(relu(w)); }, {w});
    }
    {
        Var x = Var::leaf(random_tensor({1, 2, 4, 4}, rng));
        Var y = Var::leaf(random_tensor({1, 3, 4, 4}, rng));
        Readout r = readout_for({1, 5, 4, 4}, rng);
        check("concat_channels", [=] { return r(concat_channels(x, y)); }, {x, y});
        Readout rp = readout_for({1, 2, 1, 1}, rng);
        check("global_avg_pool", [=] { return rp(global_avg_pool(x)); }, {x});
        Readout ru = readout_for({1, 2, 16, 16}, rng);
        check("bilinear_up", [=] { return ru(resample(x, Resample::bilinear_up, 4)); }, {x});
        Readout rd = readout_for({1, 2, 2, 2}, rng);
        check("box_down", [=] { return rd(resample(x, Resample::box_down, 2)); }, {x});
        Readout rr = readout_for({1, 6, 4, 4}, rng);
        check("repeat_channels", [=] { return rr(repeat_channels(x, 3)); }, {x});
    }
    {
        Var stack = Var::leaf(random_tensor({2, 6, 3, 3}, rng));
        Var per_pixel = Var::leaf(random_tensor({2, 3, 3, 3}, rng));
        Var per_channel = Var::leaf(random_tensor({2, 6, 1, 1}, rng));
        Readout r = readout_for({2, 2, 3, 3}, rng);
        check("basis_contract_pixel", [=] { return r(basis_contract(stack, per_pixel, 3)); }, {stack, per_pixel});
        check("basis_contract_channel", [=] { return r(basis_contract(stack, per_channel, 3)); }, {stack, per_channel});
    }
    for (auto family : {BasisFamily::cubic_bspline, BasisFamily::triangular}) {
        SplineBasisSpec spec{family, 5};
        Var u = Var::leaf(random_tensor({1, 2, 4, 4}, rng, -0.95, 0.95));
        Readout r = readout_for({1, 2 * spec.num_basis(), 4, 4}, rng);
        const std::string tag = family == BasisFamily::cubic_bspline ? "cubic" : "triangular";
        check("basis_stack_" + tag, [=] { return r(basis_stack(u, spec)); }, {u});
    }
    {
        Var p = Var::leaf(offset_tensor({1, 2, 3, 3}, rng));
        Var t = Var::constant(Tensor({1, 2, 3, 3}, 0.0));
        check("l1_loss", [=] { return l1_loss(p, t); }, {p});
    }

    // KAN operators
    for (auto family : {BasisFamily::cubic_bspline, BasisFamily::triangular}) {
        ParamStore store;
        const auto cfg = KanLayerConfig::one_to_one(3, SplineBasisSpec{family, 5});
        auto w = make_static_kan(store, "kan", cfg, rng);
        randomize(store, rng, 0.5);
        Var x = Var::leaf(random_tensor({1, 3, 4, 4}, rng, -2, 2));
        Readout r = readout_for({1, 3, 4, 4}, rng);
        const std::string tag = family == BasisFamily::cubic_bspline ? "cubic" : "triangular";
        check("static_kan_" + tag, [=] { return r(static_kan_forward(x, w.w, cfg)); }, leaves_of(store, {x}));
    }
    for (auto mode : {OperatorMode::one_to_one, OperatorMode::two_to_one}) {
        for (std::size_t hidden : {0, 3}) {
            const std::string tag = std::string(mode == OperatorMode::one_to_one ? "1to1" : "2to1") +
                                    (hidden ? "_hidden" : "");
            const auto cfg = mode == OperatorMode::one_to_one ? KanLayerConfig::one_to_one(2) : KanLayerConfig::two_to_one(2);
            Var x = Var::leaf(random_tensor({2, cfg.c_in, 4, 4}, rng, -2, 2));
            Readout r = readout_for({2, cfg.c_out, 4, 4}, rng);
            {
                ParamStore store;
                auto op = make_adaptive_kan2d(store, "k2", cfg, {true, hidden}, Activation::spline, rng);
                randomize(store, rng, 0.5);
                check("adaptive_kan2d_" + tag, [=] { return r(adaptive_kan2d_forward(x, op)); }, leaves_of(store, {x}));
            }
            {
                ParamStore store;
                auto op = make_adaptive_kan1d(store, "k1", cfg, {true, hidden}, Activation::spline, rng);
                randomize(store, rng, 0.5);
                check("adaptive_kan1d_" + tag, [=] { return r(adaptive_kan1d_forward(x, op)); }, leaves_of(store, {x}));
            }
        }
    }
    {
        ParamStore store;
        const auto cfg = KanLayerConfig::one_to_one(2);
        auto op = make_adaptive_kan2d(store, "k2", cfg, {true, 0}, Activation::gated_tanh, rng);
        randomize(store, rng, 0.5);
        Var x = Var::leaf(random_tensor({1, 2, 4, 4}, rng, -2, 2));
        Readout r = readout_for({1, 2, 4, 4}, rng);
        check("adaptive_kan2d_gated_tanh", [=] { return r(adaptive_kan2d_forward(x, op)); }, leaves_of(store, {x}));
    }

    // blocks
    {
        ParamStore store;
        auto blk = make_pakan_1to1(store, "b", 3, BlockOptions{}, rng);
        randomize(store, rng, 0.5);
        Var x = Var::leaf(random_tensor({2, 3, 4, 4}, rng, -2, 2));
        Readout r = readout_for({2, 3, 4, 4}, rng);
        check("pakan_1to1", [=] { return r(pakan_1to1(x, blk)); }, leaves_of(store, {x}));
    }
    {
        ParamStore store;
        auto blk = make_pakan_2to1(store, "b", 3, BlockOptions{}, rng);
        randomize(store, rng, 0.5);
        Var x = Var::leaf(random_tensor({2, 3, 4, 4}, rng, -2, 2));
        Var y = Var::leaf(random_tensor({2, 3, 4, 4}, rng, -2, 2));
        Readout r = readout_for({2, 3, 4, 4}, rng);
        check("pakan_2to1", [=] { return r(pakan_2to1(x, y, blk)); }, leaves_of(store, {x, y}));
    }

    // network micro-instances, one per variant
    struct Variant {
        const char* name;
        bool pa, kan, use_1d, use_2d;
    };
    for (const Variant& v : {Variant{"full", true, true, true, true}, Variant{"pa-_kan-", false, false, true, true},
                             Variant{"pa-", false, true, true, true}, Variant{"kan-", true, false, true, true},
                             Variant{"1d_only", true, true, true, false}, Variant{"2d_only", true, true, false, true}}) {
        NetworkConfig cfg;
        cfg.bands = 4;
        cfg.width = 4;
        cfg.depth = 1;
        cfg.pa = v.pa;
        cfg.kan = v.kan;
        cfg.use_1d = v.use_1d;
        cfg.use_2d = v.use_2d;
        cfg.seed = seed;
        auto net = std::make_shared<PansharpNet>(build_network(cfg));
        randomize(net->params, rng, 0.3);
        Var ms = Var::leaf(random_tensor({1, 4, 8, 8}, rng, 0, 1));
        Var pan = Var::leaf(random_tensor({1, 1, 32, 32}, rng, 0, 1));
        Readout r = readout_for({1, 4, 32, 32}, rng);
        check(std::string("network_") + v.name, [=] { return r(network_forward(*net, ms, pan)); },
              leaves_of(net->params, {ms, pan}));
    }
    return out;
}

}  // namespace pakan
