#include "pakan/network.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pakan/error.hpp"

namespace pakan {

namespace {

Tensor uniform_tensor(Shape dims, double bound, Rng& rng) {
    Tensor t(std::move(dims));
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

std::pair<Var, Var> add_conv(ParamStore& store, const std::string& name, std::size_t cout, std::size_t cin, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * 9));
    Var w = store.add(name + ".weight", uniform_tensor({cout, cin, 3, 3}, bound, rng));
    Var b = store.add(name + ".bias", uniform_tensor({cout}, bound, rng));
    return {w, b};
}

std::size_t conv_params(std::size_t cout, std::size_t cin) { return cout * cin * 9 + cout; }

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("manifest key '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace

void NetworkConfig::validate() const {
    if (bands == 0) throw ConfigError("bands must be positive");
    if (width == 0) throw ConfigError("feature width must be positive");
    if (!use_1d && !use_2d) throw ConfigError("at least one of use_1d/use_2d must be enabled");
    basis.validate();
}

std::string NetworkConfig::variant_name() const {
    std::string s = std::string("pa") + (pa ? "+" : "-") + "_kan" + (kan ? "+" : "-");
    if (use_1d && !use_2d) s += "_1d-only";
    if (use_2d && !use_1d) s += "_2d-only";
    return s;
}

std::string NetworkConfig::to_manifest() const {
    std::ostringstream os;
    os << "bands=" << bands << " width=" << width << " depth=" << depth << " pa=" << pa << " kan=" << kan
       << " use_1d=" << use_1d << " use_2d=" << use_2d
       << " basis=" << (basis.family == BasisFamily::cubic_bspline ? "cubic_bspline" : "triangular")
       << " grid=" << basis.grid_size << " seed=" << seed;
    return os.str();
}

NetworkConfig NetworkConfig::from_manifest(const std::string& line) {
    NetworkConfig cfg;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed manifest token '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        try {
            if (key == "bands") cfg.bands = std::stoul(val);
            else if (key == "width") cfg.width = std::stoul(val);
            else if (key == "depth") cfg.depth = std::stoul(val);
            else if (key == "pa") cfg.pa = parse_bool(key, val);
            else if (key == "kan") cfg.kan = parse_bool(key, val);
            else if (key == "use_1d") cfg.use_1d = parse_bool(key, val);
            else if (key == "use_2d") cfg.use_2d = parse_bool(key, val);
            else if (key == "grid") cfg.basis.grid_size = std::stoul(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "basis") {
                if (val == "cubic_bspline") cfg.basis.family = BasisFamily::cubic_bspline;
                else if (val == "triangular") cfg.basis.family = BasisFamily::triangular;
                else throw ConfigError("unknown basis family '" + val + "'");
            } else {
                throw ConfigError("unknown manifest key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("manifest key '" + key + "' has non-numeric value '" + val + "'");
        }
    }
    cfg.validate();
    return cfg;
}

std::size_t network_param_count(const NetworkConfig& cfg, std::size_t hidden_2d, std::size_t hidden_1d) {
    const std::size_t c = cfg.bands, f = cfg.width;
    std::size_t n = conv_params(f, c) + conv_params(f, 1) + conv_params(c, f) + cfg.depth * conv_params(f, f);
    auto block = [&](const KanLayerConfig& k) {
        std::size_t b = 0;
        if (cfg.use_2d) b += adaptive_kan2d_param_count(k, hidden_2d);
        if (cfg.use_1d) b += adaptive_kan1d_param_count(k, hidden_1d);
        return b;
    };
    n += block(KanLayerConfig::two_to_one(f, cfg.basis));
    n += cfg.depth * block(KanLayerConfig::one_to_one(f, cfg.basis));
    return n;
}

std::size_t reference_param_count(const NetworkConfig& cfg) {
    NetworkConfig full = cfg;
    full.use_1d = full.use_2d = true;
    return network_param_count(full, 0, 0);
}

PansharpNet build_network(const NetworkConfig& cfg) {
    cfg.validate();
    PansharpNet net;
    net.cfg = cfg;

    // Single-branch variants get a generator hidden layer sized to close the parameter gap.
    const std::size_t target = reference_param_count(cfg);
    if (!(cfg.use_1d && cfg.use_2d)) {
        std::size_t best = 0;
        std::size_t best_gap = std::numeric_limits<std::size_t>::max();
        for (std::size_t h = 0; h <= 4096; ++h) {
            const std::size_t n = network_param_count(cfg, cfg.use_2d ? h : 0, cfg.use_1d ? h : 0);
            const std::size_t gap = n > target ? n - target : target - n;
            if (gap < best_gap) {
                best_gap = gap;
                best = h;
            }
            if (n > target) break;
        }
        (cfg.use_2d ? net.hidden_2d : net.hidden_1d) = best;
    }
    const std::size_t count = network_param_count(cfg, net.hidden_2d, net.hidden_1d);
    const double gap = std::abs(static_cast<double>(count) - static_cast<double>(target)) / static_cast<double>(target);
    if (gap > kParamParityTolerance) {
        throw ConfigError("variant " + cfg.variant_name() + " has " + std::to_string(count) + " parameters vs " +
                          std::to_string(target) + " for the full model (beyond 5%)");
    }

    Rng rng(cfg.seed);
    const BlockOptions opt{cfg.basis,   cfg.kan ? Activation::spline : Activation::gated_tanh,
                           cfg.pa,      cfg.use_2d,
                           cfg.use_1d,  net.hidden_2d,
                           net.hidden_1d};
    std::tie(net.stem_ms_w, net.stem_ms_b) = add_conv(net.params, "stem_ms", cfg.width, cfg.bands, rng);
    std::tie(net.stem_pan_w, net.stem_pan_b) = add_conv(net.params, "stem_pan", cfg.width, 1, rng);
    net.fuse = make_pakan_2to1(net.params, "fuse", cfg.width, opt, rng);
    for (std::size_t r = 0; r < cfg.depth; ++r) {
        const std::string p = "refine" + std::to_string(r);
        net.refine_blocks.push_back(make_pakan_1to1(net.params, p + ".block", cfg.width, opt, rng));
        auto [w, b] = add_conv(net.params, p + ".conv", cfg.width, cfg.width, rng);
        net.refine_w.push_back(w);
        net.refine_b.push_back(b);
    }
    net.head_w = net.params.add("head.weight", Tensor::zeros({cfg.bands, cfg.width, 3, 3}));
    net.head_b = net.params.add("head.bias", Tensor::zeros({cfg.bands}));

    if (net.params.total_elements() != count) {
        throw ContractError("parameter bookkeeping mismatch: " + std::to_string(net.params.total_elements()) + " vs " +
                            std::to_string(count));
    }
    return net;
}

Var network_forward_upsampled(const PansharpNet& net, const Var& ms_up, const Var& pan) {
    const auto& cfg = net.cfg;
    if (ms_up.dims().size() != 4 || ms_up.dim(1) != cfg.bands) {
        throw ShapeError("network: MS must be [B," + std::to_string(cfg.bands) + ",H,W], got " + shape_str(ms_up.dims()));
    }
    if (pan.dims().size() != 4 || pan.dim(1) != 1 || pan.dim(0) != ms_up.dim(0) || pan.dim(2) != ms_up.dim(2) ||
        pan.dim(3) != ms_up.dim(3)) {
        throw ShapeError("network: PAN " + shape_str(pan.dims()) + " does not match upsampled MS " + shape_str(ms_up.dims()));
    }
    Var x = relu(conv2d(ms_up, net.stem_ms_w, net.stem_ms_b, 1));
    Var y = relu(conv2d(pan, net.stem_pan_w, net.stem_pan_b, 1));
    Var f = pakan_2to1(x, y, net.fuse);
    for (std::size_t r = 0; r < net.refine_blocks.size(); ++r) {
        f = add(f, conv2d(pakan_1to1(f, net.refine_blocks[r]), net.refine_w[r], net.refine_b[r], 1));
    }
    return add(conv2d(f, net.head_w, net.head_b, 1), ms_up);
}

Var network_forward(const PansharpNet& net, const Var& ms, const Var& pan) {
    if (ms.dims().size() != 4 || pan.dims().size() != 4) {
        throw ShapeError("network: expected rank-4 MS and PAN, got " + shape_str(ms.dims()) + " and " + shape_str(pan.dims()));
    }
    if (pan.dim(2) != kScaleRatio * ms.dim(2) || pan.dim(3) != kScaleRatio * ms.dim(3)) {
        throw ShapeError("network: PAN spatial axes " + shape_str(pan.dims()) + " must be exactly 4x the MS axes " +
                         shape_str(ms.dims()));
    }
    return network_forward_upsampled(net, resample(ms, Resample::bilinear_up, kScaleRatio), pan);
}

Tensor predict(const PansharpNet& net, const Tensor& ms, const Tensor& pan) {
    const bool unbatched = ms.rank() == 3;
    Var out = network_forward(net, Var::constant(as_batch(ms)), Var::constant(as_batch(pan)));
    return unbatched ? drop_batch(out.value()) : out.value();
}

}  // namespace pakan
