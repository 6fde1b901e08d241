#include "pakan/train.hpp"

#include <algorithm>
#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <fstream>
#include <numeric>
#include <sstream>

#include "pakan/error.hpp"
#include "pakan/metrics.hpp"
#include "pakan/rng.hpp"

namespace pakan {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        n = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(n);
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double d = 0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' expects a real number, got '" + v + "'");
    }
    if (pos != v.size() || !std::isfinite(d)) throw ConfigError("'" + key + "' expects a real number, got '" + v + "'");
    return d;
}

bool parse_flag(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
    static const std::vector<std::string> k{"epochs", "batch_size", "lr",      "betas",      "weight_decay",
                                            "step_size", "gamma",   "seed",    "dataset",    "checkpoint",
                                            "log",    "width",      "depth",   "pa",         "kan",
                                            "use_1d", "use_2d",     "basis",   "grid"};
    return k;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "epochs") epochs = parse_count(key, v);
    else if (key == "batch_size") batch_size = parse_count(key, v);
    else if (key == "lr") lr = parse_real(key, v);
    else if (key == "betas") {
        const auto comma = v.find(',');
        if (comma == std::string::npos) throw ConfigError("'betas' expects two comma-separated reals, got '" + v + "'");
        beta1 = parse_real(key, trim(v.substr(0, comma)));
        beta2 = parse_real(key, trim(v.substr(comma + 1)));
    } else if (key == "weight_decay") weight_decay = parse_real(key, v);
    else if (key == "step_size") step_size = parse_count(key, v);
    else if (key == "gamma") gamma = parse_real(key, v);
    else if (key == "seed") seed = parse_count(key, v);
    else if (key == "dataset") dataset = v;
    else if (key == "checkpoint") checkpoint = v;
    else if (key == "log") log = v;
    else if (key == "width") width = parse_count(key, v);
    else if (key == "depth") depth = parse_count(key, v);
    else if (key == "pa") pa = parse_flag(key, v);
    else if (key == "kan") kan = parse_flag(key, v);
    else if (key == "use_1d") use_1d = parse_flag(key, v);
    else if (key == "use_2d") use_2d = parse_flag(key, v);
    else if (key == "basis") basis = v;
    else if (key == "grid") grid = parse_count(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(lr > 0)) throw ConfigError("lr must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must lie in [0,1)");
    if (weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
    if (step_size == 0) throw ConfigError("step_size must be positive");
    if (!(gamma > 0)) throw ConfigError("gamma must be positive");
    if (basis != "cubic_bspline" && basis != "triangular") throw ConfigError("unknown basis '" + basis + "'");
    network(1).validate();
}

NetworkConfig TrainConfig::network(std::size_t bands) const {
    NetworkConfig n;
    n.bands = bands;
    n.width = width;
    n.depth = depth;
    n.pa = pa;
    n.kan = kan;
    n.use_1d = use_1d;
    n.use_2d = use_2d;
    n.basis.family = basis == "triangular" ? BasisFamily::triangular : BasisFamily::cubic_bspline;
    n.basis.grid_size = grid;
    n.seed = seed;
    return n;
}

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_train_config(ss.str());
}

// ---------------------------------------------------------------------------

AdamState make_adam(const ParamStore& params, double beta1, double beta2, double weight_decay) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.weight_decay = weight_decay;
    for (const auto& [name, v] : params.entries()) {
        s.m.emplace_back(v.dims(), 0.0);
        s.v.emplace_back(v.dims(), 0.0);
    }
    return s;
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
    if (!params.has_fresh_gradients()) throw ContractError("adam_step called without a preceding backward pass");
    if (state.m.size() != params.size()) throw ContractError("optimizer state does not match the parameter store");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    std::size_t idx = 0;
    for (const auto& entry : params.entries()) {
        Var p = entry.second;
        Tensor& val = p.mutable_value();
        const Tensor& g = p.grad();
        Tensor& m = state.m[idx];
        Tensor& v = state.v[idx];
        ++idx;
        for (std::size_t i = 0; i < val.numel(); ++i) {
            const double gi = g[i] + state.weight_decay * val[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m[i] / bc1, vhat = v[i] / bc2;
            val[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
    params.zero_grad();
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
    return cfg.lr * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.step_size));
}

// ---------------------------------------------------------------------------

double evaluate_l1(const PansharpNet& net, const std::vector<SamplePair>& samples) {
    if (samples.empty()) throw ConfigError("evaluate_l1: empty sample set");
    double s = 0.0;
    for (const auto& smp : samples) {
        const Tensor pred = predict(net, smp.lr_ms, smp.pan);
        double e = 0.0;
        for (std::size_t i = 0; i < pred.numel(); ++i) e += std::abs(pred[i] - smp.gt[i]);
        s += e / static_cast<double>(pred.numel());
    }
    return s / static_cast<double>(samples.size());
}

double evaluate_sam(const PansharpNet& net, const std::vector<SamplePair>& samples) {
    if (samples.empty()) throw ConfigError("evaluate_sam: empty sample set");
    double s = 0.0;
    for (const auto& smp : samples) s += sam(predict(net, smp.lr_ms, smp.pan), smp.gt);
    return s / static_cast<double>(samples.size());
}

TrainResult train_network(const TrainConfig& cfg, const std::vector<SamplePair>& train_set,
                          const std::vector<SamplePair>& val_set, const EpochCallback& on_epoch) {
    cfg.validate();
#if defined(__GLIBC__)
    // Every step allocates and frees the same MB-sized buffers; keep them off mmap.
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    if (train_set.empty()) throw ConfigError("training split is empty");
    if (val_set.empty()) throw ConfigError("validation split is empty");
    const std::size_t bands = train_set.front().lr_ms.dim(0);

    TrainResult res;
    res.net = build_network(cfg.network(bands));
    PansharpNet& net = res.net;
    AdamState opt = make_adam(net.params, cfg.beta1, cfg.beta2, cfg.weight_decay);
    res.best_val_l1 = std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        const auto order = shuffled(train_set.size(), mix_seed(cfg.seed, epoch));
        double train_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const auto& s = train_set[order[i]];
                Var pred = network_forward(net, Var::constant(as_batch(s.lr_ms)), Var::constant(as_batch(s.pan)));
                Var loss = l1_loss(pred, Var::constant(as_batch(s.gt)));
                train_sum += loss.value().item();
                backward(scale(loss, inv));
            }
            adam_step(net.params, opt, lr);
        }
        EpochLog e{epoch, train_sum / static_cast<double>(train_set.size()), evaluate_l1(net, val_set),
                   evaluate_sam(net, val_set), lr};
        if (!std::isfinite(e.train_l1) || !std::isfinite(e.val_l1)) {
            throw Error("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
        }
        if (e.val_l1 < res.best_val_l1) {
            res.best_val_l1 = e.val_l1;
            res.best_epoch = epoch;
            res.best_params = net.params.snapshot();
        }
        res.log.push_back(e);
        if (on_epoch) on_epoch(e);
    }
    return res;
}

std::string format_log_header() { return "epoch\ttrain_l1\tval_l1\tval_sam\tlr"; }

std::string format_log_line(const EpochLog& e) {
    return std::to_string(e.epoch) + '\t' + format_real(e.train_l1) + '\t' + format_real(e.val_l1) + '\t' +
           format_real(e.val_sam) + '\t' + format_real(e.lr);
}

TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.dataset.empty()) throw ConfigError("no dataset path given");
    const auto manifest = read_manifest(cfg.dataset);
    const auto train_set = load_split(cfg.dataset, manifest, Split::train);
    const auto val_set = load_split(cfg.dataset, manifest, Split::val);

    std::ofstream log_file;
    if (!cfg.log.empty()) {
        log_file.open(cfg.log, std::ios::trunc);
        if (!log_file) throw Error("cannot open log '" + cfg.log + "'");
        log_file << format_log_header() << '\n';
    }
    auto res = train_network(cfg, train_set, val_set, [&](const EpochLog& e) {
        if (log_file.is_open()) log_file << format_log_line(e) << '\n' << std::flush;
        if (on_epoch) on_epoch(e);
    });
    save_checkpoint(cfg.checkpoint, res.net.cfg, res.best_params);
    return res;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& cfg, const NamedTensors& params) {
    pktn_write(path, params);
    std::ofstream os(path.string() + ".manifest", std::ios::trunc);
    os << cfg.to_manifest() << '\n';
    if (!os) throw Error("failed writing checkpoint manifest for '" + path.string() + "'");
}

void save_checkpoint(const std::filesystem::path& path, const PansharpNet& net) {
    save_checkpoint(path, net.cfg, net.params.snapshot());
}

PansharpNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path.string() + ".manifest");
    if (!is) throw Error("missing checkpoint manifest '" + path.string() + ".manifest'");
    std::string line;
    std::getline(is, line);
    PansharpNet net = build_network(NetworkConfig::from_manifest(line));
    const auto entries = pktn_read(path);
    for (const auto& [name, v] : net.params.entries()) (void)find_entry(entries, name);
    if (entries.size() != net.params.size()) {
        throw ValidationError("checkpoint '" + path.string() + "' holds " + std::to_string(entries.size()) +
                              " tensors, the network expects " + std::to_string(net.params.size()));
    }
    net.params.load_values(entries);
    return net;
}

}  // namespace pakan
