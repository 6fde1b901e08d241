#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pakan/data.hpp"
#include "pakan/network.hpp"

namespace pakan {

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.0;
    std::size_t step_size = 100;
    double gamma = 0.7;
    std::uint64_t seed = 0;
    std::string dataset;
    std::string checkpoint = "pakan.pktn";
    std::string log;  // empty: no log file
    // forwarded to NetworkConfig
    std::size_t width = 16;
    std::size_t depth = 2;
    bool pa = true;
    bool kan = true;
    bool use_1d = true;
    bool use_2d = true;
    std::string basis = "cubic_bspline";
    std::size_t grid = 5;

    void validate() const;
    /// Sets one field from its textual value; unknown keys throw ConfigError.
    void set(const std::string& key, const std::string& value);
    static const std::vector<std::string>& keys();
    NetworkConfig network(std::size_t bands) const;
};

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Bias-corrected Adam moments, one pair per parameter in store order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t t = 0;
    std::vector<Tensor> m, v;
};

AdamState make_adam(const ParamStore& params, double beta1 = 0.9, double beta2 = 0.999, double weight_decay = 0.0);

/// One update from the accumulated gradients, which are then cleared.
/// Throws ContractError when no backward pass has run since the last step.
void adam_step(ParamStore& params, AdamState& state, double lr);

/// lr * gamma^floor(epoch / step_size).
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

struct EpochLog {
    std::size_t epoch = 0;
    double train_l1 = 0.0;
    double val_l1 = 0.0;
    double val_sam = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_l1 = 0.0;
    NamedTensors best_params;
    PansharpNet net;  // state after the last epoch
};

/// Mean per-sample l1 between predictions and ground truth.
double evaluate_l1(const PansharpNet& net, const std::vector<SamplePair>& samples);
/// Mean per-sample SAM in degrees.
double evaluate_sam(const PansharpNet& net, const std::vector<SamplePair>& samples);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains on in-memory splits. Batches are split into single-sample passes whose
/// losses are scaled by 1/batch so the accumulated gradient is the batch mean.
TrainResult train_network(const TrainConfig& cfg, const std::vector<SamplePair>& train_set,
                          const std::vector<SamplePair>& val_set, const EpochCallback& on_epoch = {});

/// Full protocol: reads cfg.dataset, trains, writes the best-val checkpoint and
/// the TSV log (when cfg.log is set).
TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

std::string format_log_header();
std::string format_log_line(const EpochLog& e);

// Checkpoints: PKTN of named parameters plus `<path>.manifest` holding the NetworkConfig line.
void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& cfg, const NamedTensors& params);
void save_checkpoint(const std::filesystem::path& path, const PansharpNet& net);
PansharpNet load_checkpoint(const std::filesystem::path& path);

}  // namespace pakan
