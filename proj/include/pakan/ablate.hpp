#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pakan/train.hpp"

namespace pakan {

struct AblationVariant {
    std::string name;
    bool pa = true, kan = true, use_1d = true, use_2d = true;
};

/// Full model, the pa/kan grid, and the two single-branch models.
std::vector<AblationVariant> standard_variants();
/// Looks a variant up by name; throws ConfigError for unknown names.
AblationVariant find_variant(const std::string& name);

struct AblationRun {
    std::string variant;
    std::uint64_t seed = 0;
    std::size_t params = 0;
    double final_val_l1 = 0.0;
    double final_val_sam = 0.0;
    double best_val_l1 = 0.0;
};

using AblationCallback = std::function<void(const AblationRun&)>;

/// Trains every (variant, seed) pair with `base` otherwise unchanged.
std::vector<AblationRun> run_ablation(const TrainConfig& base, const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds, const std::vector<SamplePair>& train_set,
                                      const std::vector<SamplePair>& val_set, const AblationCallback& on_run = {});

/// Finds the run for (variant, seed); throws ConfigError when absent.
const AblationRun& find_run(const std::vector<AblationRun>& runs, const std::string& variant, std::uint64_t seed);

/// Per-run TSV rows followed by per-variant means.
std::string format_ablation_table(const std::vector<AblationRun>& runs);

}  // namespace pakan
