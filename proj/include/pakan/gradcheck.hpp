#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pakan/graph.hpp"

namespace pakan {

inline constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;  // number of finite-difference probes
    bool passed = false;
};

/// Compares backward() against central differences for up to `probes_per_leaf`
/// entries of each leaf. Relative error is |a - n| / max(|a|, |n|, 1e-3), so
/// gradients below 1e-3 are judged on an absolute 1e-7 scale. A probe that
/// misses the tolerance is re-measured with step/100 and judged on the better
/// of the two, so a relu kink within one step of the probe is not reported.
GradcheckResult gradcheck(const std::string& name, const std::function<Var()>& loss_fn, const std::vector<Var>& leaves,
                          std::uint64_t seed, std::size_t probes_per_leaf = 24, double step = 1e-5);

/// Every primitive, the static and adaptive KAN operators, both blocks, and a
/// micro network (ms 8x8, pan 32x32) for each ablation variant.
std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace pakan
